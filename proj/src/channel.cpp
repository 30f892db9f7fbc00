#include "mfris/channel.hpp"

#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

namespace mfris {

void gen_ris_bs(const SystemConfig& cfg, Crng& rng, CVector& g1,
                CVector& antenna_factor) {
  const int n = cfg.elements;
  const int m = cfg.antennas;
  const double amp = std::sqrt(cfg.ris_bs_gain());
  g1.resize(n);
  for (int i = 0; i < n; ++i) g1(i) = amp * rng.phase();
  antenna_factor.resize(m);
  antenna_factor(0) = Complex(1.0, 0.0);
  for (int i = 1; i < m; ++i) antenna_factor(i) = rng.phase();
}

void gen_user_links(const SystemConfig& cfg, Crng& rng, CMatrix& h,
                    CMatrix& f) {
  const int m = cfg.antennas;
  const int n = cfg.elements;
  const int k = cfg.user_count();
  h.resize(m, k);
  f.resize(n, k);
  for (int u = 0; u < k; ++u) {
    const auto& spec = cfg.users[static_cast<std::size_t>(u)];
    const double var_h =
        path_loss(spec.dist_bs_m, cfg.exponent_user_bs, cfg.ref_path_loss);
    for (int i = 0; i < m; ++i) h(i, u) = rng.cnormal(var_h);
  }
  for (int u = 0; u < k; ++u) {
    const auto& spec = cfg.users[static_cast<std::size_t>(u)];
    const double var_f =
        path_loss(spec.dist_ris_m, cfg.exponent_user_ris, cfg.ref_path_loss);
    for (int i = 0; i < n; ++i) f(i, u) = rng.cnormal(var_f);
  }
}

ChannelSet gen_channels(const SystemConfig& cfg, Crng& rng) {
  ChannelSet ch;
  gen_ris_bs(cfg, rng, ch.g1, ch.antenna_factor);
  gen_user_links(cfg, rng, ch.h, ch.f);
  ch.sides.resize(static_cast<std::size_t>(cfg.user_count()));
  for (int u = 0; u < cfg.user_count(); ++u)
    ch.sides[static_cast<std::size_t>(u)] =
        cfg.users[static_cast<std::size_t>(u)].side;
  return ch;
}

namespace {

void write_cell(std::ostream& out, const Complex& c) {
  out << format_double(c.real()) << "," << format_double(c.imag());
}

Complex read_cell(const std::string& tok) {
  const auto comma = tok.find(',');
  if (comma == std::string::npos)
    throw IoError("channel dump: bad cell '" + tok + "'");
  double re = 0.0, im = 0.0;
  try {
    std::size_t p1 = 0, p2 = 0;
    re = std::stod(tok.substr(0, comma), &p1);
    im = std::stod(tok.substr(comma + 1), &p2);
    if (p1 != comma || p2 != tok.size() - comma - 1)
      throw IoError("channel dump: bad cell '" + tok + "'");
  } catch (const IoError&) {
    throw;
  } catch (const std::exception&) {
    throw IoError("channel dump: bad cell '" + tok + "'");
  }
  return Complex(re, im);
}

void write_vector(std::ostream& out, const std::string& name,
                  const CVector& v) {
  out << name;
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    out << " ";
    write_cell(out, v(i));
  }
  out << "\n";
}

void write_matrix(std::ostream& out, const std::string& name,
                  const CMatrix& m) {
  out << name << "\n";
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
      if (c > 0) out << " ";
      write_cell(out, m(r, c));
    }
    out << "\n";
  }
}

}  // namespace

void dump_channels(const ChannelSet& ch, std::ostream& out) {
  out << "mfris-channels v1\n";
  out << "dims " << ch.antennas() << " " << ch.elements() << " "
      << ch.user_count() << "\n";
  out << "sides";
  for (Side s : ch.sides) out << " " << to_string(s);
  out << "\n";
  write_vector(out, "g1", ch.g1);
  write_vector(out, "antenna_factor", ch.antenna_factor);
  write_matrix(out, "h", ch.h);
  write_matrix(out, "f", ch.f);
}

ChannelSet load_channels(std::istream& in) {
  auto next_line = [&in]() {
    std::string line;
    if (!std::getline(in, line)) throw IoError("channel dump: truncated");
    return line;
  };

  if (next_line() != "mfris-channels v1")
    throw IoError("channel dump: bad header");

  int m = 0, n = 0, k = 0;
  {
    std::istringstream dims(next_line());
    std::string tag;
    if (!(dims >> tag >> m >> n >> k) || tag != "dims" || m < 1 || n < 1 ||
        k < 0)
      throw IoError("channel dump: bad dims line");
  }

  ChannelSet ch;
  {
    std::istringstream sides(next_line());
    std::string tag;
    if (!(sides >> tag) || tag != "sides")
      throw IoError("channel dump: bad sides line");
    std::string s;
    while (sides >> s) ch.sides.push_back(side_from_string(s));
    if (static_cast<int>(ch.sides.size()) != k)
      throw IoError("channel dump: side count mismatch");
  }

  auto read_vector = [&](const std::string& name, Eigen::Index len) {
    std::istringstream row(next_line());
    std::string tag;
    if (!(row >> tag) || tag != name)
      throw IoError("channel dump: expected '" + name + "' line");
    CVector v(len);
    std::string tok;
    for (Eigen::Index i = 0; i < len; ++i) {
      if (!(row >> tok)) throw IoError("channel dump: short '" + name + "'");
      v(i) = read_cell(tok);
    }
    if (row >> tok) throw IoError("channel dump: long '" + name + "'");
    return v;
  };

  auto read_matrix = [&](const std::string& name, Eigen::Index rows,
                         Eigen::Index cols) {
    if (next_line() != name)
      throw IoError("channel dump: expected '" + name + "' block");
    CMatrix out(rows, cols);
    for (Eigen::Index r = 0; r < rows; ++r) {
      std::istringstream row(next_line());
      std::string tok;
      for (Eigen::Index c = 0; c < cols; ++c) {
        if (!(row >> tok)) throw IoError("channel dump: short '" + name + "'");
        out(r, c) = read_cell(tok);
      }
      if (row >> tok) throw IoError("channel dump: long '" + name + "'");
    }
    return out;
  };

  ch.g1 = read_vector("g1", n);
  ch.antenna_factor = read_vector("antenna_factor", m);
  ch.h = read_matrix("h", m, k);
  ch.f = read_matrix("f", n, k);
  return ch;
}

void dump_channels_file(const ChannelSet& ch, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  dump_channels(ch, out);
  if (!out) throw IoError("write failed for '" + path + "'");
}

ChannelSet load_channels_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open channel dump '" + path + "'");
  return load_channels(in);
}

}  // namespace mfris
