#include "mfris/scenario.hpp"

#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "mfris/numeric.hpp"

namespace mfris {

std::string to_string(Side s) {
  return s == Side::Reflect ? "reflect" : "refract";
}

std::string to_string(Scheme s) {
  switch (s) {
    case Scheme::DftMfris: return "dft-mfris";
    case Scheme::OnOffMfris: return "onoff-mfris";
    case Scheme::Star: return "star";
    case Scheme::Active: return "active";
    case Scheme::Passive: return "passive";
  }
  return "dft-mfris";
}

std::string to_string(DespreadMode m) {
  return m == DespreadMode::Ideal ? "ideal" : "full";
}

std::string to_string(UpdateRule r) {
  return r == UpdateRule::Oracle ? "oracle" : "closed-form";
}

Side side_from_string(const std::string& tag) {
  if (tag == "reflect") return Side::Reflect;
  if (tag == "refract") return Side::Refract;
  throw ConfigError("unknown side '" + tag + "' (expected reflect|refract)");
}

Scheme scheme_from_string(const std::string& tag) {
  if (tag == "dft-mfris") return Scheme::DftMfris;
  if (tag == "onoff-mfris") return Scheme::OnOffMfris;
  if (tag == "star") return Scheme::Star;
  if (tag == "active") return Scheme::Active;
  if (tag == "passive") return Scheme::Passive;
  throw ConfigError("unknown scheme '" + tag +
                    "' (expected dft-mfris|onoff-mfris|star|active|passive)");
}

DespreadMode despread_mode_from_string(const std::string& tag) {
  if (tag == "ideal") return DespreadMode::Ideal;
  if (tag == "full") return DespreadMode::Full;
  throw ConfigError("unknown despread mode '" + tag + "' (expected ideal|full)");
}

UpdateRule update_rule_from_string(const std::string& tag) {
  if (tag == "oracle") return UpdateRule::Oracle;
  if (tag == "closed-form") return UpdateRule::ClosedForm;
  throw ConfigError("unknown update rule '" + tag +
                    "' (expected oracle|closed-form)");
}

double dbm_to_watts(double dbm) { return std::pow(10.0, (dbm - 30.0) / 10.0); }

double watts_to_dbm(double watts) { return 10.0 * std::log10(watts) + 30.0; }

double db_to_linear(double db) { return std::pow(10.0, db / 10.0); }

double linear_to_db(double value) { return 10.0 * std::log10(value); }

double path_loss(double distance_m, double exponent, double ref) {
  if (!(distance_m > 0.0)) {
    throw ConfigError("path_loss: distance must be > 0, got " +
                      format_double(distance_m));
  }
  return ref * std::pow(distance_m, -exponent);
}

int SystemConfig::users_on(Side s) const {
  int n = 0;
  for (const auto& u : users) n += (u.side == s) ? 1 : 0;
  return n;
}

double SystemConfig::ris_bs_gain() const {
  return path_loss(bs_ris_dist_m, exponent_ris_bs, ref_path_loss);
}

double SystemConfig::amplification_budget() const {
  return beta_max * ris_bs_gain();
}

std::vector<std::string> validation_errors(const SystemConfig& cfg) {
  std::vector<std::string> errs;
  auto fail = [&errs](const std::string& msg) { errs.push_back(msg); };

  if (cfg.antennas < 1)
    fail("M >= 1 violated (M=" + std::to_string(cfg.antennas) + ")");
  if (cfg.elements < 1)
    fail("N >= 1 violated (N=" + std::to_string(cfg.elements) + ")");
  if (cfg.pilot_len < cfg.elements + 1)
    fail("L >= N+1 violated (L=" + std::to_string(cfg.pilot_len) +
         ", N=" + std::to_string(cfg.elements) + ")");
  if (cfg.pilot_len < cfg.user_count())
    fail("L >= K violated (L=" + std::to_string(cfg.pilot_len) +
         ", K=" + std::to_string(cfg.user_count()) + ")");
  if (cfg.users.empty()) fail("at least one user required");
  for (int k = 0; k < cfg.user_count(); ++k) {
    const auto& u = cfg.users[static_cast<std::size_t>(k)];
    const std::string who = "users[" + std::to_string(k) + "]: ";
    if (!(u.power_w > 0.0) || !std::isfinite(u.power_w))
      fail(who + "power > 0 violated (power_w=" + format_double(u.power_w) +
           ")");
    if (!(u.dist_ris_m > 0.0) || !std::isfinite(u.dist_ris_m))
      fail(who + "d_ris > 0 violated (d_ris=" + format_double(u.dist_ris_m) +
           ")");
    if (!(u.dist_bs_m > 0.0) || !std::isfinite(u.dist_bs_m))
      fail(who + "d_bs > 0 violated (d_bs=" + format_double(u.dist_bs_m) + ")");
  }
  // Noise powers may be exactly zero (noiseless probes); negative is invalid.
  if (!(cfg.surface_noise_w >= 0.0) || !std::isfinite(cfg.surface_noise_w))
    fail("sigma_s^2 >= 0 violated (sigma_s^2=" +
         format_double(cfg.surface_noise_w) + ")");
  if (!(cfg.rx_noise_w >= 0.0) || !std::isfinite(cfg.rx_noise_w))
    fail("sigma^2 >= 0 violated (sigma^2=" + format_double(cfg.rx_noise_w) +
         ")");
  if (!(cfg.beta_max >= 1.0) || !std::isfinite(cfg.beta_max))
    fail("beta_max >= 1 violated (beta_max=" + format_double(cfg.beta_max) +
         ")");
  if (!(cfg.bs_ris_dist_m > 0.0) || !std::isfinite(cfg.bs_ris_dist_m))
    fail("d_bs_ris > 0 violated (d_bs_ris=" +
         format_double(cfg.bs_ris_dist_m) + ")");
  if (!(cfg.ref_path_loss > 0.0) || !std::isfinite(cfg.ref_path_loss))
    fail("pl_ref > 0 violated (pl_ref=" + format_double(cfg.ref_path_loss) +
         ")");
  return errs;
}

const SystemConfig& validate(const SystemConfig& cfg) {
  const auto errs = validation_errors(cfg);
  if (!errs.empty()) {
    std::string msg = "invalid config:";
    for (const auto& e : errs) msg += "\n  " + e;
    throw ConfigError(msg);
  }
  return cfg;
}

SystemConfig default_config() {
  SystemConfig cfg;
  cfg.users.resize(2);
  cfg.users[0].side = Side::Reflect;
  cfg.users[1].side = Side::Refract;
  return cfg;
}

namespace {

bool parse_double(const std::string& s, double& out) {
  try {
    std::size_t pos = 0;
    out = std::stod(s, &pos);
    return pos == s.size();
  } catch (const std::exception&) {
    return false;
  }
}

bool parse_int(const std::string& s, int& out) {
  try {
    std::size_t pos = 0;
    out = std::stoi(s, &pos);
    return pos == s.size();
  } catch (const std::exception&) {
    return false;
  }
}

bool parse_u64(const std::string& s, std::uint64_t& out) {
  try {
    std::size_t pos = 0;
    out = std::stoull(s, &pos);
    return pos == s.size();
  } catch (const std::exception&) {
    return false;
  }
}

bool parse_switch(const std::string& s, bool& out) {
  if (s == "on") {
    out = true;
    return true;
  }
  if (s == "off") {
    out = false;
    return true;
  }
  return false;
}

std::vector<std::string> tokenize(const std::string& line) {
  std::vector<std::string> toks;
  std::istringstream in(line);
  std::string t;
  while (in >> t) toks.push_back(t);
  return toks;
}

}  // namespace

SystemConfig parse_config_text(const std::string& text) {
  SystemConfig cfg;
  cfg.users.clear();

  std::set<std::string> seen;
  bool have_pilot_len = false;

  // Keys that must appear exactly once.
  const std::set<std::string> mandatory = {
      "M",      "N",           "sigma_s_dbm",        "sigma_dbm",
      "beta_max_db", "d_bs_ris", "pl_exponent_ris_bs", "pl_ref"};

  std::istringstream in(text);
  std::string raw;
  int lineno = 0;
  while (std::getline(in, raw)) {
    ++lineno;
    const auto hash = raw.find('#');
    if (hash != std::string::npos) raw.erase(hash);
    const auto toks = tokenize(raw);
    if (toks.empty()) continue;

    const std::string& key = toks[0];
    auto where = [&]() { return " (line " + std::to_string(lineno) + ")"; };
    auto need = [&](std::size_t n) {
      if (toks.size() != n + 1)
        throw ConfigError("key '" + key + "' expects " + std::to_string(n) +
                          " value(s)" + where());
    };
    auto once = [&]() {
      if (!seen.insert(key).second)
        throw ConfigError("key '" + key + "' repeated" + where());
    };
    auto num = [&](const std::string& s) {
      double v = 0.0;
      if (!parse_double(s, v))
        throw ConfigError("key '" + key + "': bad number '" + s + "'" +
                          where());
      return v;
    };

    if (key == "user") {
      need(4);
      UserSpec u;
      try {
        u.side = side_from_string(toks[1]);
      } catch (const ConfigError& ex) {
        throw ConfigError(std::string(ex.what()) + where());
      }
      u.power_w = dbm_to_watts(num(toks[2]));
      u.dist_ris_m = num(toks[3]);
      u.dist_bs_m = num(toks[4]);
      cfg.users.push_back(u);
      continue;
    }

    need(1);
    once();
    const std::string& val = toks[1];
    if (key == "M") {
      if (!parse_int(val, cfg.antennas))
        throw ConfigError("key 'M': bad integer '" + val + "'" + where());
    } else if (key == "N") {
      if (!parse_int(val, cfg.elements))
        throw ConfigError("key 'N': bad integer '" + val + "'" + where());
    } else if (key == "L") {
      if (!parse_int(val, cfg.pilot_len))
        throw ConfigError("key 'L': bad integer '" + val + "'" + where());
      have_pilot_len = true;
    } else if (key == "sigma_s_dbm") {
      cfg.surface_noise_w = dbm_to_watts(num(val));
    } else if (key == "sigma_dbm") {
      cfg.rx_noise_w = dbm_to_watts(num(val));
    } else if (key == "beta_max_db") {
      cfg.beta_max = db_to_linear(num(val));
    } else if (key == "d_bs_ris") {
      cfg.bs_ris_dist_m = num(val);
    } else if (key == "pl_exponent_ris_bs") {
      cfg.exponent_ris_bs = num(val);
    } else if (key == "pl_exponent_user_ris") {
      cfg.exponent_user_ris = num(val);
    } else if (key == "pl_exponent_user_bs") {
      cfg.exponent_user_bs = num(val);
    } else if (key == "pl_ref") {
      cfg.ref_path_loss = num(val);
    } else if (key == "seed") {
      if (!parse_u64(val, cfg.seed))
        throw ConfigError("key 'seed': bad integer '" + val + "'" + where());
    } else if (key == "despread_mode") {
      cfg.despread = despread_mode_from_string(val);
    } else if (key == "scheme") {
      cfg.scheme = scheme_from_string(val);
    } else if (key == "update") {
      cfg.update = update_rule_from_string(val);
    } else if (key == "fair_comparison") {
      if (!parse_switch(val, cfg.fair_comparison))
        throw ConfigError("key 'fair_comparison': expected on|off" + where());
    } else if (key == "independent_surface_noise") {
      if (!parse_switch(val, cfg.independent_surface_noise))
        throw ConfigError("key 'independent_surface_noise': expected on|off" +
                          where());
    } else {
      throw ConfigError("unknown key '" + key + "'" + where());
    }
  }

  std::string missing;
  for (const auto& key : mandatory) {
    if (!seen.count(key)) missing += missing.empty() ? key : (", " + key);
  }
  if (!missing.empty())
    throw ConfigError("missing mandatory key(s): " + missing);
  if (cfg.users.empty())
    throw ConfigError("missing mandatory key(s): user (at least one)");
  if (!have_pilot_len) cfg.pilot_len = cfg.elements + 1;

  validate(cfg);
  return cfg;
}

SystemConfig load_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config file '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_config_text(buf.str());
}

std::string format_config(const SystemConfig& cfg) {
  std::ostringstream out;
  out << "M " << cfg.antennas << "\n";
  out << "N " << cfg.elements << "\n";
  out << "L " << cfg.pilot_len << "\n";
  out << "sigma_s_dbm " << format_double(watts_to_dbm(cfg.surface_noise_w))
      << "\n";
  out << "sigma_dbm " << format_double(watts_to_dbm(cfg.rx_noise_w)) << "\n";
  out << "beta_max_db " << format_double(linear_to_db(cfg.beta_max)) << "\n";
  out << "d_bs_ris " << format_double(cfg.bs_ris_dist_m) << "\n";
  out << "pl_exponent_ris_bs " << format_double(cfg.exponent_ris_bs) << "\n";
  out << "pl_exponent_user_ris " << format_double(cfg.exponent_user_ris)
      << "\n";
  out << "pl_exponent_user_bs " << format_double(cfg.exponent_user_bs) << "\n";
  out << "pl_ref " << format_double(cfg.ref_path_loss) << "\n";
  out << "seed " << cfg.seed << "\n";
  out << "despread_mode " << to_string(cfg.despread) << "\n";
  out << "scheme " << to_string(cfg.scheme) << "\n";
  out << "update " << to_string(cfg.update) << "\n";
  out << "fair_comparison " << (cfg.fair_comparison ? "on" : "off") << "\n";
  out << "independent_surface_noise "
      << (cfg.independent_surface_noise ? "on" : "off") << "\n";
  for (const auto& u : cfg.users) {
    out << "user " << to_string(u.side) << " "
        << format_double(watts_to_dbm(u.power_w)) << " "
        << format_double(u.dist_ris_m) << " " << format_double(u.dist_bs_m)
        << "\n";
  }
  return out.str();
}

}  // namespace mfris
