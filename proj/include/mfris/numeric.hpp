#pragma once

#include <charconv>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <random>
#include <string>

#include "mfris/types.hpp"

namespace mfris {

/// One step of the splitmix64 sequence; advances state, returns the output.
inline std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9e3779b97f4a7c15ull);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

/// Collapses a tuple of integers (seed, point, scheme, trial, ...) into one
/// stream seed.  Order-sensitive, so distinct tuples give distinct streams.
inline std::uint64_t mix_seed(std::initializer_list<std::uint64_t> parts) {
  std::uint64_t state = 0x6d9f1c7e3a2b5408ull;
  for (std::uint64_t p : parts) {
    state ^= splitmix64(state) + p;
    (void)splitmix64(state);
  }
  return splitmix64(state);
}

/// Deterministic complex-Gaussian source.  The polar method is hand-rolled so
/// draws are reproducible across standard libraries.
class Crng {
 public:
  explicit Crng(std::uint64_t seed) : engine_(seed) {}

  /// Uniform on [0, 1).
  double uniform() {
    constexpr double scale = 1.0 / 9007199254740992.0;  // 2^-53
    return static_cast<double>(engine_() >> 11) * scale;
  }

  /// Standard real normal.
  double normal() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    double u, v, s;
    do {
      u = 2.0 * uniform() - 1.0;
      v = 2.0 * uniform() - 1.0;
      s = u * u + v * v;
    } while (s >= 1.0 || s == 0.0);
    const double r = std::sqrt(-2.0 * std::log(s) / s);
    spare_ = v * r;
    have_spare_ = true;
    return u * r;
  }

  /// Circularly-symmetric complex normal with the given total variance.
  Complex cnormal(double variance) {
    const double s = std::sqrt(variance / 2.0);
    const double re = s * normal();
    const double im = s * normal();
    return Complex(re, im);
  }

  /// Uniform phase factor e^{j psi}, psi on [0, 2 pi).
  Complex phase() {
    const double psi = 2.0 * M_PI * uniform();
    return Complex(std::cos(psi), std::sin(psi));
  }

  std::uint64_t raw() { return engine_(); }

 private:
  std::mt19937_64 engine_;
  bool have_spare_ = false;
  double spare_ = 0.0;
};

template <typename Scalar>
struct GoldenResult {
  Scalar x = Scalar(0);
  Scalar value = Scalar(0);
  int evaluations = 0;
};

/// Golden-section minimum of a unimodal f over [lo, hi].
template <typename Scalar, typename F>
GoldenResult<Scalar> golden_section_min(F&& f, Scalar lo, Scalar hi,
                                        Scalar tol, int max_iter = 200) {
  const Scalar phi = (std::sqrt(Scalar(5)) - Scalar(1)) / Scalar(2);
  Scalar a = lo, b = hi;
  Scalar c = b - phi * (b - a);
  Scalar d = a + phi * (b - a);
  Scalar fc = f(c), fd = f(d);
  int evals = 2;
  for (int i = 0; i < max_iter && (b - a) > tol; ++i) {
    if (fc < fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - phi * (b - a);
      fc = f(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + phi * (b - a);
      fd = f(d);
    }
    ++evals;
  }
  GoldenResult<Scalar> out;
  out.x = (fc < fd) ? c : d;
  out.value = (fc < fd) ? fc : fd;
  // The bracket endpoints can beat the interior probes near a boundary
  // optimum, so check them too.
  const Scalar fl = f(lo), fh = f(hi);
  evals += 2;
  if (fl < out.value) {
    out.x = lo;
    out.value = fl;
  }
  if (fh < out.value) {
    out.x = hi;
    out.value = fh;
  }
  out.evaluations = evals;
  return out;
}

/// Pairwise (cascade) summation; order depends only on n.
inline double pairwise_sum(const double* v, std::size_t n) {
  if (n <= 8) {
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) acc += v[i];
    return acc;
  }
  const std::size_t half = n / 2;
  return pairwise_sum(v, half) + pairwise_sum(v + half, n - half);
}

inline double pairwise_sum(const std::vector<double>& v) {
  return pairwise_sum(v.data(), v.size());
}

/// Shortest decimal string that round-trips to the same double.
inline std::string format_double(double x) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), x);
  return std::string(buf, res.ptr);
}

}  // namespace mfris
