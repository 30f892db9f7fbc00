#pragma once

#include <Eigen/Dense>

#include <complex>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace mfris {

template <typename Scalar>
using ComplexMatrix =
    Eigen::Matrix<std::complex<Scalar>, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Scalar>
using ComplexVector = Eigen::Matrix<std::complex<Scalar>, Eigen::Dynamic, 1>;
template <typename Scalar>
using RealMatrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Scalar>
using RealVector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

using Complex = std::complex<double>;
using CMatrix = ComplexMatrix<double>;
using CVector = ComplexVector<double>;
using RMatrix = RealMatrix<double>;
using RVector = RealVector<double>;

/// Which face of the surface a user sits on.
enum class Side { Reflect, Refract };

constexpr Side other_side(Side s) {
  return s == Side::Reflect ? Side::Refract : Side::Reflect;
}
constexpr int side_index(Side s) { return s == Side::Reflect ? 0 : 1; }

/// Training-beam schemes the harness can run.
enum class Scheme { DftMfris, OnOffMfris, Star, Active, Passive };

constexpr int scheme_count = 5;

/// How per-user observations are produced from the received block.
enum class DespreadMode { Ideal, Full };

/// Coordinate update used inside the alternating amplification solver.
enum class UpdateRule { Oracle, ClosedForm };

std::string to_string(Side s);
std::string to_string(Scheme s);
std::string to_string(DespreadMode m);
std::string to_string(UpdateRule r);

Side side_from_string(const std::string& tag);
Scheme scheme_from_string(const std::string& tag);
DespreadMode despread_mode_from_string(const std::string& tag);
UpdateRule update_rule_from_string(const std::string& tag);

/// One row of the alternating-optimization trace.
struct TraceEntry {
  double a_reflect = 0.0;
  double a_refract = 0.0;
  double epsilon = 0.0;
};

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid or inconsistent scenario description.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Mismatched matrix/vector dimensions between pipeline stages.
class DimensionError : public Error {
 public:
  using Error::Error;
};

/// Normal-equation system too ill-conditioned to invert.
class SingularityError : public Error {
 public:
  using Error::Error;
};

/// Requested amplification outside the per-element power budget.
class InfeasibilityError : public Error {
 public:
  using Error::Error;
};

/// Closed-form expression evaluated where it is undefined.
class DegenerateModeError : public Error {
 public:
  using Error::Error;
};

/// File could not be read, written, or parsed.
class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace mfris
