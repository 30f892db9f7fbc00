#pragma once

#include "mfris/scenario.hpp"
#include "mfris/types.hpp"

namespace mfris {

/// Orthogonal pilot sequences, one column per user: s_k(l) = e^{j 2 pi l q_k / L}
/// with tone q_k = k for the zero-based user index.
struct PilotBook {
  CMatrix s;              // L x K
  std::vector<int> tone;  // K
  int pilot_len() const { return static_cast<int>(s.rows()); }
  int user_count() const { return static_cast<int>(s.cols()); }
};

PilotBook build_pilots(const SystemConfig& cfg);

/// First N+1 columns of the L-point DFT matrix; the training design uses the
/// last N of them (column 0 is the all-ones direct-link column).
struct DftBasis {
  CMatrix full;  // L x (N+1), entry (l, c) = e^{-j 2 pi l c / L}
  int pilot_len() const { return static_cast<int>(full.rows()); }
  int elements() const { return static_cast<int>(full.cols()) - 1; }
  /// Columns 1..N, the part the surface rows are steered to.
  auto schedule_cols() const { return full.rightCols(full.cols() - 1); }
};

DftBasis dft_basis(int pilot_len, int elements);

/// Per-slot surface coefficients for both faces, one column per pilot slot.
struct BeamSchedule {
  Scheme scheme = Scheme::DftMfris;
  CMatrix phi_reflect;  // N x L
  CMatrix phi_refract;  // N x L
  // Uniform amplification factors of the DFT-steered designs; zero for the
  // element-switching scheme, which has no single factor.
  double a_reflect = 0.0;
  double a_refract = 0.0;
  bool dft_steered = true;
  // Surface noise the scheme actually injects (zero for passive baselines).
  double surface_noise_w = 0.0;

  const CMatrix& phi(Side s) const {
    return s == Side::Reflect ? phi_reflect : phi_refract;
  }
  double a(Side s) const { return s == Side::Reflect ? a_reflect : a_refract; }
  int elements() const { return static_cast<int>(phi_reflect.rows()); }
  int pilot_len() const { return static_cast<int>(phi_reflect.cols()); }

  /// Whether cascades on this face are identifiable under the schedule.
  bool serves(Side s) const { return !dft_steered || a(s) > 0.0; }
};

/// DFT-steered schedule: phi_i^H(l) diag(g1^H) equals a_i times row l of the
/// basis' schedule columns, exactly.  Throws InfeasibilityError when
/// a_R^2 + a_T^2 exceeds beta_max * alpha, SingularityError when an element
/// response is zero.
BeamSchedule build_dft_schedule(double a_reflect, double a_refract,
                                const CVector& g1, const DftBasis& basis,
                                const SystemConfig& cfg);

/// Comparison schedules: element switching (onoff-mfris), energy-splitting
/// star, reflect-only passive, and reflect-only active surfaces.
BeamSchedule build_baseline_schedule(Scheme scheme, const SystemConfig& cfg,
                                     const CVector& g1, const DftBasis& basis);

/// Admissible interval (lo, hi] for one face's factor given the other's.
struct FeasibleRange {
  double lo = 0.0;
  double hi = 0.0;
};

FeasibleRange feasible_range_a(double a_other, const SystemConfig& cfg);

/// Stationary-point coordinate update in closed form, clamped to the feasible
/// cap.  Throws DegenerateModeError where the expression is undefined
/// (a_other = 0, or an empty face makes a power ratio meaningless).
double closed_form_a(Side side, double a_other, const SystemConfig& cfg);

/// Outcome of the alternating optimization.
struct AmplificationSolution {
  double a_reflect = 0.0;
  double a_refract = 0.0;
  double epsilon = 0.0;
  int iterations = 0;
  bool converged = false;
  std::vector<TraceEntry> trace;  // entry 0 is the initial point
  // Aggregates at the solution: summed face powers and the C_i couplings.
  double power_reflect = 0.0;
  double power_refract = 0.0;
  double coupling_reflect = 0.0;
  double coupling_refract = 0.0;
  // Largest relative objective gap observed between the numeric coordinate
  // update and the closed-form one (NaN when never comparable).
  double closed_form_divergence = 0.0;
};

/// Alternating per-face minimization of the theoretical error.  tol is the
/// absolute objective-change stop Delta; tol <= 0 selects 1e-12 times the
/// initial objective.  Accepts a coordinate candidate only when it does not
/// increase the objective, so the trace is monotone in either update rule.
AmplificationSolution optimize_amplification(const SystemConfig& cfg,
                                             double tol = 0.0,
                                             int max_iter = 100);

struct OracleOptimum {
  double a_reflect = 0.0;
  double a_refract = 0.0;
  double epsilon = 0.0;
};

/// Reference optimum: dense feasible-disc grid search followed by coordinate
/// refinement.  Independent of the alternating solver's update structure.
OracleOptimum oracle_optimum(const SystemConfig& cfg, int grid_resolution = 128);

}  // namespace mfris
