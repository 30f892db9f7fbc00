#pragma once

#include <optional>

#include "mfris/scenario.hpp"
#include "mfris/training.hpp"
#include "mfris/types.hpp"

namespace mfris {

struct ChannelSet;
struct EstimateSet;

/// Closed-form error contributions of one user: direct link and cascade.
struct UserErrorTerms {
  double direct = 0.0;
  double cascade = 0.0;
};

struct TheoreticalEpsilon {
  double total = 0.0;
  std::vector<UserErrorTerms> per_user;  // one entry per config user
};

/// Closed-form estimation error of the DFT-steered design at (a_R, a_T).
/// surface_noise_w overrides the config's surface noise (passive baselines
/// inject none); pass cfg.surface_noise_w for the plain case.  Throws
/// DegenerateModeError when a face with users has a zero factor.
TheoreticalEpsilon theoretical_epsilon(double a_reflect, double a_refract,
                                       const SystemConfig& cfg,
                                       double surface_noise_w);

inline TheoreticalEpsilon theoretical_epsilon(double a_reflect,
                                              double a_refract,
                                              const SystemConfig& cfg) {
  return theoretical_epsilon(a_reflect, a_refract, cfg, cfg.surface_noise_w);
}

/// Error report for the single-face regime: the served face's direct-link
/// error is finite, cascade error on the dark face is unbounded.  The
/// unbounded part is an explicit state, never a float sentinel.
struct DegenerateEpsilon {
  Side active = Side::Reflect;
  double direct = 0.0;
  bool cascade_unbounded = true;
};

DegenerateEpsilon degenerate_epsilon(Side active, const SystemConfig& cfg,
                                     double surface_noise_w);

/// Per-component estimation lower bounds: reciprocal of the Fisher
/// information diagonal for one user at power_w.
RVector crlb(const CMatrix& theta, const RVector& cz_diag, double power_w);

/// Norm-metric error prediction computed from the schedule matrices rather
/// than the closed forms, so it covers non-orthogonal schedules too.
/// direct = E||h_k - h_hat_k||^2 over all antennas; cascade = E||f_k -
/// f_hat_k||^2 of the antenna-combined estimate.  independent_noise selects
/// whether each antenna sees its own surface-noise realization.
struct ErrorPrediction {
  double total = 0.0;
  std::vector<UserErrorTerms> per_user;
  std::vector<bool> served;
};

ErrorPrediction predict_norm_error(const BeamSchedule& schedule,
                                   const CVector& g1, const SystemConfig& cfg,
                                   bool independent_noise);

/// Empirical squared errors of one trial.
struct TrialScore {
  std::vector<double> direct_sq;   // per user, ||h_k - h_hat_k||^2
  std::vector<double> cascade_sq;  // per user, ||f_k - f_hat_k||^2; 0 if unserved
  std::vector<bool> cascade_scored;
  std::vector<double> excluded_sq;  // per user, ||f_k||^2 when unserved, else 0
  double total() const;
};

TrialScore empirical_sum_mse(const ChannelSet& truth, const EstimateSet& est);

/// Aggregated outcome of one or many trials of one scheme at one config.
struct ErrorReport {
  Scheme scheme = Scheme::DftMfris;
  int trials = 0;
  std::uint64_t seed = 0;
  double a_reflect = 0.0;
  double a_refract = 0.0;

  double eps_empirical = 0.0;  // mean sum of squared norms, all users
  double eps_empirical_se = 0.0;  // standard error of that mean
  double eps_theory = 0.0;     // closed-form weighting: direct/M + cascade
  double eps_norm_theory = 0.0;  // norm weighting: direct + cascade (matches
                                 // eps_empirical in expectation)

  std::vector<double> per_user_direct;   // empirical means
  std::vector<double> per_user_cascade;  // empirical means (served users)
  std::vector<UserErrorTerms> theory_per_user;
  std::vector<bool> served;
  double excluded_cascade = 0.0;  // mean ||f_k||^2 over unserved users

  std::vector<RVector> crlb_per_user;  // per-component bounds, one per user

  std::optional<DegenerateEpsilon> degenerate;

  // Present when the scheme ran the amplification solver.
  int solver_iterations = 0;
  bool solver_converged = false;
  std::vector<TraceEntry> solver_trace;
};

}  // namespace mfris
