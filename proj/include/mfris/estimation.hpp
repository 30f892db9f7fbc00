#pragma once

#include "mfris/channel.hpp"
#include "mfris/numeric.hpp"
#include "mfris/scenario.hpp"
#include "mfris/training.hpp"
#include "mfris/types.hpp"

namespace mfris {

/// Row products phi^H(l) diag(g^H): row l holds the effective per-element
/// response of the schedule at slot l, for one face and one antenna.
CMatrix beam_row_products(const CMatrix& phi, const CVector& g);

/// Observation matrix Theta: all-ones first column (direct link), then the
/// row products.  L x (N+1).
CMatrix observation_matrix(const CMatrix& row_products);

/// Diagonal of the length-L noise covariance C_z for one antenna: the
/// surface noise forwarded through both faces' schedules plus receiver noise.
RVector noise_covariance(const BeamSchedule& schedule, const CVector& g,
                         double rx_noise_w);

/// Received pilot block of one coherence interval.
struct ObservationBlock {
  DespreadMode mode = DespreadMode::Ideal;
  CMatrix received;                // L x M; empty in ideal mode
  std::vector<CMatrix> despread;   // per user, L x M
  int user_count() const { return static_cast<int>(despread.size()); }
};

/// Simulates the uplink pilot phase.  Full mode superimposes every user on
/// the carrier pilots and despreads afterwards; ideal mode hands each user
/// its own observation directly.  Both modes share the same noise draws, so
/// a single all-ones-pilot user gives bit-identical observations in either.
ObservationBlock synthesize_rx(const ChannelSet& ch,
                               const BeamSchedule& schedule,
                               const PilotBook& pilots,
                               const SystemConfig& cfg, Crng& rng);

/// Projects user k's contribution out of a full received block.
CMatrix despread(const CMatrix& received, const PilotBook& pilots, int user);

/// Precomputed whitened least-squares operator for one observation matrix.
struct LsEstimator {
  CMatrix pseudo;           // (N+1) x L, (Theta^H W Theta)^{-1} Theta^H W
  CMatrix covariance_unit;  // (N+1) x (N+1), (Theta^H W Theta)^{-1}
};

/// Builds the estimator, whitening by the diagonal covariance.  A zero
/// covariance degenerates to the unwhitened least squares.  Throws
/// SingularityError naming `label` when the normal matrix is too
/// ill-conditioned.
LsEstimator make_ls_estimator(const CMatrix& theta, const RVector& cz_diag,
                              const std::string& label = "observation matrix");

/// One-shot whitened LS: estimate of [h; scaled cascade] from y, and its
/// covariance 1/P (Theta^H C_z^{-1} Theta)^{-1}.
CVector ls_estimate(const CVector& y, const CMatrix& theta,
                    const RVector& cz_diag, double power_w);
CMatrix ls_covariance(const CMatrix& theta, const RVector& cz_diag,
                      double power_w);

/// Unwhitened variant, (Theta^H Theta)^{-1} Theta^H y / sqrt(P).
CVector simplified_ls_estimate(const CVector& y, const CMatrix& theta,
                               double power_w);

/// Combined channel estimates for the whole block.
struct EstimateSet {
  CMatrix h_hat;  // M x K direct links
  CMatrix f_hat;  // N x K cascades, antenna-averaged; zero column if unserved
  std::vector<CMatrix> f_hat_per_antenna;  // per user, N x M, phase-aligned
  std::vector<bool> cascade_available;
  std::vector<CMatrix> covariance;  // per user, of the per-antenna estimate
};

/// Fuses per-antenna raw estimates.  raw[k] is (N+1) x M (or 1 x M for a
/// user whose face the schedule does not serve); column m was estimated
/// against the first antenna's observation matrix, so its cascade block
/// carries the factor u_m, which is removed here before averaging.
EstimateSet combine_estimates(const std::vector<CMatrix>& raw,
                              const CVector& antenna_factor);

}  // namespace mfris
