#include "mfris/analysis.hpp"

#include <cmath>
#include <limits>

#include "mfris/channel.hpp"
#include "mfris/estimation.hpp"

namespace mfris {

TheoreticalEpsilon theoretical_epsilon(double a_reflect, double a_refract,
                                       const SystemConfig& cfg,
                                       double surface_noise_w) {
  if (a_reflect < 0.0 || a_refract < 0.0)
    throw ConfigError("theoretical_epsilon: negative amplification");
  const double n = static_cast<double>(cfg.elements);
  const double m = static_cast<double>(cfg.antennas);
  const double len = static_cast<double>(cfg.pilot_len);
  const double sigma_s = surface_noise_w;
  const double sigma = cfg.rx_noise_w;
  const double common =
      n * (a_reflect * a_reflect + a_refract * a_refract) * sigma_s + sigma;

  TheoreticalEpsilon out;
  out.per_user.resize(cfg.users.size());
  for (std::size_t k = 0; k < cfg.users.size(); ++k) {
    const auto& user = cfg.users[k];
    const double a_own =
        user.side == Side::Reflect ? a_reflect : a_refract;
    const double a_other =
        user.side == Side::Reflect ? a_refract : a_reflect;
    if (!(a_own > 0.0))
      throw DegenerateModeError(
          "theoretical_epsilon: face " + to_string(user.side) +
          " carries users but has zero amplification; see "
          "degenerate_epsilon");
    const double p = user.power_w;
    const double direct = common / (p * len);
    const double ratio = (a_other * a_other) / (a_own * a_own);
    const double cascade =
        n * (n * (ratio + 1.0) * sigma_s + sigma / (a_own * a_own)) /
        (p * len * m);
    out.per_user[k].direct = direct;
    out.per_user[k].cascade = cascade;
    out.total += direct + cascade;
  }
  return out;
}

DegenerateEpsilon degenerate_epsilon(Side active, const SystemConfig& cfg,
                                     double surface_noise_w) {
  double power_active = 0.0;
  int users_active = 0;
  for (const auto& u : cfg.users) {
    if (u.side == active) {
      power_active += u.power_w;
      ++users_active;
    }
  }
  if (!(power_active > 0.0))
    throw ConfigError("degenerate_epsilon: no users on face " +
                      to_string(active));
  const double n = static_cast<double>(cfg.elements);
  const double len = static_cast<double>(cfg.pilot_len);
  const double a_star_sq = cfg.amplification_budget();  // whole budget one face
  DegenerateEpsilon out;
  out.active = active;
  out.direct = (n * users_active * a_star_sq * surface_noise_w +
                cfg.user_count() * cfg.rx_noise_w) /
               (power_active * len);
  out.cascade_unbounded = true;
  return out;
}

RVector crlb(const CMatrix& theta, const RVector& cz_diag, double power_w) {
  const Eigen::Index rows = theta.rows();
  const Eigen::Index cols = theta.cols();
  if (cz_diag.size() != rows)
    throw DimensionError("crlb: covariance diagonal length " +
                         std::to_string(cz_diag.size()) +
                         " does not match slot count " + std::to_string(rows));
  if (!(power_w > 0.0)) throw ConfigError("crlb: power must be > 0");

  RVector bounds(cols);
  for (Eigen::Index j = 0; j < cols; ++j) {
    double fisher = 0.0;
    bool exact = false;  // some slot observes this component noiselessly
    for (Eigen::Index l = 0; l < rows; ++l) {
      const double gain = std::norm(theta(l, j));
      const double cz = cz_diag(l);
      if (cz < 0.0)
        throw ConfigError("crlb: negative covariance entry");
      if (cz == 0.0) {
        if (gain > 0.0) exact = true;
        continue;
      }
      fisher += gain / cz;
    }
    fisher *= power_w;
    if (exact)
      bounds(j) = 0.0;
    else if (fisher > 0.0)
      bounds(j) = 1.0 / fisher;
    else
      bounds(j) = std::numeric_limits<double>::infinity();
  }
  return bounds;
}

namespace {

// Per-face error covariance pieces of the whitened LS estimator applied at
// the first antenna: surface-noise part A = E C_s E^H and receiver part
// B = E E^H (to be scaled by sigma^2), both before the 1/P_k user scaling.
struct FacePieces {
  bool served = false;
  CMatrix surface;   // A
  CMatrix receiver;  // B
};

FacePieces face_pieces(const BeamSchedule& schedule, const CVector& g1,
                       const SystemConfig& cfg, Side side) {
  FacePieces out;
  out.served = schedule.serves(side);
  const RVector cz = noise_covariance(schedule, g1, cfg.rx_noise_w);

  CMatrix theta;
  if (out.served) {
    theta = observation_matrix(beam_row_products(schedule.phi(side), g1));
  } else {
    theta = CMatrix::Ones(cfg.pilot_len, 1);  // direct link only
  }
  const LsEstimator est =
      make_ls_estimator(theta, cz, to_string(schedule.scheme));

  // Surface-only covariance diagonal (receiver noise excluded).
  const CMatrix rows_r = beam_row_products(schedule.phi_reflect, g1);
  const CMatrix rows_t = beam_row_products(schedule.phi_refract, g1);
  RVector cs(cfg.pilot_len);
  for (int l = 0; l < cfg.pilot_len; ++l)
    cs(l) = schedule.surface_noise_w *
            (rows_r.row(l).squaredNorm() + rows_t.row(l).squaredNorm());

  out.surface = est.pseudo * cs.asDiagonal() * est.pseudo.adjoint();
  out.receiver = est.pseudo * est.pseudo.adjoint();
  return out;
}

}  // namespace

ErrorPrediction predict_norm_error(const BeamSchedule& schedule,
                                   const CVector& g1, const SystemConfig& cfg,
                                   bool independent_noise) {
  const double m = static_cast<double>(cfg.antennas);
  const double sigma = cfg.rx_noise_w;

  FacePieces pieces[2];
  bool have[2] = {false, false};

  ErrorPrediction out;
  out.per_user.resize(cfg.users.size());
  out.served.resize(cfg.users.size(), false);
  for (std::size_t k = 0; k < cfg.users.size(); ++k) {
    const Side side = cfg.users[k].side;
    const int idx = side_index(side);
    if (!have[idx]) {
      pieces[idx] = face_pieces(schedule, g1, cfg, side);
      have[idx] = true;
    }
    const FacePieces& fp = pieces[idx];
    const double p = cfg.users[k].power_w;

    const double direct =
        m * (fp.surface(0, 0).real() + sigma * fp.receiver(0, 0).real()) / p;
    double cascade = 0.0;
    if (fp.served) {
      for (Eigen::Index j = 1; j < fp.surface.rows(); ++j) {
        const double surf = fp.surface(j, j).real();
        const double recv = sigma * fp.receiver(j, j).real();
        // The surface noise is common to all antennas unless each draws its
        // own realization, so only the receiver part averages down by M in
        // the shared regime.
        cascade += independent_noise ? (surf + recv) / m : surf + recv / m;
      }
      cascade /= p;
    }
    out.per_user[k].direct = direct;
    out.per_user[k].cascade = cascade;
    out.served[k] = fp.served;
    out.total += direct + cascade;
  }
  return out;
}

double TrialScore::total() const {
  double acc = 0.0;
  for (double v : direct_sq) acc += v;
  for (std::size_t k = 0; k < cascade_sq.size(); ++k)
    if (cascade_scored[k]) acc += cascade_sq[k];
  return acc;
}

TrialScore empirical_sum_mse(const ChannelSet& truth, const EstimateSet& est) {
  const int k_users = truth.user_count();
  if (est.h_hat.cols() != k_users || est.f_hat.cols() != k_users ||
      static_cast<int>(est.cascade_available.size()) != k_users)
    throw DimensionError("empirical_sum_mse: estimate/truth user mismatch");
  if (est.h_hat.rows() != truth.h.rows() || est.f_hat.rows() != truth.f.rows())
    throw DimensionError("empirical_sum_mse: estimate/truth shape mismatch");

  TrialScore score;
  score.direct_sq.resize(static_cast<std::size_t>(k_users), 0.0);
  score.cascade_sq.resize(static_cast<std::size_t>(k_users), 0.0);
  score.cascade_scored.resize(static_cast<std::size_t>(k_users), false);
  score.excluded_sq.resize(static_cast<std::size_t>(k_users), 0.0);
  for (int k = 0; k < k_users; ++k) {
    const auto idx = static_cast<std::size_t>(k);
    score.direct_sq[idx] = (truth.h.col(k) - est.h_hat.col(k)).squaredNorm();
    if (est.cascade_available[idx]) {
      score.cascade_sq[idx] =
          (truth.f.col(k) - est.f_hat.col(k)).squaredNorm();
      score.cascade_scored[idx] = true;
    } else {
      score.excluded_sq[idx] = truth.f.col(k).squaredNorm();
    }
  }
  return score;
}

}  // namespace mfris
