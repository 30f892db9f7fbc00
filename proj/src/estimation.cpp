#include "mfris/estimation.hpp"

#include <cmath>

namespace mfris {

CMatrix beam_row_products(const CMatrix& phi, const CVector& g) {
  if (phi.rows() != g.size())
    throw DimensionError("beam_row_products: phi has " +
                         std::to_string(phi.rows()) + " elements, g has " +
                         std::to_string(g.size()));
  // Row l, column n: conj(phi(n, l)) * conj(g(n)).
  return phi.adjoint() * g.conjugate().asDiagonal();
}

CMatrix observation_matrix(const CMatrix& row_products) {
  CMatrix theta(row_products.rows(), row_products.cols() + 1);
  theta.col(0).setOnes();
  theta.rightCols(row_products.cols()) = row_products;
  return theta;
}

RVector noise_covariance(const BeamSchedule& schedule, const CVector& g,
                         double rx_noise_w) {
  if (rx_noise_w < 0.0)
    throw ConfigError("noise_covariance: negative receiver noise");
  const CMatrix rows_r = beam_row_products(schedule.phi_reflect, g);
  const CMatrix rows_t = beam_row_products(schedule.phi_refract, g);
  RVector cz(rows_r.rows());
  for (Eigen::Index l = 0; l < rows_r.rows(); ++l)
    cz(l) = schedule.surface_noise_w *
                (rows_r.row(l).squaredNorm() + rows_t.row(l).squaredNorm()) +
            rx_noise_w;
  return cz;
}

ObservationBlock synthesize_rx(const ChannelSet& ch,
                               const BeamSchedule& schedule,
                               const PilotBook& pilots,
                               const SystemConfig& cfg, Crng& rng) {
  const int m_ant = ch.antennas();
  const int n_elem = ch.elements();
  const int k_users = ch.user_count();
  const int len = schedule.pilot_len();
  if (n_elem != schedule.elements() || n_elem != cfg.elements)
    throw DimensionError("synthesize_rx: element count mismatch");
  if (len != cfg.pilot_len || pilots.pilot_len() != len)
    throw DimensionError("synthesize_rx: pilot length mismatch");
  if (pilots.user_count() != k_users || cfg.user_count() != k_users)
    throw DimensionError("synthesize_rx: user count mismatch");
  if (m_ant != cfg.antennas)
    throw DimensionError("synthesize_rx: antenna count mismatch");

  // Per-slot effective element responses at the first antenna; antenna m
  // sees the same rows scaled by u_m.
  const CMatrix rows_r = beam_row_products(schedule.phi_reflect, ch.g1);
  const CMatrix rows_t = beam_row_products(schedule.phi_refract, ch.g1);

  const double sigma_s = schedule.surface_noise_w;
  const double sigma = cfg.rx_noise_w;
  // Draw order is fixed: surface noise (reflect face then refract face,
  // slot-major; per antenna in independent mode), then receiver noise
  // antenna-major.
  auto draw_block = [&rng](int rows, int cols, double var) {
    CMatrix z(rows, cols);
    for (int c = 0; c < cols; ++c)
      for (int r = 0; r < rows; ++r) z(r, c) = rng.cnormal(var);
    return z;
  };
  auto forwarded = [&](const CMatrix& z_r, const CMatrix& z_t, int l) {
    return (rows_r.row(l) * z_r.col(l)).value() +
           (rows_t.row(l) * z_t.col(l)).value();
  };

  // w(l, m): surface noise forwarded to antenna m at slot l.
  CMatrix w(len, m_ant);
  if (cfg.independent_surface_noise) {
    for (int m = 0; m < m_ant; ++m) {
      const CMatrix z_r = draw_block(n_elem, len, sigma_s);
      const CMatrix z_t = draw_block(n_elem, len, sigma_s);
      const Complex u = ch.beam_factor(m);
      for (int l = 0; l < len; ++l) w(l, m) = u * forwarded(z_r, z_t, l);
    }
  } else {
    const CMatrix z_r = draw_block(n_elem, len, sigma_s);
    const CMatrix z_t = draw_block(n_elem, len, sigma_s);
    CVector w1(len);
    for (int l = 0; l < len; ++l) w1(l) = forwarded(z_r, z_t, l);
    for (int m = 0; m < m_ant; ++m) w.col(m) = ch.beam_factor(m) * w1;
  }

  const CMatrix noise = draw_block(len, m_ant, sigma);

  // Per-user slot profiles of the cascade at the first antenna.
  CMatrix profile(len, k_users);
  for (int k = 0; k < k_users; ++k) {
    const CMatrix& rows =
        ch.sides[static_cast<std::size_t>(k)] == Side::Reflect ? rows_r
                                                               : rows_t;
    profile.col(k) = rows * ch.f.col(k);
  }

  ObservationBlock block;
  block.mode = cfg.despread;
  block.despread.resize(static_cast<std::size_t>(k_users));

  if (cfg.despread == DespreadMode::Full) {
    block.received.resize(len, m_ant);
    for (int m = 0; m < m_ant; ++m) {
      const Complex u = ch.beam_factor(m);
      for (int l = 0; l < len; ++l) {
        Complex acc = w(l, m) + noise(l, m);
        for (int k = 0; k < k_users; ++k) {
          const double root_p =
              std::sqrt(cfg.users[static_cast<std::size_t>(k)].power_w);
          acc += root_p * (ch.h(m, k) + u * profile(l, k)) * pilots.s(l, k);
        }
        block.received(l, m) = acc;
      }
    }
    for (int k = 0; k < k_users; ++k)
      block.despread[static_cast<std::size_t>(k)] =
          despread(block.received, pilots, k);
  } else {
    for (int k = 0; k < k_users; ++k) {
      const double root_p =
          std::sqrt(cfg.users[static_cast<std::size_t>(k)].power_w);
      CMatrix& obs = block.despread[static_cast<std::size_t>(k)];
      obs.resize(len, m_ant);
      for (int m = 0; m < m_ant; ++m) {
        const Complex u = ch.beam_factor(m);
        for (int l = 0; l < len; ++l)
          obs(l, m) = root_p * (ch.h(m, k) + u * profile(l, k)) +
                      (w(l, m) + noise(l, m)) * std::conj(pilots.s(l, k));
      }
    }
  }
  return block;
}

CMatrix despread(const CMatrix& received, const PilotBook& pilots, int user) {
  if (user < 0 || user >= pilots.user_count())
    throw DimensionError("despread: user index out of range");
  if (received.rows() != pilots.pilot_len())
    throw DimensionError("despread: slot count mismatch");
  return pilots.s.col(user).conjugate().asDiagonal() * received;
}

LsEstimator make_ls_estimator(const CMatrix& theta, const RVector& cz_diag,
                              const std::string& label) {
  const Eigen::Index len = theta.rows();
  const Eigen::Index cols = theta.cols();
  if (cz_diag.size() != len)
    throw DimensionError("ls estimator: covariance diagonal length " +
                         std::to_string(cz_diag.size()) +
                         " does not match slot count " + std::to_string(len));
  if (cols > len)
    throw DimensionError("ls estimator: more unknowns than slots for " +
                         label);

  double cz_max = 0.0;
  for (Eigen::Index l = 0; l < len; ++l) {
    if (cz_diag(l) < 0.0)
      throw ConfigError("ls estimator: negative covariance entry");
    cz_max = std::max(cz_max, cz_diag(l));
  }

  // Whitening weights.  An all-zero covariance degenerates to the plain
  // least squares; isolated zero entries are clamped to keep weights finite.
  RVector weights(len);
  if (cz_max == 0.0) {
    weights.setOnes();
  } else {
    const double floor = 1e-15 * cz_max;
    for (Eigen::Index l = 0; l < len; ++l)
      weights(l) = 1.0 / std::max(cz_diag(l), floor);
  }

  const CMatrix theta_w = weights.asDiagonal() * theta;  // W Theta
  const CMatrix normal = theta.adjoint() * theta_w;      // Theta^H W Theta

  Eigen::LDLT<CMatrix> ldlt(normal);
  // rcond() is blind to rank deficiency here because LDLT::solve zeroes the
  // rows of vanishing pivots, so inspect the pivot spectrum directly.  The
  // normal matrix is positive semidefinite, hence a pivot near (or below)
  // zero relative to the largest one signals a deficient design.
  const RVector pivots = ldlt.vectorD().real();
  const double pivot_max = pivots.cwiseAbs().maxCoeff();
  const double pivot_min = pivots.minCoeff();
  if (ldlt.info() != Eigen::Success || pivot_max <= 0.0 ||
      pivot_min < pivot_max * 1e-12)
    throw SingularityError("ls estimator: normal equations for " + label +
                           " are singular or near-singular (pivot ratio=" +
                           format_double(pivot_min / pivot_max) + ")");

  LsEstimator est;
  est.pseudo = ldlt.solve(theta_w.adjoint());
  est.covariance_unit = ldlt.solve(CMatrix::Identity(cols, cols));
  return est;
}

CVector ls_estimate(const CVector& y, const CMatrix& theta,
                    const RVector& cz_diag, double power_w) {
  if (!(power_w > 0.0)) throw ConfigError("ls_estimate: power must be > 0");
  if (y.size() != theta.rows())
    throw DimensionError("ls_estimate: observation length mismatch");
  const LsEstimator est = make_ls_estimator(theta, cz_diag);
  return (est.pseudo * y) / std::sqrt(power_w);
}

CMatrix ls_covariance(const CMatrix& theta, const RVector& cz_diag,
                      double power_w) {
  if (!(power_w > 0.0)) throw ConfigError("ls_covariance: power must be > 0");
  const LsEstimator est = make_ls_estimator(theta, cz_diag);
  return est.covariance_unit / power_w;
}

CVector simplified_ls_estimate(const CVector& y, const CMatrix& theta,
                               double power_w) {
  const RVector zeros = RVector::Zero(theta.rows());
  return ls_estimate(y, theta, zeros, power_w);
}

EstimateSet combine_estimates(const std::vector<CMatrix>& raw,
                              const CVector& antenna_factor) {
  const int m_ant = static_cast<int>(antenna_factor.size());
  const int k_users = static_cast<int>(raw.size());
  if (m_ant < 1) throw DimensionError("combine_estimates: no antennas");

  int n_elem = 0;
  for (const auto& r : raw) {
    if (r.cols() != m_ant)
      throw DimensionError("combine_estimates: per-antenna column mismatch");
    if (r.rows() < 1)
      throw DimensionError("combine_estimates: empty estimate");
    if (r.rows() > 1) {
      const int nk = static_cast<int>(r.rows()) - 1;
      if (n_elem != 0 && nk != n_elem)
        throw DimensionError("combine_estimates: cascade length mismatch");
      n_elem = nk;
    }
  }

  EstimateSet est;
  est.h_hat.resize(m_ant, k_users);
  est.f_hat = CMatrix::Zero(n_elem, k_users);
  est.f_hat_per_antenna.resize(static_cast<std::size_t>(k_users));
  est.cascade_available.resize(static_cast<std::size_t>(k_users), false);

  for (int k = 0; k < k_users; ++k) {
    const CMatrix& r = raw[static_cast<std::size_t>(k)];
    est.h_hat.col(k) = r.row(0).transpose();
    if (r.rows() == 1) continue;

    // The cascade block estimated against the first antenna's observation
    // matrix carries the factor u_m at antenna m; multiplying by
    // conj(u_m) = antenna_factor(m) aligns all antennas before averaging.
    CMatrix aligned(n_elem, m_ant);
    for (int m = 0; m < m_ant; ++m)
      aligned.col(m) = r.block(1, m, n_elem, 1) * antenna_factor(m);
    est.f_hat.col(k) = aligned.rowwise().mean();
    est.f_hat_per_antenna[static_cast<std::size_t>(k)] = std::move(aligned);
    est.cascade_available[static_cast<std::size_t>(k)] = true;
  }
  return est;
}

}  // namespace mfris
