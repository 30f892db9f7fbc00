#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "mfris/analysis.hpp"
#include "mfris/channel.hpp"
#include "mfris/estimation.hpp"
#include "mfris/harness.hpp"
#include "mfris/training.hpp"

using namespace mfris;

namespace {

struct Setup {
  SystemConfig cfg;
  ChannelSet ch;
  DftBasis basis;
  PilotBook pilots;
  BeamSchedule sched;
};

Setup make_setup(SystemConfig cfg, double a_r, double a_t,
                 std::uint64_t seed = 3) {
  Setup s;
  s.cfg = cfg;
  Crng rng(seed);
  s.ch = gen_channels(cfg, rng);
  s.basis = dft_basis(cfg.pilot_len, cfg.elements);
  s.pilots = build_pilots(cfg);
  s.sched = build_dft_schedule(a_r, a_t, s.ch.g1, s.basis, cfg);
  return s;
}

}  // namespace

TEST_CASE("noise covariance is flat under the dft schedule") {
  const SystemConfig cfg = default_config();
  Setup s = make_setup(cfg, 0.003, 0.002);
  const RVector cz = noise_covariance(s.sched, s.ch.g1, cfg.rx_noise_w);
  REQUIRE(cz.size() == cfg.pilot_len);
  const double want =
      cfg.elements * (0.003 * 0.003 + 0.002 * 0.002) * cfg.surface_noise_w +
      cfg.rx_noise_w;
  for (int l = 0; l < cz.size(); ++l)
    CHECK(cz(l) == doctest::Approx(want).scale(0.0).epsilon(1e-10));
}

TEST_CASE("whitened and plain least squares coincide for flat covariance") {
  const SystemConfig cfg = default_config();
  Setup s = make_setup(cfg, 0.003, 0.002);
  const CMatrix theta = observation_matrix(
      beam_row_products(s.sched.phi(Side::Reflect), s.ch.g1));
  const RVector cz = noise_covariance(s.sched, s.ch.g1, cfg.rx_noise_w);
  Crng rng(17);
  CVector y(cfg.pilot_len);
  for (int l = 0; l < cfg.pilot_len; ++l) y(l) = rng.cnormal(1.0);

  const CVector white = ls_estimate(y, theta, cz, 0.1);
  const CVector plain = simplified_ls_estimate(y, theta, 0.1);
  CHECK((white - plain).norm() < 1e-10 * plain.norm());
}

TEST_CASE("estimator inverts its own observation map") {
  const SystemConfig cfg = default_config();
  Setup s = make_setup(cfg, 0.004, 0.001);
  const CMatrix theta = observation_matrix(
      beam_row_products(s.sched.phi(Side::Refract), s.ch.g1));
  const RVector cz = noise_covariance(s.sched, s.ch.g1, cfg.rx_noise_w);
  const LsEstimator est = make_ls_estimator(theta, cz);
  const CMatrix eye = est.pseudo * theta;
  CHECK((eye - CMatrix::Identity(eye.rows(), eye.cols())).cwiseAbs().maxCoeff() <
        1e-9);

  // noiseless synthetic observation recovers the parameter exactly
  Crng rng(23);
  CVector x(cfg.elements + 1);
  for (int j = 0; j <= cfg.elements; ++j) x(j) = rng.cnormal(1.0);
  const CVector got = est.pseudo * (theta * x);
  CHECK((got - x).norm() < 1e-9 * x.norm());
}

TEST_CASE("singular designs are rejected with the label in the message") {
  const SystemConfig cfg = default_config();
  CMatrix theta = CMatrix::Zero(cfg.pilot_len, cfg.elements + 1);
  theta.col(0).setOnes();  // rank 1
  const RVector cz = RVector::Constant(cfg.pilot_len, 1e-11);
  CHECK_THROWS_WITH_AS(make_ls_estimator(theta, cz, "probe design"),
                       doctest::Contains("probe design"), SingularityError);
}

TEST_CASE("zero noise gives exact recovery through the full pipeline") {
  SystemConfig cfg = default_config();
  cfg.surface_noise_w = 0.0;
  cfg.rx_noise_w = 0.0;
  Setup s = make_setup(cfg, 0.004, 0.002);

  Crng rng(31);
  const ObservationBlock obs = synthesize_rx(s.ch, s.sched, s.pilots, cfg, rng);
  REQUIRE(obs.user_count() == 2);

  for (int k = 0; k < 2; ++k) {
    const Side side = s.ch.sides[static_cast<std::size_t>(k)];
    const CMatrix theta =
        observation_matrix(beam_row_products(s.sched.phi(side), s.ch.g1));
    const double power = cfg.users[static_cast<std::size_t>(k)].power_w;
    std::vector<CMatrix> raw(1);
    raw[0].resize(cfg.elements + 1, cfg.antennas);
    for (int m = 0; m < cfg.antennas; ++m)
      raw[0].col(m) = simplified_ls_estimate(
          obs.despread[static_cast<std::size_t>(k)].col(m), theta, power);

    const EstimateSet est = combine_estimates(raw, s.ch.antenna_factor);
    // the direct row recovers h_{m,k}, the de-rotated cascade block f_k
    CHECK((est.h_hat.col(0) - s.ch.h.col(k)).norm() <
          1e-8 * s.ch.h.col(k).norm());
    REQUIRE(est.cascade_available[0]);
    CHECK((est.f_hat.col(0) - s.ch.f.col(k)).norm() <
          1e-8 * s.ch.f.col(k).norm());
  }
}

TEST_CASE("ideal and full despreading agree for a single all-ones-pilot user") {
  SystemConfig cfg = default_config();
  cfg.users.erase(cfg.users.begin() + 1);
  REQUIRE(cfg.user_count() == 1);

  Setup s = make_setup(cfg, 0.004, 0.002, 7);

  SystemConfig ideal_cfg = cfg;
  ideal_cfg.despread = DespreadMode::Ideal;
  SystemConfig full_cfg = cfg;
  full_cfg.despread = DespreadMode::Full;

  Crng r1(55), r2(55);
  const ObservationBlock a = synthesize_rx(s.ch, s.sched, s.pilots, ideal_cfg, r1);
  const ObservationBlock b = synthesize_rx(s.ch, s.sched, s.pilots, full_cfg, r2);
  REQUIRE(a.user_count() == 1);
  REQUIRE(b.user_count() == 1);
  CHECK(a.despread[0] == b.despread[0]);
}

TEST_CASE("full-mode despreading aliases the other user at fixed offsets") {
  // Despreading by one pilot does not erase the other user: its tones
  // survive at a shifted frequency and the least squares books them onto
  // specific unknowns.  The observation columns carry negative tones, so
  // with adjacent pilots user 0 inherits user 1's cascade shifted down one
  // element (element 0 folding onto the direct column) and its direct link
  // on the last cascade slot; user 1 sees the mirror image.  Noiseless
  // capture, so the mapping is exact.
  SystemConfig cfg = default_config();
  cfg.despread = DespreadMode::Full;
  cfg.surface_noise_w = 0.0;
  cfg.rx_noise_w = 0.0;
  cfg.users[0].power_w = 0.4;
  cfg.users[1].power_w = 0.025;
  const double a_r = 0.004, a_t = 0.002;
  Setup s = make_setup(cfg, a_r, a_t, 11);

  Crng rng(77);
  const ObservationBlock obs = synthesize_rx(s.ch, s.sched, s.pilots, cfg, rng);
  REQUIRE(obs.user_count() == 2);

  const int n = cfg.elements;
  const int m_ant = cfg.antennas;
  // antenna-averaged, de-rotated foreign direct links as the combiner sees
  // them
  Complex mix[2] = {Complex(0.0, 0.0), Complex(0.0, 0.0)};
  for (int m = 0; m < m_ant; ++m)
    for (int k = 0; k < 2; ++k)
      mix[k] += s.ch.antenna_factor(m) * s.ch.h(m, k) /
                static_cast<double>(m_ant);

  for (int k = 0; k < 2; ++k) {
    const Side side = s.ch.sides[static_cast<std::size_t>(k)];
    const CMatrix theta =
        observation_matrix(beam_row_products(s.sched.phi(side), s.ch.g1));
    const double power = cfg.users[static_cast<std::size_t>(k)].power_w;
    std::vector<CMatrix> raw(1);
    raw[0].resize(n + 1, m_ant);
    for (int m = 0; m < m_ant; ++m)
      raw[0].col(m) = simplified_ls_estimate(
          obs.despread[static_cast<std::size_t>(k)].col(m), theta, power);
    const EstimateSet est = combine_estimates(raw, s.ch.antenna_factor);

    const int o = 1 - k;
    const double ratio = std::sqrt(cfg.users[static_cast<std::size_t>(o)].power_w /
                                   cfg.users[static_cast<std::size_t>(k)].power_w);
    CVector want_h(m_ant);
    CVector want_f = s.ch.f.col(k);
    if (k == 0) {
      for (int m = 0; m < m_ant; ++m)
        want_h(m) = s.ch.h(m, 0) +
                    ratio * a_t * s.ch.beam_factor(m) * s.ch.f(0, 1);
      for (int idx = 0; idx + 1 < n; ++idx)
        want_f(idx) += ratio * (a_t / a_r) * s.ch.f(idx + 1, 1);
      want_f(n - 1) += ratio * mix[1] / a_r;
    } else {
      for (int m = 0; m < m_ant; ++m)
        want_h(m) = s.ch.h(m, 1) +
                    ratio * a_r * s.ch.beam_factor(m) * s.ch.f(n - 1, 0);
      want_f(0) += ratio * mix[0] / a_t;
      for (int idx = 1; idx < n; ++idx)
        want_f(idx) += ratio * (a_r / a_t) * s.ch.f(idx - 1, 0);
    }
    CHECK((est.h_hat.col(0) - want_h).norm() < 1e-9 * want_h.norm());
    REQUIRE(est.cascade_available[0]);
    CHECK((est.f_hat.col(0) - want_f).norm() < 1e-9 * want_f.norm());
  }
}

TEST_CASE("observations share the first antenna's surface noise exactly") {
  // with fresh surface noise disabled (the default), the forwarded surface
  // noise at antenna m is the first antenna's, rotated by the beam factor
  SystemConfig cfg = default_config();
  cfg.users.clear();
  cfg.users.push_back({Side::Reflect, 0.1, 10.0 / 3.0, 20.0});
  cfg.rx_noise_w = 0.0;  // isolate the surface noise
  Setup s = make_setup(cfg, 0.004, 0.002, 13);

  // kill the signal part: zero direct links and cascades
  s.ch.h.setZero();
  s.ch.f.setZero();

  Crng rng(99);
  const ObservationBlock obs = synthesize_rx(s.ch, s.sched, s.pilots, cfg, rng);
  const CMatrix& w = obs.despread[0];
  for (int m = 1; m < cfg.antennas; ++m) {
    const CVector want = s.ch.beam_factor(m) * w.col(0);
    CHECK((w.col(m) - want).norm() < 1e-12 * w.col(0).norm());
  }
}

TEST_CASE("independent surface noise breaks that tie") {
  SystemConfig cfg = default_config();
  cfg.users.clear();
  cfg.users.push_back({Side::Reflect, 0.1, 10.0 / 3.0, 20.0});
  cfg.rx_noise_w = 0.0;
  cfg.independent_surface_noise = true;
  Setup s = make_setup(cfg, 0.004, 0.002, 13);
  s.ch.h.setZero();
  s.ch.f.setZero();

  Crng rng(99);
  const ObservationBlock obs = synthesize_rx(s.ch, s.sched, s.pilots, cfg, rng);
  const CMatrix& w = obs.despread[0];
  const CVector tied = s.ch.beam_factor(1) * w.col(0);
  CHECK((w.col(1) - tied).norm() > 1e-3 * w.col(0).norm());
}

TEST_CASE("combine_estimates de-rotates and averages the cascade block") {
  const SystemConfig cfg = default_config();
  Setup s = make_setup(cfg, 0.004, 0.002, 17);

  // synthetic per-antenna estimates: truth plus the antenna factor pattern
  Crng rng(7);
  CVector h_true(cfg.antennas);
  CVector f_scaled(cfg.elements);
  for (int m = 0; m < cfg.antennas; ++m) h_true(m) = rng.cnormal(1.0);
  for (int n = 0; n < cfg.elements; ++n) f_scaled(n) = rng.cnormal(1.0);

  std::vector<CMatrix> raw(1);
  raw[0].resize(cfg.elements + 1, cfg.antennas);
  for (int m = 0; m < cfg.antennas; ++m) {
    raw[0](0, m) = h_true(m);
    // the raw antenna-m cascade block carries u_m = conj(antenna_factor(m))
    raw[0].block(1, m, cfg.elements, 1) =
        std::conj(s.ch.antenna_factor(m)) * f_scaled;
  }

  const EstimateSet est = combine_estimates(raw, s.ch.antenna_factor);
  REQUIRE(est.h_hat.cols() == 1);
  CHECK((est.h_hat.col(0) - h_true).norm() < 1e-12 * h_true.norm());
  REQUIRE(est.cascade_available.size() == 1);
  CHECK(est.cascade_available[0]);
  CHECK((est.f_hat.col(0) - f_scaled).norm() < 1e-12 * f_scaled.norm());
  REQUIRE(est.f_hat_per_antenna.size() == 1);
  for (int m = 0; m < cfg.antennas; ++m)
    CHECK((est.f_hat_per_antenna[0].col(m) - f_scaled).norm() <
          1e-12 * f_scaled.norm());
}

TEST_CASE("direct-only estimates mark the cascade unavailable") {
  const SystemConfig cfg = default_config();
  Setup s = make_setup(cfg, 0.004, 0.002, 19);
  std::vector<CMatrix> raw(1);
  raw[0] = CMatrix::Ones(1, cfg.antennas);  // direct row only
  const EstimateSet est = combine_estimates(raw, s.ch.antenna_factor);
  CHECK(!est.cascade_available[0]);
  CHECK(est.f_hat.col(0).norm() == 0.0);
}
