#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "mfris/analysis.hpp"
#include "mfris/channel.hpp"
#include "mfris/estimation.hpp"
#include "mfris/training.hpp"

using namespace mfris;

TEST_CASE("closed-form error terms at a fixed operating point") {
  const SystemConfig cfg = default_config();
  const TheoreticalEpsilon eps = theoretical_epsilon(0.004, 0.002, cfg);
  REQUIRE(eps.per_user.size() == 2);

  // derived by hand from the model constants
  CHECK(eps.per_user[0].direct ==
        doctest::Approx(3.865384615384615e-12).scale(0.0).epsilon(1e-12));
  CHECK(eps.per_user[1].direct ==
        doctest::Approx(3.865384615384615e-12).scale(0.0).epsilon(1e-12));
  CHECK(eps.per_user[0].cascade ==
        doctest::Approx(7.549579326923075e-07).scale(0.0).epsilon(1e-12));
  CHECK(eps.per_user[1].cascade ==
        doctest::Approx(3.01983173076923e-06).scale(0.0).epsilon(1e-12));
  CHECK(eps.total == doctest::Approx(3.774797394230768e-06).scale(0.0).epsilon(1e-12));

  // per-user power scaling: doubling one power halves only that user's terms
  SystemConfig strong = cfg;
  strong.users[0].power_w *= 2.0;
  const TheoreticalEpsilon eps2 = theoretical_epsilon(0.004, 0.002, strong);
  CHECK(eps2.per_user[0].cascade ==
        doctest::Approx(eps.per_user[0].cascade / 2.0).scale(0.0).epsilon(1e-12));
  CHECK(eps2.per_user[1].cascade ==
        doctest::Approx(eps.per_user[1].cascade).scale(0.0).epsilon(1e-12));
}

TEST_CASE("closed form guards its domain") {
  const SystemConfig cfg = default_config();
  CHECK_THROWS_AS(theoretical_epsilon(0.0, 0.002, cfg), DegenerateModeError);
  CHECK_THROWS_AS(theoretical_epsilon(-0.001, 0.002, cfg), ConfigError);

  SystemConfig reflect_only = cfg;
  reflect_only.users.erase(reflect_only.users.begin() + 1);
  // a dark refract face is fine when nobody sits there
  CHECK_NOTHROW(theoretical_epsilon(0.004, 0.0, reflect_only));
}

TEST_CASE("degenerate single-face report") {
  SystemConfig cfg = default_config();
  cfg.users.erase(cfg.users.begin() + 1);
  const DegenerateEpsilon d =
      degenerate_epsilon(Side::Reflect, cfg, cfg.surface_noise_w);
  CHECK(d.active == Side::Reflect);
  CHECK(d.cascade_unbounded);  // explicit marker, not a float sentinel
  CHECK(d.direct == doctest::Approx(3.8888502867618e-12).scale(0.0).epsilon(1e-12));

  CHECK_THROWS_AS(degenerate_epsilon(Side::Refract, cfg, cfg.surface_noise_w),
                  ConfigError);
}

TEST_CASE("estimator covariance attains the per-component bound") {
  const SystemConfig cfg = default_config();
  Crng rng(5);
  const ChannelSet ch = gen_channels(cfg, rng);
  const DftBasis basis = dft_basis(cfg.pilot_len, cfg.elements);
  const BeamSchedule sched = build_dft_schedule(0.004, 0.002, ch.g1, basis, cfg);
  const RVector cz = noise_covariance(sched, ch.g1, cfg.rx_noise_w);

  const CMatrix theta =
      observation_matrix(beam_row_products(sched.phi(Side::Reflect), ch.g1));
  const RVector bound = crlb(theta, cz, 0.1);
  const CMatrix cov = ls_covariance(theta, cz, 0.1);

  REQUIRE(bound.size() == cfg.elements + 1);
  CHECK(bound(0) == doctest::Approx(3.865384615384615e-12).scale(0.0).epsilon(1e-9));
  for (int j = 1; j <= cfg.elements; ++j)
    CHECK(bound(j) == doctest::Approx(2.4158653846153843e-07).scale(0.0).epsilon(1e-9));
  for (int j = 0; j <= cfg.elements; ++j)
    CHECK(cov(j, j).real() == doctest::Approx(bound(j)).scale(0.0).epsilon(1e-9));

  const CMatrix theta_t =
      observation_matrix(beam_row_products(sched.phi(Side::Refract), ch.g1));
  const RVector bound_t = crlb(theta_t, cz, 0.1);
  for (int j = 1; j <= cfg.elements; ++j)
    CHECK(bound_t(j) == doctest::Approx(9.663461538461537e-07).scale(0.0).epsilon(1e-9));
}

TEST_CASE("bound handles edge noise cases explicitly") {
  CMatrix theta(4, 2);
  theta << Complex(1, 0), Complex(1, 0), Complex(1, 0), Complex(-1, 0),
      Complex(1, 0), Complex(1, 0), Complex(1, 0), Complex(-1, 0);
  RVector cz(4);
  cz << 0.0, 1.0, 1.0, 1.0;  // one exact slot
  const RVector b = crlb(theta, cz, 1.0);
  CHECK(b(0) == 0.0);  // a noise-free slot pins the component exactly
  CHECK(b(1) == 0.0);

  CMatrix dark = CMatrix::Zero(4, 1);
  RVector flat = RVector::Constant(4, 1.0);
  const RVector none = crlb(dark, flat, 1.0);
  CHECK(std::isinf(none(0)));  // zero information, unbounded error
}

TEST_CASE("matrix prediction reproduces the closed forms for the dft design") {
  const SystemConfig cfg = default_config();
  Crng rng(9);
  const ChannelSet ch = gen_channels(cfg, rng);
  const DftBasis basis = dft_basis(cfg.pilot_len, cfg.elements);
  const BeamSchedule sched = build_dft_schedule(0.004, 0.002, ch.g1, basis, cfg);

  const TheoreticalEpsilon closed = theoretical_epsilon(0.004, 0.002, cfg);
  const ErrorPrediction pred = predict_norm_error(sched, ch.g1, cfg, true);

  REQUIRE(pred.per_user.size() == 2);
  for (int k = 0; k < 2; ++k) {
    CHECK(pred.served[k]);
    // norm metric counts the direct link at every antenna
    CHECK(pred.per_user[k].direct ==
          doctest::Approx(cfg.antennas * closed.per_user[k].direct)
              .scale(0.0).epsilon(1e-9));
    CHECK(pred.per_user[k].cascade ==
          doctest::Approx(closed.per_user[k].cascade).scale(0.0).epsilon(1e-9));
  }
  const double want_total =
      cfg.antennas * 2 * closed.per_user[0].direct +
      closed.per_user[0].cascade + closed.per_user[1].cascade;
  CHECK(pred.total == doctest::Approx(want_total).scale(0.0).epsilon(1e-9));
}

TEST_CASE("shared surface noise removes the array gain on the surface term") {
  SystemConfig cfg = default_config();
  cfg.rx_noise_w = 0.0;  // surface noise only, to isolate the effect
  Crng rng(9);
  const ChannelSet ch = gen_channels(cfg, rng);
  const DftBasis basis = dft_basis(cfg.pilot_len, cfg.elements);
  const BeamSchedule sched = build_dft_schedule(0.004, 0.002, ch.g1, basis, cfg);

  const ErrorPrediction indep = predict_norm_error(sched, ch.g1, cfg, true);
  const ErrorPrediction shared = predict_norm_error(sched, ch.g1, cfg, false);
  for (int k = 0; k < 2; ++k) {
    // direct links live at each antenna; sharing does not change them
    CHECK(shared.per_user[k].direct ==
          doctest::Approx(indep.per_user[k].direct).scale(0.0).epsilon(1e-9));
    // the cascade is antenna-averaged: fresh noise per antenna divides the
    // surface term by M, shared noise does not
    CHECK(shared.per_user[k].cascade ==
          doctest::Approx(cfg.antennas * indep.per_user[k].cascade)
              .scale(0.0).epsilon(1e-9));
  }
}

TEST_CASE("prediction marks unserved faces and skips their cascades") {
  SystemConfig cfg = default_config();
  Crng rng(9);
  const ChannelSet ch = gen_channels(cfg, rng);
  const DftBasis basis = dft_basis(cfg.pilot_len, cfg.elements);
  const BeamSchedule sched = build_dft_schedule(0.004, 0.0, ch.g1, basis, cfg);

  const ErrorPrediction pred = predict_norm_error(sched, ch.g1, cfg, true);
  CHECK(pred.served[0]);
  CHECK(!pred.served[1]);
  CHECK(pred.per_user[1].cascade == 0.0);
  CHECK(pred.per_user[1].direct > 0.0);
}

TEST_CASE("empirical score separates direct, cascade, and excluded parts") {
  const SystemConfig cfg = default_config();
  Crng rng(21);
  const ChannelSet truth = gen_channels(cfg, rng);

  EstimateSet est;
  est.h_hat = truth.h;
  est.f_hat = truth.f;
  est.cascade_available = {true, false};
  est.f_hat.col(1).setZero();

  // perturb user 0's estimates by known amounts
  est.h_hat(0, 0) += Complex(3e-3, 4e-3);   // adds |..|^2 = 2.5e-5
  est.f_hat(2, 0) += Complex(0.0, 2e-3);    // adds 4e-6

  const TrialScore score = empirical_sum_mse(truth, est);
  REQUIRE(score.direct_sq.size() == 2);
  CHECK(score.direct_sq[0] == doctest::Approx(2.5e-5).scale(0.0).epsilon(1e-9));
  CHECK(score.cascade_sq[0] == doctest::Approx(4e-6).scale(0.0).epsilon(1e-9));
  CHECK(score.cascade_scored[0]);
  CHECK(!score.cascade_scored[1]);
  CHECK(score.excluded_sq[1] ==
        doctest::Approx(truth.f.col(1).squaredNorm()).scale(0.0).epsilon(1e-12));
  CHECK(score.cascade_sq[1] == 0.0);
  // the excluded cascade is reported but never folded into the score
  CHECK(score.total() == doctest::Approx(2.5e-5 + 4e-6).scale(0.0).epsilon(1e-9));
}
