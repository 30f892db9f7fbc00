#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "mfris/harness.hpp"

using namespace mfris;

TEST_CASE("effective config relocates users only for single-face baselines") {
  const SystemConfig cfg = default_config();
  for (Scheme s : {Scheme::DftMfris, Scheme::OnOffMfris, Scheme::Star}) {
    const SystemConfig eff = effective_config(cfg, s);
    CHECK(eff.users[0].side == Side::Reflect);
    CHECK(eff.users[1].side == Side::Refract);
  }
  for (Scheme s : {Scheme::Active, Scheme::Passive}) {
    const SystemConfig eff = effective_config(cfg, s);
    CHECK(eff.users[0].side == Side::Reflect);
    CHECK(eff.users[1].side == Side::Reflect);
  }
  SystemConfig unfair = cfg;
  unfair.fair_comparison = false;
  const SystemConfig eff = effective_config(unfair, Scheme::Active);
  CHECK(eff.users[1].side == Side::Refract);
}

TEST_CASE("point runs are deterministic in seed, thread count, and rerun") {
  const SystemConfig cfg = default_config();
  const ErrorReport a = run_point(cfg, Scheme::DftMfris, 40, 2, 1);
  const ErrorReport b = run_point(cfg, Scheme::DftMfris, 40, 2, 3);
  const ErrorReport c = run_point(cfg, Scheme::DftMfris, 40, 2, 1);
  CHECK(a.eps_empirical == b.eps_empirical);
  CHECK(a.eps_empirical == c.eps_empirical);
  CHECK(a.eps_empirical_se == b.eps_empirical_se);
  for (std::size_t k = 0; k < a.per_user_direct.size(); ++k) {
    CHECK(a.per_user_direct[k] == b.per_user_direct[k]);
    CHECK(a.per_user_cascade[k] == b.per_user_cascade[k]);
  }

  SystemConfig other = cfg;
  other.seed = 2;
  const ErrorReport d = run_point(other, Scheme::DftMfris, 40, 2, 1);
  CHECK(d.eps_empirical != a.eps_empirical);

  // different points draw different streams
  const ErrorReport e = run_point(cfg, Scheme::DftMfris, 40, 3, 1);
  CHECK(e.eps_empirical != a.eps_empirical);
}

TEST_CASE("empirical error matches the norm-metric prediction") {
  SystemConfig cfg = default_config();
  cfg.independent_surface_noise = true;
  const ErrorReport rep = run_point(cfg, Scheme::DftMfris, 4000, 0, 1);

  // at 4000 trials the mean should sit well within 4 standard errors
  CHECK(std::abs(rep.eps_empirical - rep.eps_norm_theory) <
        4.0 * rep.eps_empirical_se);
  // and the standard error itself is small enough for a 5% statement
  CHECK(rep.eps_empirical ==
        doctest::Approx(rep.eps_norm_theory).scale(0.0).epsilon(0.05));

  // closed-form weighting for the adaptive scheme equals the printed forms
  const TheoreticalEpsilon closed =
      theoretical_epsilon(rep.a_reflect, rep.a_refract, cfg);
  CHECK(rep.eps_theory == doctest::Approx(closed.total).scale(0.0).epsilon(1e-9));

  // norm metric counts the direct link once per antenna
  double direct_sum = 0.0;
  for (const auto& u : closed.per_user) direct_sum += u.direct;
  CHECK(rep.eps_norm_theory - rep.eps_theory ==
        doctest::Approx((cfg.antennas - 1) * direct_sum).scale(0.0).epsilon(1e-6));
}

TEST_CASE("shared surface noise shifts the prediction, and the empirics follow") {
  const SystemConfig cfg = default_config();  // shared is the default
  const ErrorReport rep = run_point(cfg, Scheme::DftMfris, 4000, 0, 1);
  CHECK(rep.eps_empirical ==
        doctest::Approx(rep.eps_norm_theory).scale(0.0).epsilon(0.05));

  SystemConfig indep = cfg;
  indep.independent_surface_noise = true;
  const ErrorReport rep_i = run_point(indep, Scheme::DftMfris, 4000, 0, 1);
  // sharing can only increase the combined-cascade error
  CHECK(rep.eps_norm_theory > rep_i.eps_norm_theory);
}

TEST_CASE("element-switching baseline matches its matrix prediction") {
  const SystemConfig cfg = default_config();
  const ErrorReport rep = run_point(cfg, Scheme::OnOffMfris, 2500, 0, 1);
  CHECK(rep.a_reflect == 0.0);
  CHECK(rep.a_refract == 0.0);
  CHECK(rep.eps_empirical ==
        doctest::Approx(rep.eps_norm_theory).scale(0.0).epsilon(0.07));
  CHECK(rep.solver_iterations == 0);  // no solver for fixed baselines
}

TEST_CASE("single-user full despreading reproduces the ideal observations") {
  SystemConfig cfg = default_config();
  cfg.users.erase(cfg.users.begin() + 1);
  SystemConfig full = cfg;
  full.despread = DespreadMode::Full;

  const ErrorReport a = run_point(cfg, Scheme::DftMfris, 60, 0, 1);
  const ErrorReport b = run_point(full, Scheme::DftMfris, 60, 0, 1);
  CHECK(a.eps_empirical == b.eps_empirical);
}

TEST_CASE("multi-user full despreading pays the pilot-alias penalty") {
  // Despreading by one user's pilot leaves the other user's tones in the
  // block, so its direct link and all but one cascade component alias onto
  // this user's unknowns (the remaining one pollutes the direct column).
  // The measured error therefore sits far above the orthogonal-pilot
  // budget, by a floor that is computable in expectation: per victim k,
  //   (P'/P) [ (a'^2/a^2)(N-1) pl_ris' + pl_bs'/(a^2 M) + M a'^2 pl_ris' ]
  // (foreign cascade, foreign direct after antenna averaging, and the
  // direct-column pollution counted at every antenna).
  SystemConfig ideal = default_config();
  SystemConfig full = ideal;
  full.despread = DespreadMode::Full;

  const ErrorReport ref = run_point(ideal, Scheme::DftMfris, 2500, 0, 1);
  const ErrorReport rep = run_point(full, Scheme::DftMfris, 2500, 0, 1);
  REQUIRE(rep.a_reflect == ref.a_reflect);
  REQUIRE(rep.a_refract == ref.a_refract);

  const SystemConfig& cfg = ideal;
  const double n = cfg.elements;
  const double m = cfg.antennas;
  double alias_floor = 0.0;
  for (std::size_t k = 0; k < 2; ++k) {
    const UserSpec& self = cfg.users[k];
    const UserSpec& other = cfg.users[1 - k];
    const double a = k == 0 ? rep.a_reflect : rep.a_refract;
    const double a_o = k == 0 ? rep.a_refract : rep.a_reflect;
    const double pl_ris =
        path_loss(other.dist_ris_m, cfg.exponent_user_ris, cfg.ref_path_loss);
    const double pl_bs =
        path_loss(other.dist_bs_m, cfg.exponent_user_bs, cfg.ref_path_loss);
    const double ratio = other.power_w / self.power_w;
    alias_floor += ratio * ((a_o * a_o / (a * a)) * (n - 1.0) * pl_ris +
                            pl_bs / (a * a * m) + m * a_o * a_o * pl_ris);
  }
  const double expected = ref.eps_norm_theory + alias_floor;
  CHECK(rep.eps_empirical ==
        doctest::Approx(expected).scale(0.0).epsilon(0.03));
  // the penalty dwarfs the ideal budget at these operating points
  CHECK(rep.eps_empirical > 100.0 * ref.eps_empirical);
}

TEST_CASE("degenerate single-face scenario is reported, not crashed") {
  SystemConfig cfg = default_config();
  cfg.users.erase(cfg.users.begin() + 1);
  const ErrorReport rep = run_point(cfg, Scheme::DftMfris, 30, 0, 1);
  REQUIRE(rep.degenerate.has_value());
  CHECK(rep.degenerate->active == Side::Reflect);
  CHECK(rep.degenerate->cascade_unbounded);
  CHECK(rep.degenerate->direct > 0.0);
  CHECK(rep.solver_converged);
}

TEST_CASE("per-point configs") {
  SweepSpec spec;
  spec.base = default_config();

  SUBCASE("power splits the swept total equally") {
    spec.variable = SweepVar::Power;
    const SystemConfig cfg = config_for_point(spec, 20.0);
    for (const auto& u : cfg.users)
      CHECK(u.power_w == doctest::Approx(0.05).scale(0.0).epsilon(1e-12));
  }

  SUBCASE("distance moves the surface-receiver hop") {
    spec.variable = SweepVar::Distance;
    const SystemConfig cfg = config_for_point(spec, 35.0);
    CHECK(cfg.bs_ris_dist_m == doctest::Approx(35.0).scale(0.0).epsilon(1e-12));
    CHECK(cfg.users[0].dist_bs_m ==
          doctest::Approx(spec.base.users[0].dist_bs_m).scale(0.0).epsilon(1e-12));
  }

  SUBCASE("users redraws the population deterministically") {
    spec.variable = SweepVar::Users;
    const SystemConfig cfg = config_for_point(spec, 5.0);
    REQUIRE(cfg.user_count() == 5);
    const SystemConfig again = config_for_point(spec, 5.0);
    for (int k = 0; k < 5; ++k) {
      CHECK(cfg.users[k].side == again.users[k].side);
      CHECK(cfg.users[k].dist_ris_m == again.users[k].dist_ris_m);
      CHECK(cfg.users[k].dist_bs_m == again.users[k].dist_bs_m);
      // placement: within the 5 m disc, clear of the surface
      CHECK(cfg.users[k].dist_ris_m <= 5.0);
      CHECK(cfg.users[k].dist_ris_m >= 0.25);
      CHECK(cfg.users[k].dist_bs_m >= 15.0);
      CHECK(cfg.users[k].dist_bs_m <= 25.0);
      CHECK(cfg.users[k].power_w ==
            doctest::Approx(spec.base.users[0].power_w).scale(0.0).epsilon(1e-12));
    }
    // faces alternate so both stay populated
    CHECK(cfg.users[0].side == Side::Reflect);
    CHECK(cfg.users[1].side == Side::Refract);
    CHECK(cfg.users[2].side == Side::Reflect);

    CHECK_THROWS_AS(config_for_point(spec, 3.5), ConfigError);
    CHECK_THROWS_AS(config_for_point(spec, 0.0), ConfigError);
  }
}

TEST_CASE("sweep emission") {
  SweepSpec spec;
  spec.variable = SweepVar::Power;
  spec.values = {20.0, 10.0, 20.0};  // duplicates and disorder are cleaned up
  spec.schemes = {Scheme::Star, Scheme::DftMfris, Scheme::Star};
  spec.trials = 25;
  spec.threads = 2;
  spec.base = default_config();

  const SweepResult result = run_sweep(spec);
  REQUIRE(result.rows.size() == 4);
  CHECK(result.rows[0].value == 10.0);
  CHECK(result.rows[0].scheme == Scheme::DftMfris);
  CHECK(result.rows[1].scheme == Scheme::Star);
  CHECK(result.rows[2].value == 20.0);

  const std::string text = csv_text(result);
  std::istringstream lines(text);
  std::string header;
  std::getline(lines, header);
  CHECK(header ==
        "sweep_var,value,scheme,trials,seed,a_R,a_T,eps_empirical,eps_theory");
  int rows = 0;
  std::string line;
  while (std::getline(lines, line))
    if (!line.empty()) ++rows;
  CHECK(rows == 4);
  CHECK(text.find("power,10,dft-mfris,25,1,") != std::string::npos);

  // emission is reproducible byte for byte
  CHECK(csv_text(result) == text);

  SweepResult empty;
  std::ostringstream sink;
  CHECK_THROWS_AS(emit_csv(empty, sink), Error);
}

TEST_CASE("sweep outputs include a meta companion") {
  SweepSpec spec;
  spec.variable = SweepVar::Distance;
  spec.values = {20.0};
  spec.schemes = {Scheme::DftMfris};
  spec.trials = 10;
  spec.base = default_config();
  const SweepResult result = run_sweep(spec);

  const std::string path = "harness_test_sweep.csv";
  write_sweep_outputs(result, path);
  std::ifstream csv(path);
  REQUIRE(csv.good());
  std::string header;
  std::getline(csv, header);
  CHECK(header ==
        "sweep_var,value,scheme,trials,seed,a_R,a_T,eps_empirical,eps_theory");

  std::ifstream meta(path + ".meta");
  REQUIRE(meta.good());
  std::stringstream buf;
  buf << meta.rdbuf();
  CHECK(buf.str().find("sweep_var distance") != std::string::npos);
  CHECK(buf.str().find("trials 10") != std::string::npos);
  CHECK(buf.str().find("M 8") != std::string::npos);
  std::remove(path.c_str());
  std::remove((path + ".meta").c_str());
}

TEST_CASE("forced channels must match the effective scenario") {
  const SystemConfig cfg = default_config();
  Crng rng(3);
  ChannelSet kept;
  // capture channels from a plain run
  Crng r0(mix_seed({cfg.seed, 0, 0, 0}));
  run_trial_with_channels(cfg, Scheme::DftMfris, r0, nullptr, &kept);

  // replaying them against the same scheme works
  Crng r1(5);
  CHECK_NOTHROW(
      run_trial_with_channels(cfg, Scheme::DftMfris, r1, &kept, nullptr));

  // but an active baseline relocates users, so the sides no longer match
  Crng r2(5);
  CHECK_THROWS_WITH_AS(
      run_trial_with_channels(cfg, Scheme::Active, r2, &kept, nullptr),
      doctest::Contains("fair comparison"), ConfigError);
}

TEST_CASE("property suite passes on the default scenario") {
  const auto results = run_property_suite(default_config());
  CHECK(results.size() >= 20);
  for (const auto& r : results) {
    CAPTURE(r.name);
    CAPTURE(r.detail);
    CHECK(r.pass);
  }
}
