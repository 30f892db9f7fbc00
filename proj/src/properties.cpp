#include <cmath>
#include <functional>
#include <sstream>

#include "mfris/harness.hpp"
#include "mfris/numeric.hpp"

namespace mfris {

namespace {

double rel_gap(double a, double b) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-300});
}

std::string check_config(const SystemConfig& cfg) {
  const auto errs = validation_errors(cfg);
  if (errs.empty()) return {};
  std::string detail = "invalid:";
  for (const auto& e : errs) detail += " " + e + ";";
  return detail;
}

std::string check_conversions(const SystemConfig&) {
  if (rel_gap(dbm_to_watts(30.0), 1.0) > 1e-12) return "30 dBm != 1 W";
  if (rel_gap(dbm_to_watts(20.0), 0.1) > 1e-12) return "20 dBm != 0.1 W";
  if (rel_gap(dbm_to_watts(-70.0), 1e-10) > 1e-12) return "-70 dBm != 1e-10 W";
  for (double x : {-70.0, -10.0, 0.0, 17.5, 30.0})
    if (std::abs(watts_to_dbm(dbm_to_watts(x)) - x) > 1e-9)
      return "dBm round trip failed at " + format_double(x);
  if (rel_gap(db_to_linear(19.0), 79.43282347242814) > 1e-12)
    return "19 dB mismatch";
  if (rel_gap(db_to_linear(10.0), 10.0) > 1e-12) return "10 dB != 10x";
  return {};
}

std::string check_path_loss(const SystemConfig& cfg) {
  const double ref = cfg.ref_path_loss;
  double prev = path_loss(5.0, 2.5, ref);
  for (double d : {10.0, 20.0, 40.0}) {
    const double v = path_loss(d, 2.5, ref);
    if (!(v < prev)) return "not decreasing at d=" + format_double(d);
    prev = v;
  }
  if (rel_gap(path_loss(123.0, 0.0, ref), ref) > 1e-15)
    return "zero exponent must return the reference gain";
  if (rel_gap(path_loss(20.0, 2.5, 1e-3), 5.590169943749474e-7) > 1e-12)
    return "reference value mismatch at 20 m";
  return {};
}

std::string check_channel_determinism(const SystemConfig& cfg) {
  Crng rng1(cfg.seed + 17), rng2(cfg.seed + 17), rng3(cfg.seed + 18);
  const ChannelSet a = gen_channels(cfg, rng1);
  const ChannelSet b = gen_channels(cfg, rng2);
  const ChannelSet c = gen_channels(cfg, rng3);
  if (a.g1 != b.g1 || a.antenna_factor != b.antenna_factor || a.h != b.h ||
      a.f != b.f)
    return "same seed produced different channels";
  if (a.g1 == c.g1 && a.h == c.h) return "different seeds produced identical channels";
  return {};
}

std::string check_channel_structure(const SystemConfig& cfg) {
  Crng rng(cfg.seed + 19);
  const ChannelSet ch = gen_channels(cfg, rng);
  const double amp = std::sqrt(cfg.ris_bs_gain());
  for (int n = 0; n < ch.elements(); ++n)
    if (rel_gap(std::abs(ch.g1(n)), amp) > 1e-12)
      return "g1 modulus off at element " + std::to_string(n);
  if (ch.antenna_factor(0) != Complex(1.0, 0.0))
    return "first antenna factor is not 1";
  for (int m = 0; m < ch.antennas(); ++m) {
    if (std::abs(std::abs(ch.antenna_factor(m)) - 1.0) > 1e-12)
      return "antenna factor modulus off at antenna " + std::to_string(m);
    if ((ch.g(m) - ch.antenna_factor(m) * ch.g1).norm() > 0.0)
      return "g(m) deviates from the common-envelope structure";
  }
  return {};
}

std::string check_pilot_orthogonality(const SystemConfig& cfg) {
  const PilotBook book = build_pilots(cfg);
  const CMatrix gram = book.s.adjoint() * book.s;
  const double len = static_cast<double>(cfg.pilot_len);
  for (int i = 0; i < book.user_count(); ++i)
    for (int j = 0; j < book.user_count(); ++j) {
      const double want = i == j ? len : 0.0;
      if (std::abs(gram(i, j) - want) > 1e-9 * len)
        return "gram(" + std::to_string(i) + "," + std::to_string(j) +
               ") = " + format_double(std::abs(gram(i, j)));
    }
  return {};
}

std::string check_dft_orthogonality(const SystemConfig& cfg) {
  const DftBasis basis = dft_basis(cfg.pilot_len, cfg.elements);
  const CMatrix gram = basis.full.adjoint() * basis.full;
  const double len = static_cast<double>(cfg.pilot_len);
  const CMatrix want =
      len * CMatrix::Identity(cfg.elements + 1, cfg.elements + 1);
  if ((gram - want).cwiseAbs().maxCoeff() > 1e-10 * len)
    return "max deviation " +
           format_double((gram - want).cwiseAbs().maxCoeff());
  return {};
}

struct ScheduleProbe {
  ChannelSet ch;
  DftBasis basis;
  AmplificationSolution sol;
  BeamSchedule sched;
};

ScheduleProbe make_probe(const SystemConfig& cfg) {
  ScheduleProbe p;
  Crng rng(cfg.seed + 23);
  p.ch = gen_channels(cfg, rng);
  p.basis = dft_basis(cfg.pilot_len, cfg.elements);
  p.sol = optimize_amplification(cfg);
  p.sched = build_dft_schedule(p.sol.a_reflect, p.sol.a_refract, p.ch.g1,
                               p.basis, cfg);
  return p;
}

std::string check_schedule_identity(const SystemConfig& cfg) {
  const ScheduleProbe p = make_probe(cfg);
  for (Side side : {Side::Reflect, Side::Refract}) {
    const CMatrix rows = beam_row_products(p.sched.phi(side), p.ch.g1);
    const CMatrix want = p.sched.a(side) * CMatrix(p.basis.schedule_cols());
    const double tol = 1e-10 * std::max(p.sched.a(side), 1e-300);
    if ((rows - want).cwiseAbs().maxCoeff() > tol)
      return to_string(side) + " rows deviate by " +
             format_double((rows - want).cwiseAbs().maxCoeff());
  }
  return {};
}

std::string check_schedule_aperture(const SystemConfig& cfg) {
  const ScheduleProbe p = make_probe(cfg);
  const double cap = cfg.beta_max * (1.0 + 1e-9);
  for (int n = 0; n < cfg.elements; ++n)
    for (int l = 0; l < cfg.pilot_len; ++l) {
      const double power = std::norm(p.sched.phi_reflect(n, l)) +
                           std::norm(p.sched.phi_refract(n, l));
      if (power > cap)
        return "element " + std::to_string(n) + " slot " + std::to_string(l) +
               " uses " + format_double(power);
    }
  return {};
}

std::string check_theta_orthogonality(const SystemConfig& cfg) {
  const ScheduleProbe p = make_probe(cfg);
  const double len = static_cast<double>(cfg.pilot_len);
  for (Side side : {Side::Reflect, Side::Refract}) {
    const CMatrix theta =
        observation_matrix(beam_row_products(p.sched.phi(side), p.ch.g1));
    const CMatrix gram = theta.adjoint() * theta;
    const double a_sq = p.sched.a(side) * p.sched.a(side);
    const double scale = len * std::max(1.0, a_sq);
    for (int i = 0; i <= cfg.elements; ++i)
      for (int j = 0; j <= cfg.elements; ++j) {
        const double want = i != j ? 0.0 : (i == 0 ? len : len * a_sq);
        if (std::abs(gram(i, j) - want) > 1e-10 * scale)
          return to_string(side) + " gram(" + std::to_string(i) + "," +
                 std::to_string(j) + ") off by " +
                 format_double(std::abs(gram(i, j) - want));
      }
  }
  return {};
}

std::string check_noise_covariance(const SystemConfig& cfg) {
  const ScheduleProbe p = make_probe(cfg);
  const RVector cz = noise_covariance(p.sched, p.ch.g1, cfg.rx_noise_w);
  const double want =
      cfg.elements *
          (p.sol.a_reflect * p.sol.a_reflect +
           p.sol.a_refract * p.sol.a_refract) *
          cfg.surface_noise_w +
      cfg.rx_noise_w;
  for (int l = 0; l < cfg.pilot_len; ++l)
    if (rel_gap(cz(l), want) > 1e-10)
      return "slot " + std::to_string(l) + ": " + format_double(cz(l)) +
             " vs " + format_double(want);
  return {};
}

std::string check_estimator_consistency(const SystemConfig& cfg) {
  const ScheduleProbe p = make_probe(cfg);
  const RVector cz = noise_covariance(p.sched, p.ch.g1, cfg.rx_noise_w);
  const Side side = cfg.users.empty() ? Side::Reflect : cfg.users[0].side;
  const CMatrix theta =
      observation_matrix(beam_row_products(p.sched.phi(side), p.ch.g1));
  const LsEstimator est = make_ls_estimator(theta, cz);
  const CMatrix eye = est.pseudo * theta;
  const CMatrix want = CMatrix::Identity(eye.rows(), eye.cols());
  if ((eye - want).cwiseAbs().maxCoeff() > 1e-9)
    return "pseudo*theta deviates by " +
           format_double((eye - want).cwiseAbs().maxCoeff());
  return {};
}

std::string check_covariance_bound(const SystemConfig& cfg) {
  const ScheduleProbe p = make_probe(cfg);
  const RVector cz = noise_covariance(p.sched, p.ch.g1, cfg.rx_noise_w);
  const Side side = cfg.users.empty() ? Side::Reflect : cfg.users[0].side;
  const double power = cfg.users.empty() ? 0.1 : cfg.users[0].power_w;
  const CMatrix theta =
      observation_matrix(beam_row_products(p.sched.phi(side), p.ch.g1));
  const CMatrix cov = ls_covariance(theta, cz, power);
  double diag_mass = 0.0, off_mass = 0.0;
  for (int i = 0; i < cov.rows(); ++i)
    for (int j = 0; j < cov.cols(); ++j)
      (i == j ? diag_mass : off_mass) += std::abs(cov(i, j));
  if (off_mass > 1e-9 * diag_mass)
    return "off-diagonal mass " + format_double(off_mass / diag_mass);
  const RVector bound = crlb(theta, cz, power);
  for (int j = 0; j < cov.rows(); ++j)
    if (rel_gap(cov(j, j).real(), bound(j)) > 1e-9)
      return "component " + std::to_string(j) + " bound gap " +
             format_double(rel_gap(cov(j, j).real(), bound(j)));
  return {};
}

std::string check_ao(const SystemConfig& cfg) {
  const AmplificationSolution sol = optimize_amplification(cfg);
  if (!sol.converged) return "did not converge";
  if (sol.iterations > 100) return "too many iterations";
  const double eps0 = sol.trace.front().epsilon;
  double prev = eps0;
  for (const auto& entry : sol.trace) {
    if (entry.epsilon > prev + 1e-12 * std::max(eps0, 1e-300))
      return "trace increased to " + format_double(entry.epsilon);
    prev = entry.epsilon;
  }
  const double budget = cfg.amplification_budget();
  if (sol.a_reflect * sol.a_reflect + sol.a_refract * sol.a_refract >
      budget * (1.0 + 1e-12))
    return "solution infeasible";
  return {};
}

std::string check_label_symmetry(const SystemConfig& cfg) {
  SystemConfig mirror = cfg;
  for (auto& u : mirror.users) u.side = other_side(u.side);
  const AmplificationSolution sol = optimize_amplification(cfg);
  const AmplificationSolution mir = optimize_amplification(mirror);
  if (rel_gap(sol.epsilon, mir.epsilon) > 1e-9)
    return "objective changed under relabeling: " +
           format_double(rel_gap(sol.epsilon, mir.epsilon));
  if (rel_gap(sol.a_reflect, mir.a_refract) > 1e-6 ||
      rel_gap(sol.a_refract, mir.a_reflect) > 1e-6)
    return "amplifications did not swap under relabeling";
  return {};
}

std::string check_noise_monotone(const SystemConfig& cfg) {
  if (!(cfg.rx_noise_w > 0.0)) return {};  // nothing to compare against
  const AmplificationSolution sol = optimize_amplification(cfg);
  const double base =
      theoretical_epsilon(sol.a_reflect, sol.a_refract, cfg).total;
  SystemConfig louder = cfg;
  louder.rx_noise_w *= 2.0;
  if (!(theoretical_epsilon(sol.a_reflect, sol.a_refract, louder).total >
        base))
    return "not increasing in receiver noise";
  SystemConfig hotter = cfg;
  hotter.surface_noise_w =
      hotter.surface_noise_w > 0.0 ? hotter.surface_noise_w * 2.0 : 1e-12;
  if (!(theoretical_epsilon(sol.a_reflect, sol.a_refract, hotter).total >=
        base))
    return "not increasing in surface noise";
  return {};
}

std::string check_convexity_probe(const SystemConfig& cfg) {
  const double radius = std::sqrt(cfg.amplification_budget());
  Crng rng(cfg.seed + 29);
  auto sample = [&]() {
    const double r = radius * std::sqrt(rng.uniform());
    const double ang = 0.5 * M_PI * rng.uniform();
    const double lo = 1e-3 * radius;
    return std::pair<double, double>(std::max(r * std::cos(ang), lo),
                                     std::max(r * std::sin(ang), lo));
  };
  for (int probe = 0; probe < 10; ++probe) {
    auto [ar1, at1] = sample();
    auto [ar2, at2] = sample();
    if (ar1 * ar1 + at1 * at1 > cfg.amplification_budget()) continue;
    if (ar2 * ar2 + at2 * at2 > cfg.amplification_budget()) continue;
    const double mid = theoretical_epsilon(0.5 * (ar1 + ar2),
                                           0.5 * (at1 + at2), cfg)
                           .total;
    const double ends = 0.5 * (theoretical_epsilon(ar1, at1, cfg).total +
                               theoretical_epsilon(ar2, at2, cfg).total);
    if (mid > ends * (1.0 + 1e-9))
      return "midpoint " + format_double(mid) + " above chord " +
             format_double(ends);
  }
  return {};
}

std::string check_zero_noise_recovery(const SystemConfig& cfg) {
  SystemConfig quiet = cfg;
  quiet.surface_noise_w = 0.0;
  quiet.rx_noise_w = 0.0;
  // This check states that the estimation chain inverts the noiseless
  // per-user map; run it under ideal despreading so multi-user alias terms
  // (a real feature of full mode) do not enter.
  quiet.despread = DespreadMode::Ideal;
  Crng rng(cfg.seed + 31);
  ChannelSet truth;
  const ErrorReport rep =
      run_trial_with_channels(quiet, Scheme::DftMfris, rng, nullptr, &truth);
  const double scale =
      truth.h.squaredNorm() + truth.f.squaredNorm() + 1e-300;
  if (rep.eps_empirical > 1e-18 * scale)
    return "residual " + format_double(rep.eps_empirical) + " vs scale " +
           format_double(scale);
  return {};
}

std::string check_trial_determinism(const SystemConfig& cfg) {
  const ErrorReport a = run_point(cfg, Scheme::DftMfris, 16, 0, 1);
  const ErrorReport b = run_point(cfg, Scheme::DftMfris, 16, 0, 3);
  const ErrorReport c = run_point(cfg, Scheme::DftMfris, 16, 0, 1);
  if (a.eps_empirical != b.eps_empirical)
    return "thread count changed the result";
  if (a.eps_empirical != c.eps_empirical) return "rerun changed the result";
  for (std::size_t k = 0; k < a.per_user_direct.size(); ++k)
    if (a.per_user_direct[k] != b.per_user_direct[k] ||
        a.per_user_cascade[k] != b.per_user_cascade[k])
      return "per-user means differ across thread counts";
  return {};
}

std::string check_se_scaling(const SystemConfig& cfg) {
  const ErrorReport small = run_point(cfg, Scheme::DftMfris, 100, 1, 1);
  const ErrorReport large = run_point(cfg, Scheme::DftMfris, 10000, 1, 1);
  if (!(small.eps_empirical_se > 0.0) || !(large.eps_empirical_se > 0.0))
    return "standard error not populated";
  const double ratio = small.eps_empirical_se / large.eps_empirical_se;
  if (ratio < 10.0 / 1.25 || ratio > 10.0 * 1.25)
    return "SE ratio " + format_double(ratio) + " not ~10";
  return {};
}

std::string check_csv_shape(const SystemConfig& cfg) {
  SweepSpec spec;
  spec.variable = SweepVar::Power;
  spec.values = {20.0, 10.0};
  spec.schemes = {Scheme::Star, Scheme::DftMfris};
  spec.trials = 3;
  spec.threads = 1;
  spec.base = cfg;
  const SweepResult result = run_sweep(spec);
  if (result.rows.size() != 4)
    return "expected 4 rows, got " + std::to_string(result.rows.size());
  const std::string text1 = csv_text(result);
  const std::string text2 = csv_text(result);
  if (text1 != text2) return "emission is not stable";
  double prev = -1e300;
  for (const auto& row : result.rows) {
    if (row.value < prev) return "rows not sorted by value";
    prev = row.value;
    const double budget_row = row.a_reflect * row.a_reflect +
                              row.a_refract * row.a_refract;
    if (budget_row > cfg.amplification_budget() * (1.0 + 1e-12))
      return "row violates the amplification budget";
  }
  return {};
}

}  // namespace

std::vector<PropertyResult> run_property_suite(const SystemConfig& cfg) {
  using Entry = std::pair<const char*, std::function<std::string(
                                           const SystemConfig&)>>;
  const std::vector<Entry> checks = {
      {"config-validates", check_config},
      {"unit-conversions", check_conversions},
      {"path-loss-monotone", check_path_loss},
      {"channel-determinism", check_channel_determinism},
      {"channel-structure", check_channel_structure},
      {"pilot-orthogonality", check_pilot_orthogonality},
      {"dft-orthogonality", check_dft_orthogonality},
      {"schedule-row-identity", check_schedule_identity},
      {"schedule-aperture", check_schedule_aperture},
      {"theta-orthogonality", check_theta_orthogonality},
      {"noise-covariance-constant", check_noise_covariance},
      {"estimator-consistency", check_estimator_consistency},
      {"covariance-attains-bound", check_covariance_bound},
      {"ao-monotone-feasible", check_ao},
      {"label-swap-symmetry", check_label_symmetry},
      {"epsilon-noise-monotone", check_noise_monotone},
      {"epsilon-convexity-probe", check_convexity_probe},
      {"zero-noise-recovery", check_zero_noise_recovery},
      {"trial-determinism", check_trial_determinism},
      {"se-scaling", check_se_scaling},
      {"csv-shape", check_csv_shape},
  };

  std::vector<PropertyResult> results;
  results.reserve(checks.size());
  for (const auto& [name, fn] : checks) {
    PropertyResult r;
    r.name = name;
    try {
      r.detail = fn(cfg);
      r.pass = r.detail.empty();
    } catch (const std::exception& ex) {
      r.pass = false;
      r.detail = std::string("exception: ") + ex.what();
    }
    results.push_back(std::move(r));
  }
  return results;
}

}  // namespace mfris
