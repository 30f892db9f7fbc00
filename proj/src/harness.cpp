#include "mfris/harness.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <fstream>
#include <sstream>
#include <thread>

#include "mfris/numeric.hpp"

namespace mfris {

std::string to_string(SweepVar v) {
  switch (v) {
    case SweepVar::Power: return "power";
    case SweepVar::Distance: return "distance";
    case SweepVar::Users: return "users";
  }
  return "power";
}

SweepVar sweep_var_from_string(const std::string& tag) {
  if (tag == "power") return SweepVar::Power;
  if (tag == "distance") return SweepVar::Distance;
  if (tag == "users") return SweepVar::Users;
  throw ConfigError("unknown sweep variable '" + tag +
                    "' (expected power|distance|users)");
}

SystemConfig effective_config(const SystemConfig& cfg, Scheme scheme) {
  SystemConfig out = cfg;
  // Reflect-only surfaces serve no refract-side users; under fair comparison
  // everyone is relocated to the lit face so the baselines compete on equal
  // terms.
  if ((scheme == Scheme::Active || scheme == Scheme::Passive) &&
      cfg.fair_comparison) {
    for (auto& u : out.users) u.side = Side::Reflect;
  }
  return out;
}

namespace {

struct TrialContext {
  SystemConfig cfg;  // effective
  Scheme scheme = Scheme::DftMfris;
  DftBasis basis;
  PilotBook pilots;
  std::optional<AmplificationSolution> solution;
  double a_reflect = 0.0;
  double a_refract = 0.0;
  double surface_noise_eff = 0.0;
  // Estimators precomputed from the exact DFT rows (a_i times the basis
  // columns); the switching scheme's observation matrix depends on the drawn
  // surface phases, so it is rebuilt per trial instead.
  std::optional<LsEstimator> face_est[2];
  std::optional<LsEstimator> direct_est;
  bool face_served[2] = {false, false};
  bool face_used[2] = {false, false};
};

BeamSchedule schedule_for(const TrialContext& ctx, const CVector& g1) {
  if (ctx.scheme == Scheme::DftMfris)
    return build_dft_schedule(ctx.a_reflect, ctx.a_refract, g1, ctx.basis,
                              ctx.cfg);
  return build_baseline_schedule(ctx.scheme, ctx.cfg, g1, ctx.basis);
}

CVector canonical_g1(const SystemConfig& cfg) {
  return CVector::Constant(cfg.elements,
                           Complex(std::sqrt(cfg.ris_bs_gain()), 0.0));
}

TrialContext make_context(const SystemConfig& raw, Scheme scheme) {
  TrialContext ctx;
  ctx.cfg = effective_config(validate(raw), scheme);
  ctx.scheme = scheme;
  ctx.basis = dft_basis(ctx.cfg.pilot_len, ctx.cfg.elements);
  ctx.pilots = build_pilots(ctx.cfg);

  const double alpha = ctx.cfg.ris_bs_gain();
  switch (scheme) {
    case Scheme::DftMfris:
      ctx.solution = optimize_amplification(ctx.cfg);
      ctx.a_reflect = ctx.solution->a_reflect;
      ctx.a_refract = ctx.solution->a_refract;
      ctx.surface_noise_eff = ctx.cfg.surface_noise_w;
      break;
    case Scheme::Star:
      ctx.a_reflect = std::sqrt(0.5 * alpha);
      ctx.a_refract = std::sqrt(0.5 * alpha);
      ctx.surface_noise_eff = 0.0;
      break;
    case Scheme::Passive:
      ctx.a_reflect = std::sqrt(alpha);
      ctx.a_refract = 0.0;
      ctx.surface_noise_eff = 0.0;
      break;
    case Scheme::Active:
      ctx.a_reflect = std::sqrt(ctx.cfg.amplification_budget());
      ctx.a_refract = 0.0;
      ctx.surface_noise_eff = ctx.cfg.surface_noise_w;
      break;
    case Scheme::OnOffMfris:
      ctx.a_reflect = 0.0;
      ctx.a_refract = 0.0;
      ctx.surface_noise_eff = ctx.cfg.surface_noise_w;
      break;
  }

  for (Side side : {Side::Reflect, Side::Refract})
    ctx.face_used[side_index(side)] = ctx.cfg.users_on(side) > 0;

  if (scheme != Scheme::OnOffMfris) {
    // Exact row products of the DFT-steered design are a_i times the basis
    // columns, independent of the drawn surface phases, so the estimators
    // can be fixed once per context.
    const CVector g1c = canonical_g1(ctx.cfg);
    const BeamSchedule sched = schedule_for(ctx, g1c);
    const RVector cz = noise_covariance(sched, g1c, ctx.cfg.rx_noise_w);
    for (Side side : {Side::Reflect, Side::Refract}) {
      const int idx = side_index(side);
      if (!ctx.face_used[idx]) continue;
      ctx.face_served[idx] = sched.serves(side);
      if (ctx.face_served[idx]) {
        const CMatrix rows =
            sched.a(side) * CMatrix(ctx.basis.schedule_cols());
        ctx.face_est[idx] =
            make_ls_estimator(observation_matrix(rows), cz, to_string(scheme));
      } else if (!ctx.direct_est) {
        ctx.direct_est = make_ls_estimator(
            CMatrix::Ones(ctx.cfg.pilot_len, 1), cz, to_string(scheme));
      }
    }
  } else {
    ctx.face_served[0] = ctx.face_served[1] = true;  // built per trial
  }
  return ctx;
}

TrialScore run_core(const TrialContext& ctx, Crng& rng,
                    const ChannelSet* forced, ChannelSet* keep) {
  const SystemConfig& cfg = ctx.cfg;
  ChannelSet ch;
  if (forced) {
    if (forced->antennas() != cfg.antennas ||
        forced->elements() != cfg.elements ||
        forced->user_count() != cfg.user_count())
      throw DimensionError("run_trial: supplied channels do not match config");
    for (int k = 0; k < cfg.user_count(); ++k)
      if (forced->sides[static_cast<std::size_t>(k)] !=
          cfg.users[static_cast<std::size_t>(k)].side)
        throw ConfigError(
            "run_trial: supplied channel sides do not match the effective "
            "config (fair comparison may have relocated users)");
    ch = *forced;
  } else {
    ch = gen_channels(cfg, rng);
  }

  const BeamSchedule sched = schedule_for(ctx, ch.g1);
  const ObservationBlock obs = synthesize_rx(ch, sched, ctx.pilots, cfg, rng);

  // Per-face estimators: reuse the context ones when available.
  std::optional<LsEstimator> local_face[2];
  std::optional<LsEstimator> local_direct;
  const LsEstimator* face_est[2] = {nullptr, nullptr};
  const LsEstimator* direct_est = nullptr;
  if (ctx.scheme == Scheme::OnOffMfris) {
    const RVector cz = noise_covariance(sched, ch.g1, cfg.rx_noise_w);
    for (Side side : {Side::Reflect, Side::Refract}) {
      const int idx = side_index(side);
      if (!ctx.face_used[idx]) continue;
      local_face[idx] = make_ls_estimator(
          observation_matrix(beam_row_products(sched.phi(side), ch.g1)), cz,
          to_string(ctx.scheme));
      face_est[idx] = &*local_face[idx];
    }
  } else {
    for (int idx = 0; idx < 2; ++idx)
      if (ctx.face_est[idx]) face_est[idx] = &*ctx.face_est[idx];
    if (ctx.direct_est) direct_est = &*ctx.direct_est;
  }

  std::vector<CMatrix> raw(static_cast<std::size_t>(cfg.user_count()));
  for (int k = 0; k < cfg.user_count(); ++k) {
    const auto& user = cfg.users[static_cast<std::size_t>(k)];
    const int idx = side_index(user.side);
    const LsEstimator* est = face_est[idx] ? face_est[idx] : direct_est;
    if (!est)
      throw SingularityError("run_trial: no estimator for face " +
                             to_string(user.side));
    const double root_p = std::sqrt(user.power_w);
    const CMatrix& y = obs.despread[static_cast<std::size_t>(k)];
    CMatrix& out = raw[static_cast<std::size_t>(k)];
    out.resize(est->pseudo.rows(), cfg.antennas);
    for (int m = 0; m < cfg.antennas; ++m)
      out.col(m) = (est->pseudo * y.col(m)) / root_p;
  }

  const EstimateSet estimates = combine_estimates(raw, ch.antenna_factor);
  if (keep) *keep = ch;
  return empirical_sum_mse(ch, estimates);
}

// Theory, bounds, and solver bookkeeping shared by run_trial and run_point.
void attach_theory(ErrorReport& rep, const TrialContext& ctx) {
  const SystemConfig& cfg = ctx.cfg;
  const CVector g1c = canonical_g1(cfg);
  const BeamSchedule sched = schedule_for(ctx, g1c);

  const ErrorPrediction pred_mode = predict_norm_error(
      sched, g1c, cfg, cfg.independent_surface_noise);
  const ErrorPrediction pred_indep =
      cfg.independent_surface_noise ? pred_mode
                                    : predict_norm_error(sched, g1c, cfg, true);

  rep.eps_norm_theory = pred_mode.total;
  rep.theory_per_user.resize(cfg.users.size());
  rep.served.assign(pred_indep.served.begin(), pred_indep.served.end());
  const double m = static_cast<double>(cfg.antennas);
  double eps_theory = 0.0;
  for (std::size_t k = 0; k < cfg.users.size(); ++k) {
    // Per-antenna direct error and antenna-combined cascade error: the
    // weighting of the closed forms.
    rep.theory_per_user[k].direct = pred_indep.per_user[k].direct / m;
    rep.theory_per_user[k].cascade = pred_indep.per_user[k].cascade;
    eps_theory +=
        rep.theory_per_user[k].direct + rep.theory_per_user[k].cascade;
  }
  rep.eps_theory = eps_theory;

  const RVector cz = noise_covariance(sched, g1c, cfg.rx_noise_w);
  CMatrix theta_face[2];
  rep.crlb_per_user.resize(cfg.users.size());
  for (std::size_t k = 0; k < cfg.users.size(); ++k) {
    const Side side = cfg.users[k].side;
    const int idx = side_index(side);
    if (theta_face[idx].size() == 0) {
      theta_face[idx] =
          sched.serves(side)
              ? observation_matrix(beam_row_products(sched.phi(side), g1c))
              : CMatrix::Ones(cfg.pilot_len, 1);
    }
    rep.crlb_per_user[k] = crlb(theta_face[idx], cz, cfg.users[k].power_w);
  }

  const bool reflect_empty = cfg.users_on(Side::Reflect) == 0;
  const bool refract_empty = cfg.users_on(Side::Refract) == 0;
  if (reflect_empty != refract_empty) {
    rep.degenerate = degenerate_epsilon(
        reflect_empty ? Side::Refract : Side::Reflect, cfg,
        ctx.surface_noise_eff);
  }

  if (ctx.solution) {
    rep.solver_iterations = ctx.solution->iterations;
    rep.solver_converged = ctx.solution->converged;
    rep.solver_trace = ctx.solution->trace;
  }
  rep.a_reflect = ctx.a_reflect;
  rep.a_refract = ctx.a_refract;
}

ErrorReport report_from_scores(const TrialContext& ctx,
                               std::vector<std::vector<double>>& direct,
                               std::vector<std::vector<double>>& cascade,
                               std::vector<double>& excluded,
                               std::vector<double>& total, int trials) {
  ErrorReport rep;
  rep.scheme = ctx.scheme;
  rep.trials = trials;
  rep.seed = ctx.cfg.seed;

  const double t = static_cast<double>(trials);
  const std::size_t k_users = direct.size();
  rep.per_user_direct.resize(k_users);
  rep.per_user_cascade.resize(k_users);
  for (std::size_t k = 0; k < k_users; ++k) {
    rep.per_user_direct[k] = pairwise_sum(direct[k]) / t;
    rep.per_user_cascade[k] = pairwise_sum(cascade[k]) / t;
  }
  rep.excluded_cascade = pairwise_sum(excluded) / t;

  rep.eps_empirical = pairwise_sum(total) / t;
  if (trials > 1) {
    std::vector<double> sq(total.size());
    for (std::size_t i = 0; i < total.size(); ++i) sq[i] = total[i] * total[i];
    const double mean_sq = pairwise_sum(sq) / t;
    const double var =
        std::max(mean_sq - rep.eps_empirical * rep.eps_empirical, 0.0) *
        (t / (t - 1.0));
    rep.eps_empirical_se = std::sqrt(var / t);
  }

  attach_theory(rep, ctx);
  return rep;
}

}  // namespace

ErrorReport run_trial(const SystemConfig& cfg, Scheme scheme, Crng& rng) {
  return run_trial_with_channels(cfg, scheme, rng, nullptr, nullptr);
}

ErrorReport run_trial_with_channels(const SystemConfig& cfg, Scheme scheme,
                                    Crng& rng, const ChannelSet* forced,
                                    ChannelSet* keep) {
  const TrialContext ctx = make_context(cfg, scheme);
  const TrialScore score = run_core(ctx, rng, forced, keep);
  const std::size_t k_users = score.direct_sq.size();
  std::vector<std::vector<double>> direct(k_users), cascade(k_users);
  std::vector<double> excluded(1, 0.0), total(1, score.total());
  for (std::size_t k = 0; k < k_users; ++k) {
    direct[k] = {score.direct_sq[k]};
    cascade[k] = {score.cascade_sq[k]};
    excluded[0] += score.excluded_sq[k];
  }
  return report_from_scores(ctx, direct, cascade, excluded, total, 1);
}

ErrorReport run_point(const SystemConfig& cfg, Scheme scheme, int trials,
                      std::uint64_t point_id, int threads) {
  if (trials < 1) throw ConfigError("run_point: trials must be >= 1");
  const TrialContext ctx = make_context(cfg, scheme);
  const std::size_t k_users = static_cast<std::size_t>(ctx.cfg.user_count());

  std::vector<std::vector<double>> direct(k_users), cascade(k_users);
  for (auto& v : direct) v.resize(static_cast<std::size_t>(trials));
  for (auto& v : cascade) v.resize(static_cast<std::size_t>(trials));
  std::vector<double> excluded(static_cast<std::size_t>(trials));
  std::vector<double> total(static_cast<std::size_t>(trials));

  const std::uint64_t scheme_id = static_cast<std::uint64_t>(scheme);
  auto work = [&](int lo, int hi) {
    for (int t = lo; t < hi; ++t) {
      Crng rng(mix_seed({ctx.cfg.seed, point_id, scheme_id,
                         static_cast<std::uint64_t>(t)}));
      const TrialScore score = run_core(ctx, rng, nullptr, nullptr);
      double excl = 0.0;
      for (std::size_t k = 0; k < k_users; ++k) {
        direct[k][static_cast<std::size_t>(t)] = score.direct_sq[k];
        cascade[k][static_cast<std::size_t>(t)] = score.cascade_sq[k];
        excl += score.excluded_sq[k];
      }
      excluded[static_cast<std::size_t>(t)] = excl;
      total[static_cast<std::size_t>(t)] = score.total();
    }
  };

  const int nthreads = std::clamp(threads, 1, trials);
  if (nthreads == 1) {
    work(0, trials);
  } else {
    std::vector<std::thread> pool;
    std::vector<std::exception_ptr> errors(
        static_cast<std::size_t>(nthreads));
    for (int i = 0; i < nthreads; ++i) {
      const int lo = static_cast<int>(
          static_cast<long long>(trials) * i / nthreads);
      const int hi = static_cast<int>(
          static_cast<long long>(trials) * (i + 1) / nthreads);
      pool.emplace_back([&, lo, hi, i]() {
        try {
          work(lo, hi);
        } catch (...) {
          errors[static_cast<std::size_t>(i)] = std::current_exception();
        }
      });
    }
    for (auto& th : pool) th.join();
    for (const auto& err : errors)
      if (err) std::rethrow_exception(err);
  }

  return report_from_scores(ctx, direct, cascade, excluded, total, trials);
}

SystemConfig config_for_point(const SweepSpec& spec, double value) {
  SystemConfig out = spec.base;
  switch (spec.variable) {
    case SweepVar::Power: {
      // The swept value is the total transmit budget in dBm, split equally.
      const int k_users = out.user_count();
      if (k_users < 1) throw ConfigError("power sweep: base has no users");
      const double per_user = dbm_to_watts(value) / k_users;
      for (auto& u : out.users) u.power_w = per_user;
      break;
    }
    case SweepVar::Distance:
      out.bs_ris_dist_m = value;
      break;
    case SweepVar::Users: {
      const int count = static_cast<int>(std::llround(value));
      if (count < 1 || std::abs(value - count) > 1e-9)
        throw ConfigError("users sweep: values must be positive integers");
      out.users = sample_disc_users(count, spec.base);
      break;
    }
  }
  validate(out);
  return out;
}

std::vector<UserSpec> sample_disc_users(int count, const SystemConfig& base) {
  if (count < 1) throw ConfigError("sample_disc_users: count must be >= 1");
  Crng rng(mix_seed({base.seed, 0xd15cull, static_cast<std::uint64_t>(count)}));
  const double power =
      base.users.empty() ? dbm_to_watts(20.0) : base.users[0].power_w;
  std::vector<UserSpec> users(static_cast<std::size_t>(count));
  for (int i = 0; i < count; ++i) {
    // Uniform over a 5 m disc centered on the surface, kept a little away
    // from the surface itself.
    const double r = std::max(5.0 * std::sqrt(rng.uniform()), 0.25);
    const double ang = 2.0 * M_PI * rng.uniform();
    const double x = r * std::cos(ang);
    const double y = r * std::sin(ang);
    UserSpec u;
    u.side = (i % 2 == 0) ? Side::Reflect : Side::Refract;
    u.power_w = power;
    u.dist_ris_m = r;
    u.dist_bs_m = std::hypot(base.bs_ris_dist_m + x, y);
    users[static_cast<std::size_t>(i)] = u;
  }
  return users;
}

SweepResult run_sweep(const SweepSpec& spec) {
  validate(spec.base);
  if (spec.values.empty()) throw ConfigError("run_sweep: no sweep values");
  if (spec.schemes.empty()) throw ConfigError("run_sweep: no schemes");
  if (spec.trials < 1) throw ConfigError("run_sweep: trials must be >= 1");

  std::vector<double> values = spec.values;
  std::sort(values.begin(), values.end());
  values.erase(std::unique(values.begin(), values.end()), values.end());

  std::vector<Scheme> schemes = spec.schemes;
  std::sort(schemes.begin(), schemes.end());
  schemes.erase(std::unique(schemes.begin(), schemes.end()), schemes.end());

  SweepResult result;
  result.variable = spec.variable;
  result.base = spec.base;
  result.trials = spec.trials;
  result.threads = spec.threads;
  for (std::size_t vi = 0; vi < values.size(); ++vi) {
    const SystemConfig cfg = config_for_point(spec, values[vi]);
    for (Scheme scheme : schemes) {
      const ErrorReport rep = run_point(cfg, scheme, spec.trials,
                                        static_cast<std::uint64_t>(vi),
                                        spec.threads);
      SweepRow row;
      row.value = values[vi];
      row.scheme = scheme;
      row.trials = rep.trials;
      row.seed = rep.seed;
      row.a_reflect = rep.a_reflect;
      row.a_refract = rep.a_refract;
      row.eps_empirical = rep.eps_empirical;
      row.eps_theory = rep.eps_theory;
      result.rows.push_back(row);
    }
  }
  return result;
}

void emit_csv(const SweepResult& result, std::ostream& out) {
  if (result.rows.empty()) throw Error("emit_csv: empty sweep result");
  out << "sweep_var,value,scheme,trials,seed,a_R,a_T,eps_empirical,eps_theory"
      << "\n";
  for (const auto& row : result.rows) {
    out << to_string(result.variable) << "," << format_double(row.value) << ","
        << to_string(row.scheme) << "," << row.trials << "," << row.seed << ","
        << format_double(row.a_reflect) << "," << format_double(row.a_refract)
        << "," << format_double(row.eps_empirical) << ","
        << format_double(row.eps_theory) << "\n";
  }
  if (!out) throw IoError("emit_csv: write failure");
}

std::string csv_text(const SweepResult& result) {
  std::ostringstream out;
  emit_csv(result, out);
  return out.str();
}

void write_sweep_outputs(const SweepResult& result,
                         const std::string& csv_path) {
  {
    std::ofstream out(csv_path, std::ios::binary);
    if (!out) throw IoError("cannot open '" + csv_path + "' for writing");
    emit_csv(result, out);
    if (!out) throw IoError("write failure for '" + csv_path + "'");
  }
  const std::string meta_path = csv_path + ".meta";
  std::ofstream meta(meta_path, std::ios::binary);
  if (!meta) throw IoError("cannot open '" + meta_path + "' for writing");
  meta << "# sweep\n";
  meta << "sweep_var " << to_string(result.variable) << "\n";
  meta << "values ";
  // A value can repeat across schemes; list the distinct sorted values.
  std::vector<double> values;
  for (const auto& row : result.rows) values.push_back(row.value);
  std::sort(values.begin(), values.end());
  values.erase(std::unique(values.begin(), values.end()), values.end());
  for (std::size_t i = 0; i < values.size(); ++i)
    meta << (i ? "," : "") << format_double(values[i]);
  meta << "\n";
  meta << "trials " << result.trials << "\n";
  meta << "threads " << result.threads << "\n";
  std::vector<Scheme> schemes;
  for (const auto& row : result.rows) schemes.push_back(row.scheme);
  std::sort(schemes.begin(), schemes.end());
  schemes.erase(std::unique(schemes.begin(), schemes.end()), schemes.end());
  meta << "schemes ";
  for (std::size_t i = 0; i < schemes.size(); ++i)
    meta << (i ? "," : "") << to_string(schemes[i]);
  meta << "\n";
  meta << "# resolved base config\n";
  meta << format_config(result.base);
  if (!meta) throw IoError("write failure for '" + meta_path + "'");
}

}  // namespace mfris
