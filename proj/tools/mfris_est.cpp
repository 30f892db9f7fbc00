// Command-line front end: amplification optimization, Monte Carlo sweeps,
// self-check suite, and single-trial inspection.

#include <cstdint>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "mfris/harness.hpp"
#include "mfris/numeric.hpp"

namespace {

using namespace mfris;

std::vector<Scheme> parse_schemes(const std::string& text) {
  std::vector<Scheme> out;
  std::stringstream ss(text);
  std::string tag;
  while (std::getline(ss, tag, ',')) {
    if (tag.empty()) continue;
    out.push_back(scheme_from_string(tag));
  }
  if (out.empty()) throw ConfigError("no schemes given");
  return out;
}

std::vector<double> parse_values(const std::string& text) {
  std::vector<double> out;
  if (text.find(':') != std::string::npos) {
    double lo = 0, hi = 0, step = 0;
    char c1 = 0, c2 = 0;
    std::stringstream ss(text);
    if (!(ss >> lo >> c1 >> hi >> c2 >> step) || c1 != ':' || c2 != ':' ||
        !(step > 0))
      throw ConfigError("bad range '" + text + "', want lo:hi:step");
    for (double v = lo; v <= hi + 1e-9 * step; v += step) out.push_back(v);
  } else {
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
      if (item.empty()) continue;
      try {
        std::size_t pos = 0;
        out.push_back(std::stod(item, &pos));
        if (pos != item.size()) throw std::invalid_argument(item);
      } catch (const std::exception&) {
        throw ConfigError("bad value '" + item + "' in list");
      }
    }
  }
  if (out.empty()) throw ConfigError("no sweep values given");
  return out;
}

struct CommonOpts {
  std::string config_path;
  std::string seed_text;
  std::string scheme_text;
  std::string mode_text;
  std::string fair_text;
  std::string update_text;
};

void add_common(CLI::App* cmd, CommonOpts& opts) {
  cmd->add_option("--config", opts.config_path, "scenario file");
  cmd->add_option("--seed", opts.seed_text, "base RNG seed");
  cmd->add_option("--mode", opts.mode_text, "despreading: ideal|full");
  cmd->add_option("--fair-comparison", opts.fair_text,
                  "single-face benchmarks serve relocated users: on|off");
  cmd->add_option("--update", opts.update_text,
                  "amplification update rule: oracle|closed-form");
}

SystemConfig resolve_config(const CommonOpts& opts) {
  SystemConfig cfg =
      opts.config_path.empty() ? default_config() : load_config_file(opts.config_path);
  if (!opts.seed_text.empty()) {
    try {
      std::size_t pos = 0;
      cfg.seed = std::stoull(opts.seed_text, &pos);
      if (pos != opts.seed_text.size()) throw std::invalid_argument("");
    } catch (const std::exception&) {
      throw ConfigError("bad --seed '" + opts.seed_text + "'");
    }
  }
  if (!opts.mode_text.empty())
    cfg.despread = despread_mode_from_string(opts.mode_text);
  if (!opts.update_text.empty())
    cfg.update = update_rule_from_string(opts.update_text);
  if (!opts.fair_text.empty()) {
    if (opts.fair_text == "on")
      cfg.fair_comparison = true;
    else if (opts.fair_text == "off")
      cfg.fair_comparison = false;
    else
      throw ConfigError("bad --fair-comparison '" + opts.fair_text +
                        "', want on|off");
  }
  validate(cfg);
  return cfg;
}

int run_optimize(const CommonOpts& common) {
  const SystemConfig cfg = resolve_config(common);
  const AmplificationSolution sol = optimize_amplification(cfg);
  std::cout << "a_R=" << format_double(sol.a_reflect)
            << " a_T=" << format_double(sol.a_refract)
            << " epsilon=" << format_double(sol.epsilon)
            << " iterations=" << sol.iterations
            << " converged=" << (sol.converged ? "yes" : "no")
            << " closed_form_divergence="
            << format_double(sol.closed_form_divergence) << "\n";
  return 0;
}

int run_sweep_cmd(const CommonOpts& common, const std::string& var_text,
                  const std::string& values_text, const std::string& out_path,
                  int trials, int threads, const std::string& scheme_text) {
  SweepSpec spec;
  if (var_text == "power")
    spec.variable = SweepVar::Power;
  else if (var_text == "distance")
    spec.variable = SweepVar::Distance;
  else if (var_text == "users")
    spec.variable = SweepVar::Users;
  else
    throw ConfigError("bad --var '" + var_text + "', want power|distance|users");

  if (!values_text.empty()) {
    spec.values = parse_values(values_text);
  } else if (spec.variable == SweepVar::Power) {
    spec.values = parse_values("10:30:5");
  } else if (spec.variable == SweepVar::Distance) {
    spec.values = parse_values("10:40:5");
  } else {
    spec.values = parse_values("2:8:1");
  }
  spec.schemes = parse_schemes(scheme_text);
  spec.trials = trials;
  spec.threads = threads;
  spec.base = resolve_config(common);

  const SweepResult result = run_sweep(spec);
  if (out_path.empty()) {
    std::ostringstream os;
    emit_csv(result, os);
    std::cout << os.str();
  } else {
    write_sweep_outputs(result, out_path);
    std::cout << "wrote " << out_path << " (" << result.rows.size()
              << " rows)\n";
  }
  return 0;
}

int run_validate(const CommonOpts& common) {
  const SystemConfig cfg = resolve_config(common);
  const std::vector<PropertyResult> results = run_property_suite(cfg);
  int failures = 0;
  for (const auto& r : results) {
    if (r.pass) {
      std::cout << "ok " << r.name << "\n";
    } else {
      ++failures;
      std::cout << "FAIL " << r.name << ": " << r.detail << "\n";
    }
  }
  std::cout << results.size() - failures << "/" << results.size()
            << " checks passed\n";
  return failures == 0 ? 0 : 1;
}

void print_report(const ErrorReport& rep) {
  std::cout << "scheme=" << to_string(rep.scheme) << " trials=" << rep.trials
            << " seed=" << rep.seed << "\n";
  std::cout << "a_R=" << format_double(rep.a_reflect)
            << " a_T=" << format_double(rep.a_refract) << "\n";
  std::cout << "eps_empirical=" << format_double(rep.eps_empirical)
            << " se=" << format_double(rep.eps_empirical_se) << "\n";
  std::cout << "eps_theory=" << format_double(rep.eps_theory)
            << " eps_norm_theory=" << format_double(rep.eps_norm_theory)
            << "\n";
  for (std::size_t k = 0; k < rep.per_user_direct.size(); ++k) {
    std::cout << "user " << k
              << ": direct=" << format_double(rep.per_user_direct[k])
              << " cascade=" << format_double(rep.per_user_cascade[k])
              << " theory_direct=" << format_double(rep.theory_per_user[k].direct)
              << " theory_cascade="
              << format_double(rep.theory_per_user[k].cascade)
              << " served=" << (rep.served[k] ? "yes" : "no") << "\n";
  }
  if (rep.excluded_cascade > 0.0)
    std::cout << "unserved cascade power=" << format_double(rep.excluded_cascade)
              << "\n";
  for (std::size_t k = 0; k < rep.crlb_per_user.size(); ++k) {
    const auto& b = rep.crlb_per_user[k];
    double total = 0.0;
    for (int j = 0; j < b.size(); ++j) total += b(j);
    std::cout << "user " << k << " crlb total=" << format_double(total) << "\n";
  }
  if (rep.degenerate) {
    std::cout << "degenerate: active=" << to_string(rep.degenerate->active)
              << " direct=" << format_double(rep.degenerate->direct)
              << " cascade_unbounded="
              << (rep.degenerate->cascade_unbounded ? "yes" : "no") << "\n";
  }
  if (rep.solver_iterations > 0)
    std::cout << "solver iterations=" << rep.solver_iterations
              << " converged=" << (rep.solver_converged ? "yes" : "no")
              << "\n";
}

int run_trial_cmd(const CommonOpts& common, const std::string& scheme_text,
                  const std::string& dump_path, const std::string& load_path) {
  const SystemConfig cfg = resolve_config(common);
  const Scheme scheme = scheme_from_string(scheme_text);
  Crng rng(mix_seed({cfg.seed, 0, static_cast<std::uint64_t>(scheme), 0}));
  ChannelSet forced;
  ChannelSet kept;
  const bool have_forced = !load_path.empty();
  if (have_forced) forced = load_channels_file(load_path);
  const ErrorReport rep = run_trial_with_channels(
      cfg, scheme, rng, have_forced ? &forced : nullptr, &kept);
  if (!dump_path.empty()) dump_channels_file(kept, dump_path);
  print_report(rep);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"least-squares channel estimation for multi-functional surfaces"};
  app.require_subcommand(1);

  CommonOpts common;

  auto* opt_cmd = app.add_subcommand("optimize", "solve for the amplification pair");
  add_common(opt_cmd, common);

  auto* sweep_cmd = app.add_subcommand("sweep", "Monte Carlo sweep to CSV");
  add_common(sweep_cmd, common);
  std::string var_text = "power";
  std::string values_text;
  std::string out_path;
  std::string sweep_schemes = "dft-mfris,onoff-mfris,star,active,passive";
  int trials = 10000;
  int threads = 1;
  sweep_cmd->add_option("--var", var_text, "power|distance|users");
  sweep_cmd->add_option("--values", values_text, "lo:hi:step or comma list");
  sweep_cmd->add_option("--out", out_path, "CSV output path");
  sweep_cmd->add_option("--trials", trials, "trials per point");
  sweep_cmd->add_option("--threads", threads, "worker threads");
  sweep_cmd->add_option("--schemes", sweep_schemes, "comma-separated tags");

  auto* validate_cmd = app.add_subcommand("validate", "run the self-check suite");
  add_common(validate_cmd, common);

  auto* trial_cmd = app.add_subcommand("trial", "one verbose estimation trial");
  add_common(trial_cmd, common);
  std::string trial_scheme = "dft-mfris";
  std::string dump_path;
  std::string load_path;
  trial_cmd->add_option("--scheme", trial_scheme, "scheme tag");
  trial_cmd->add_option("--dump-channels", dump_path, "write drawn channels");
  trial_cmd->add_option("--load-channels", load_path, "reuse dumped channels");

  CLI11_PARSE(app, argc, argv);

  try {
    if (opt_cmd->parsed()) return run_optimize(common);
    if (sweep_cmd->parsed())
      return run_sweep_cmd(common, var_text, values_text, out_path, trials,
                           threads, sweep_schemes);
    if (validate_cmd->parsed()) return run_validate(common);
    if (trial_cmd->parsed())
      return run_trial_cmd(common, trial_scheme, dump_path, load_path);
  } catch (const std::exception& ex) {
    std::cerr << "error: " << ex.what() << "\n";
    return 1;
  }
  return 0;
}
