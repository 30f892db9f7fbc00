#pragma once

#include <iosfwd>
#include <optional>

#include "mfris/analysis.hpp"
#include "mfris/channel.hpp"
#include "mfris/estimation.hpp"
#include "mfris/scenario.hpp"
#include "mfris/training.hpp"
#include "mfris/types.hpp"

namespace mfris {

enum class SweepVar { Power, Distance, Users };

std::string to_string(SweepVar v);
SweepVar sweep_var_from_string(const std::string& tag);

struct SweepSpec {
  SweepVar variable = SweepVar::Power;
  std::vector<double> values;
  std::vector<Scheme> schemes;
  int trials = 10000;
  int threads = 1;
  SystemConfig base;
};

struct SweepRow {
  double value = 0.0;
  Scheme scheme = Scheme::DftMfris;
  int trials = 0;
  std::uint64_t seed = 0;
  double a_reflect = 0.0;
  double a_refract = 0.0;
  double eps_empirical = 0.0;
  double eps_theory = 0.0;
};

struct SweepResult {
  SweepVar variable = SweepVar::Power;
  std::vector<SweepRow> rows;  // sorted by (value, scheme)
  SystemConfig base;
  int trials = 0;
  int threads = 0;
};

/// Scenario actually simulated for one sweep point: the swept variable is
/// substituted into the base config (power splits a total budget equally,
/// distance moves the surface, users redraws the population).
SystemConfig config_for_point(const SweepSpec& spec, double value);

/// Users placed uniformly on a disc around the surface; deterministic in
/// (base seed, count).
std::vector<UserSpec> sample_disc_users(int count, const SystemConfig& base);

/// The config a scheme actually estimates under: single-face baselines
/// relocate everyone to the lit face when fair comparison is on.
SystemConfig effective_config(const SystemConfig& cfg, Scheme scheme);

/// One coherence block end to end: draw channels, design beams (running the
/// amplification solver for the adaptive scheme), synthesize pilots,
/// estimate, and score.
ErrorReport run_trial(const SystemConfig& cfg, Scheme scheme, Crng& rng);

/// run_trial with channel-reuse hooks: `forced` substitutes a previously
/// dumped ChannelSet for the random draw (sides must match the effective
/// config); `keep` receives the channels actually used.
ErrorReport run_trial_with_channels(const SystemConfig& cfg, Scheme scheme,
                                    Crng& rng, const ChannelSet* forced,
                                    ChannelSet* keep);

/// Monte-Carlo aggregate over `trials` blocks.  Per-trial streams derive
/// from (seed, point_id, scheme, trial), and reductions are pairwise over
/// the trial index, so the result is identical for any thread count.
ErrorReport run_point(const SystemConfig& cfg, Scheme scheme, int trials,
                      std::uint64_t point_id, int threads);

SweepResult run_sweep(const SweepSpec& spec);

/// Exact CSV bytes for a sweep result; throws on an empty row set.
void emit_csv(const SweepResult& result, std::ostream& out);
std::string csv_text(const SweepResult& result);

/// CSV plus a .meta companion describing the resolved scenario and sweep.
void write_sweep_outputs(const SweepResult& result, const std::string& csv_path);

/// Named self-checks over the core identities; returns (name, pass, detail).
struct PropertyResult {
  std::string name;
  bool pass = false;
  std::string detail;
};

std::vector<PropertyResult> run_property_suite(const SystemConfig& cfg);

}  // namespace mfris
