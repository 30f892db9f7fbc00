#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "mfris/types.hpp"

namespace mfris {

/// A single uplink user: which face it sits on, transmit power, and its
/// distances to the surface and to the base station.
struct UserSpec {
  Side side = Side::Reflect;
  double power_w = 0.1;
  double dist_ris_m = 10.0 / 3.0;
  double dist_bs_m = 20.0;
};

/// Full scenario description.  Defaults reproduce the reference setup used
/// throughout the tests: an 8-antenna receiver, a 25-element surface, and two
/// 20 dBm users, one per face.
struct SystemConfig {
  int antennas = 8;    // M
  int elements = 25;   // N
  int pilot_len = 26;  // L, one slot more than the element count

  std::vector<UserSpec> users;

  double surface_noise_w = 1e-10;  // sigma_s^2, per element
  double rx_noise_w = 1e-11;       // sigma^2, per antenna
  double beta_max = 79.43282347242814;  // per-element power budget (linear)

  double bs_ris_dist_m = 20.0;
  double exponent_ris_bs = 2.5;
  double exponent_user_ris = 2.5;
  double exponent_user_bs = 3.5;
  double ref_path_loss = 1e-3;  // gain at 1 m

  std::uint64_t seed = 1;
  DespreadMode despread = DespreadMode::Ideal;
  Scheme scheme = Scheme::DftMfris;
  UpdateRule update = UpdateRule::Oracle;
  bool fair_comparison = true;
  bool independent_surface_noise = false;

  int user_count() const { return static_cast<int>(users.size()); }
  int users_on(Side s) const;

  /// Large-scale gain of the surface-to-receiver link (alpha).
  double ris_bs_gain() const;

  /// Radius-squared of the feasible amplification disc, beta_max * alpha.
  double amplification_budget() const;
};

double dbm_to_watts(double dbm);
double watts_to_dbm(double watts);
double db_to_linear(double db);
double linear_to_db(double value);

/// Distance-power-law gain: ref * d^(-exponent).  Requires d > 0.
double path_loss(double distance_m, double exponent, double ref);

/// All invariant violations, one message each; empty when the config is valid.
std::vector<std::string> validation_errors(const SystemConfig& cfg);

/// Throws ConfigError listing every violation; returns its argument otherwise.
const SystemConfig& validate(const SystemConfig& cfg);

SystemConfig default_config();

/// Parses the flat key/value config format.  Unknown keys, repeated keys,
/// malformed values, and missing mandatory keys raise ConfigError.
SystemConfig parse_config_text(const std::string& text);
SystemConfig load_config_file(const std::string& path);

/// Serializes a config in the same key/value format (round-trips through
/// parse_config_text).
std::string format_config(const SystemConfig& cfg);

}  // namespace mfris
