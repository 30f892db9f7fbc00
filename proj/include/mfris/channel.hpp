#pragma once

#include <iosfwd>

#include "mfris/numeric.hpp"
#include "mfris/scenario.hpp"
#include "mfris/types.hpp"

namespace mfris {

/// All channels of one coherence block.
///
/// The surface-to-receiver link is line-of-sight with a common envelope:
/// the vector seen by antenna m is antenna_factor(m) * g1, where every entry
/// of g1 has modulus sqrt(alpha) and |antenna_factor(m)| = 1 with
/// antenna_factor(0) = 1.  Storing the factorization keeps that structure
/// exact instead of approximate.
struct ChannelSet {
  CVector g1;              // N  surface -> first antenna
  CVector antenna_factor;  // M  per-antenna phase factors
  CMatrix h;               // M x K  direct user -> receiver links
  CMatrix f;               // N x K  user -> surface links
  std::vector<Side> sides; // K  face of each user

  int antennas() const { return static_cast<int>(antenna_factor.size()); }
  int elements() const { return static_cast<int>(g1.size()); }
  int user_count() const { return static_cast<int>(sides.size()); }

  /// Surface-to-antenna-m vector, antenna_factor(m) * g1.
  CVector g(int m) const { return antenna_factor(m) * g1; }

  /// Factor u_m relating antenna m's training rows to antenna 1's:
  /// phi^H diag(g(m)^H) = u_m * (phi^H diag(g1^H)).
  Complex beam_factor(int m) const { return std::conj(antenna_factor(m)); }
};

/// Surface-to-receiver link: g1 entries sqrt(alpha) e^{j psi_n}, plus the
/// per-antenna unit factors e^{j theta_m} (theta_0 = 0).
void gen_ris_bs(const SystemConfig& cfg, Crng& rng, CVector& g1,
                CVector& antenna_factor);

/// Rayleigh user links: h entries CN(0, pl(d_bs)), f entries CN(0, pl(d_ris)).
void gen_user_links(const SystemConfig& cfg, Crng& rng, CMatrix& h,
                    CMatrix& f);

/// Draws a complete block (surface link first, then user links).
ChannelSet gen_channels(const SystemConfig& cfg, Crng& rng);

/// Text dump/load with full-precision "re,im" cells; load(dump(x)) == x.
void dump_channels(const ChannelSet& ch, std::ostream& out);
ChannelSet load_channels(std::istream& in);
void dump_channels_file(const ChannelSet& ch, const std::string& path);
ChannelSet load_channels_file(const std::string& path);

}  // namespace mfris
