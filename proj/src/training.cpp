#include "mfris/training.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "mfris/analysis.hpp"
#include "mfris/numeric.hpp"

namespace mfris {

namespace {

// Unit phasor at the reduced angle 2 pi (num mod den) / den; the integer
// reduction keeps the periodic structure exact for large products.
Complex unit_phasor(long long num, long long den, bool negate) {
  long long r = num % den;
  if (r < 0) r += den;
  double ang = 2.0 * M_PI * static_cast<double>(r) / static_cast<double>(den);
  if (negate) ang = -ang;
  return Complex(std::cos(ang), std::sin(ang));
}

}  // namespace

PilotBook build_pilots(const SystemConfig& cfg) {
  const int L = cfg.pilot_len;
  const int K = cfg.user_count();
  if (K < 1) throw ConfigError("build_pilots: no users");
  if (L < K)
    throw DimensionError("build_pilots: L >= K violated (L=" +
                         std::to_string(L) + ", K=" + std::to_string(K) + ")");
  PilotBook book;
  book.s.resize(L, K);
  book.tone.resize(static_cast<std::size_t>(K));
  for (int k = 0; k < K; ++k) {
    book.tone[static_cast<std::size_t>(k)] = k;
    for (int l = 0; l < L; ++l)
      book.s(l, k) = unit_phasor(static_cast<long long>(l) * k, L, false);
  }
  return book;
}

DftBasis dft_basis(int pilot_len, int elements) {
  if (elements < 1)
    throw DimensionError("dft_basis: N >= 1 violated (N=" +
                         std::to_string(elements) + ")");
  if (pilot_len < elements + 1)
    throw DimensionError("dft_basis: L >= N+1 violated (L=" +
                         std::to_string(pilot_len) +
                         ", N=" + std::to_string(elements) + ")");
  DftBasis basis;
  basis.full.resize(pilot_len, elements + 1);
  for (int l = 0; l < pilot_len; ++l)
    for (int c = 0; c <= elements; ++c)
      basis.full(l, c) =
          unit_phasor(static_cast<long long>(l) * c, pilot_len, true);
  return basis;
}

BeamSchedule build_dft_schedule(double a_reflect, double a_refract,
                                const CVector& g1, const DftBasis& basis,
                                const SystemConfig& cfg) {
  const int n = static_cast<int>(g1.size());
  const int pilot_len = basis.pilot_len();
  if (basis.elements() != n)
    throw DimensionError("build_dft_schedule: basis is for N=" +
                         std::to_string(basis.elements()) +
                         " but g1 has N=" + std::to_string(n));
  if (cfg.elements != n || cfg.pilot_len != pilot_len)
    throw DimensionError("build_dft_schedule: config expects N=" +
                         std::to_string(cfg.elements) +
                         ", L=" + std::to_string(cfg.pilot_len));
  if (a_reflect < 0.0 || a_refract < 0.0)
    throw InfeasibilityError("build_dft_schedule: negative amplification");
  const double budget = cfg.amplification_budget();
  const double need = a_reflect * a_reflect + a_refract * a_refract;
  if (need > budget * (1.0 + 1e-9))
    throw InfeasibilityError(
        "build_dft_schedule: a_R^2 + a_T^2 = " + format_double(need) +
        " exceeds beta_max*alpha = " + format_double(budget));
  for (int i = 0; i < n; ++i) {
    if (std::abs(g1(i)) == 0.0)
      throw SingularityError(
          "build_dft_schedule: element response " + std::to_string(i) +
          " is zero; the surface link cannot be inverted");
  }

  BeamSchedule sched;
  sched.scheme = Scheme::DftMfris;
  sched.a_reflect = a_reflect;
  sched.a_refract = a_refract;
  sched.dft_steered = true;
  sched.surface_noise_w = cfg.surface_noise_w;
  sched.phi_reflect.resize(n, pilot_len);
  sched.phi_refract.resize(n, pilot_len);
  // phi_i(n, l) = a_i conj(D(l, n+1)) / g1(n) makes phi_i^H(l) diag(g1^H)
  // land exactly on a_i times row l of the schedule columns.
  for (int l = 0; l < pilot_len; ++l) {
    for (int i = 0; i < n; ++i) {
      const Complex dir = std::conj(basis.full(l, i + 1)) / g1(i);
      sched.phi_reflect(i, l) = a_reflect * dir;
      sched.phi_refract(i, l) = a_refract * dir;
    }
  }
  return sched;
}

BeamSchedule build_baseline_schedule(Scheme scheme, const SystemConfig& cfg,
                                     const CVector& g1,
                                     const DftBasis& basis) {
  const double alpha = cfg.ris_bs_gain();
  switch (scheme) {
    case Scheme::DftMfris:
      throw ConfigError(
          "build_baseline_schedule: dft-mfris amplification comes from the "
          "solver; use build_dft_schedule");
    case Scheme::Star: {
      const double a = std::sqrt(0.5 * alpha);
      BeamSchedule sched = build_dft_schedule(a, a, g1, basis, cfg);
      sched.scheme = Scheme::Star;
      sched.surface_noise_w = 0.0;
      return sched;
    }
    case Scheme::Passive: {
      BeamSchedule sched =
          build_dft_schedule(std::sqrt(alpha), 0.0, g1, basis, cfg);
      sched.scheme = Scheme::Passive;
      sched.surface_noise_w = 0.0;
      return sched;
    }
    case Scheme::Active: {
      BeamSchedule sched = build_dft_schedule(
          std::sqrt(cfg.amplification_budget()), 0.0, g1, basis, cfg);
      sched.scheme = Scheme::Active;
      sched.surface_noise_w = cfg.surface_noise_w;
      return sched;
    }
    case Scheme::OnOffMfris: {
      const int n = cfg.elements;
      const int pilot_len = cfg.pilot_len;
      if (static_cast<int>(g1.size()) != n || basis.elements() != n ||
          basis.pilot_len() != pilot_len)
        throw DimensionError("build_baseline_schedule: dimension mismatch");
      BeamSchedule sched;
      sched.scheme = Scheme::OnOffMfris;
      sched.dft_steered = false;
      sched.a_reflect = 0.0;
      sched.a_refract = 0.0;
      sched.surface_noise_w = cfg.surface_noise_w;
      sched.phi_reflect = CMatrix::Zero(n, pilot_len);
      sched.phi_refract = CMatrix::Zero(n, pilot_len);
      // Slot 0 keeps every element dark; slot l switches element l-1 on with
      // the budget split evenly between the faces.
      const double amp = std::sqrt(cfg.beta_max / 2.0);
      for (int l = 1; l <= n && l < pilot_len; ++l) {
        sched.phi_reflect(l - 1, l) = amp;
        sched.phi_refract(l - 1, l) = amp;
      }
      return sched;
    }
  }
  throw ConfigError("build_baseline_schedule: unknown scheme");
}

FeasibleRange feasible_range_a(double a_other, const SystemConfig& cfg) {
  if (a_other < 0.0)
    throw InfeasibilityError("feasible_range_a: negative amplification");
  const double budget = cfg.amplification_budget();
  const double rem = budget - a_other * a_other;
  if (!(rem > 0.0))
    throw InfeasibilityError(
        "feasible_range_a: other face exhausts the budget (a_other=" +
        format_double(a_other) + ", beta_max*alpha=" + format_double(budget) +
        ")");
  return FeasibleRange{0.0, std::sqrt(rem)};
}

double closed_form_a(Side side, double a_other, const SystemConfig& cfg) {
  const FeasibleRange range = feasible_range_a(a_other, cfg);
  if (!(a_other > 0.0))
    throw DegenerateModeError(
        "closed_form_a: undefined at a_other = 0 (the coupling term divides "
        "by it)");
  const Side other = other_side(side);
  const int own_users = cfg.users_on(side);
  const int other_users = cfg.users_on(other);
  if (own_users == 0 || other_users == 0)
    throw DegenerateModeError(
        "closed_form_a: power ratio undefined with an empty face (" +
        to_string(side) + ": " + std::to_string(own_users) + " users, " +
        to_string(other) + ": " + std::to_string(other_users) + ")");

  double power_own = 0.0, power_other = 0.0;
  for (const auto& u : cfg.users) {
    if (u.side == side)
      power_own += u.power_w;
    else
      power_other += u.power_w;
  }

  const double sigma_s = cfg.surface_noise_w;
  const double sigma = cfg.rx_noise_w;
  if (sigma_s == 0.0) return range.hi;  // stationary point escapes to the cap

  const double n = static_cast<double>(cfg.elements);
  const double m = static_cast<double>(cfg.antennas);
  const double num = n * other_users * a_other * a_other * sigma_s + sigma;
  const double coupling =
      m * other_users + n * own_users / (a_other * a_other);
  const double den = sigma_s * (m + (power_own / power_other) * coupling);
  const double cand = std::pow(num / den, 0.25);
  return std::min(cand, range.hi);
}

namespace {

double solver_objective(double a_reflect, double a_refract,
                        const SystemConfig& cfg) {
  return theoretical_epsilon(a_reflect, a_refract, cfg).total;
}

}  // namespace

AmplificationSolution optimize_amplification(const SystemConfig& cfg,
                                             double tol, int max_iter) {
  const double budget = cfg.amplification_budget();
  const double radius = std::sqrt(budget);
  // Faces never drop to exactly zero, which keeps every expression along the
  // way well defined; a dark face ends up at this floor.  The floor is large
  // enough that budget - floor_a^2 stays strictly below the budget in double
  // precision, so a capped face never exhausts the other face's range.
  const double floor_a = 1e-7 * radius;
  const double ceil_sq = budget - floor_a * floor_a;

  AmplificationSolution sol;
  sol.a_reflect = std::sqrt(budget / 2.0);
  sol.a_refract = std::sqrt(budget / 2.0);
  sol.epsilon = solver_objective(sol.a_reflect, sol.a_refract, cfg);
  sol.trace.push_back({sol.a_reflect, sol.a_refract, sol.epsilon});
  sol.closed_form_divergence = std::numeric_limits<double>::quiet_NaN();

  const double eps0 = sol.epsilon;
  const double delta = tol > 0.0 ? tol : 1e-12 * eps0;

  auto note_divergence = [&sol](double a, double b) {
    const double scale = std::max({std::abs(a), std::abs(b), 1e-300});
    const double gap = std::abs(a - b) / scale;
    if (std::isnan(sol.closed_form_divergence) ||
        gap > sol.closed_form_divergence)
      sol.closed_form_divergence = gap;
  };

  // Redistributes the current total a_R^2 + a_T^2 between the faces.  Pure
  // per-face updates cannot make this move once the budget binds (each
  // coordinate is pinned by its cap), yet the optimum's split between the
  // faces is exactly what an asymmetric population shifts, so the numeric
  // rule needs this third direction to reach the true minimizer.
  auto reallocate = [&]() {
    const double r = std::hypot(sol.a_reflect, sol.a_refract);
    if (!(r > 0.0)) return;
    auto objective = [&](double theta) {
      return solver_objective(r * std::cos(theta), r * std::sin(theta), cfg);
    };
    // Margins keep cos/sin strictly below 1 in double precision so the
    // update never lands exactly on an axis of the budget circle.
    const auto res = golden_section_min<double>(objective, 1e-7,
                                                0.5 * M_PI - 1e-7, 1e-14, 400);
    // Require an improvement beyond rounding noise; anything smaller than
    // the convergence resolution would only jitter the iterate along the
    // flat valley around the optimum.
    if (res.value < sol.epsilon * (1.0 - 4e-12)) {
      sol.a_reflect = r * std::cos(res.x);
      sol.a_refract = r * std::sin(res.x);
      sol.epsilon = res.value;
    }
  };

  auto update_face = [&](Side side) {
    const double a_other =
        side == Side::Reflect ? sol.a_refract : sol.a_reflect;
    double& a_own = side == Side::Reflect ? sol.a_reflect : sol.a_refract;
    const double cap =
        std::sqrt(std::max(std::min(budget - a_other * a_other, ceil_sq),
                           floor_a * floor_a));
    auto objective = [&](double a) {
      return side == Side::Reflect ? solver_objective(a, a_other, cfg)
                                   : solver_objective(a_other, a, cfg);
    };

    auto numeric = golden_section_min<double>(objective, floor_a, cap,
                                              1e-12 * radius, 400);
    double cf_candidate = std::numeric_limits<double>::quiet_NaN();
    try {
      cf_candidate =
          std::clamp(closed_form_a(side, a_other, cfg), floor_a, cap);
    } catch (const DegenerateModeError&) {
      // No closed-form value here; the numeric update carries on.
    } catch (const InfeasibilityError&) {
      // The other face sits on the budget boundary; the clamped numeric
      // update still has a valid (degenerate) range to search.
    }

    double chosen;
    if (cfg.update == UpdateRule::ClosedForm && !std::isnan(cf_candidate)) {
      chosen = cf_candidate;
      note_divergence(objective(cf_candidate), numeric.value);
    } else {
      chosen = numeric.x;
      if (!std::isnan(cf_candidate))
        note_divergence(objective(cf_candidate), numeric.value);
    }

    // Accept only non-increasing moves so the trace is monotone under
    // either update rule.
    const double value = objective(chosen);
    if (value <= sol.epsilon) {
      a_own = chosen;
      sol.epsilon = value;
    }
  };

  double previous = sol.epsilon;
  for (int iter = 1; iter <= max_iter; ++iter) {
    update_face(Side::Reflect);
    update_face(Side::Refract);
    if (cfg.update == UpdateRule::Oracle) reallocate();
    sol.iterations = iter;
    sol.trace.push_back({sol.a_reflect, sol.a_refract, sol.epsilon});
    if (std::abs(sol.epsilon - previous) <= delta) {
      sol.converged = true;
      break;
    }
    previous = sol.epsilon;
  }

  for (const auto& u : cfg.users) {
    if (u.side == Side::Reflect)
      sol.power_reflect += u.power_w;
    else
      sol.power_refract += u.power_w;
  }
  const double m = static_cast<double>(cfg.antennas);
  const double n = static_cast<double>(cfg.elements);
  sol.coupling_reflect = m * cfg.users_on(Side::Refract) +
                         n * cfg.users_on(Side::Reflect) /
                             (sol.a_refract * sol.a_refract);
  sol.coupling_refract = m * cfg.users_on(Side::Reflect) +
                         n * cfg.users_on(Side::Refract) /
                             (sol.a_reflect * sol.a_reflect);
  return sol;
}

OracleOptimum oracle_optimum(const SystemConfig& cfg, int grid_resolution) {
  if (grid_resolution < 2)
    throw ConfigError("oracle_optimum: grid resolution must be >= 2");
  const double budget = cfg.amplification_budget();
  const double radius = std::sqrt(budget);

  OracleOptimum best;
  best.epsilon = std::numeric_limits<double>::infinity();
  auto consider = [&](double a_reflect, double a_refract) {
    if (a_reflect * a_reflect + a_refract * a_refract >
        budget * (1.0 + 1e-12))
      return;
    double value;
    try {
      value = solver_objective(a_reflect, a_refract, cfg);
    } catch (const DegenerateModeError&) {
      return;
    }
    if (value < best.epsilon) {
      best.a_reflect = a_reflect;
      best.a_refract = a_refract;
      best.epsilon = value;
    }
  };

  for (int ir = 0; ir <= grid_resolution; ++ir) {
    const double a_reflect = radius * ir / grid_resolution;
    for (int it = 0; it <= grid_resolution; ++it)
      consider(a_reflect, radius * it / grid_resolution);
  }

  // Polish around the best grid cell.  Alternating over the per-face
  // factors alone stalls whenever the budget binds (the caps pin both
  // coordinates), so the polish also searches the polar directions: the
  // split angle at fixed total power and the total power at fixed split.
  const double lo = 1e-12 * radius;
  auto guarded = [&](double a_reflect, double a_refract) {
    try {
      return solver_objective(a_reflect, a_refract, cfg);
    } catch (const DegenerateModeError&) {
      return std::numeric_limits<double>::infinity();
    }
  };
  for (int round = 0; round < 8; ++round) {
    {
      const double hi =
          std::sqrt(std::max(budget - best.a_refract * best.a_refract,
                             lo * lo));
      auto res = golden_section_min<double>(
          [&](double a) { return guarded(a, best.a_refract); }, lo, hi,
          1e-13 * radius, 400);
      if (res.value < best.epsilon) {
        best.a_reflect = res.x;
        best.epsilon = res.value;
      }
    }
    {
      const double hi =
          std::sqrt(std::max(budget - best.a_reflect * best.a_reflect,
                             lo * lo));
      auto res = golden_section_min<double>(
          [&](double a) { return guarded(best.a_reflect, a); }, lo, hi,
          1e-13 * radius, 400);
      if (res.value < best.epsilon) {
        best.a_refract = res.x;
        best.epsilon = res.value;
      }
    }
    {
      const double r = std::hypot(best.a_reflect, best.a_refract);
      if (r > 0.0) {
        auto res = golden_section_min<double>(
            [&](double theta) {
              return guarded(r * std::cos(theta), r * std::sin(theta));
            },
            1e-9, 0.5 * M_PI - 1e-9, 1e-14, 400);
        if (res.value < best.epsilon) {
          best.a_reflect = r * std::cos(res.x);
          best.a_refract = r * std::sin(res.x);
          best.epsilon = res.value;
        }
      }
    }
    {
      const double theta = std::atan2(best.a_refract, best.a_reflect);
      const double c = std::cos(theta), s = std::sin(theta);
      auto res = golden_section_min<double>(
          [&](double r) { return guarded(r * c, r * s); }, lo, radius,
          1e-13 * radius, 400);
      if (res.value < best.epsilon) {
        best.a_reflect = res.x * c;
        best.a_refract = res.x * s;
        best.epsilon = res.value;
      }
    }
  }
  return best;
}

}  // namespace mfris
