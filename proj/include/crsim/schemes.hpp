#pragma once

// Comparison schemes: one-shot Alternate, fixed pairing, initial-sensing-only and
// direct-link water-filling.

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "crsim/allocator.hpp"
#include "crsim/errors.hpp"
#include "crsim/numeric.hpp"
#include "crsim/problem.hpp"

namespace crsim {

enum class SchemeId { Proposed, Alternate, FixedSCP, ISS, WCR };

inline constexpr std::array<SchemeId, 5> kAllSchemes{SchemeId::Proposed, SchemeId::Alternate,
                                                     SchemeId::FixedSCP, SchemeId::ISS,
                                                     SchemeId::WCR};

/// False-alarm level at which the ISS and WCR baselines hold their thresholds.
inline constexpr double kBaselineFalseAlarm = 0.2;

inline std::string_view scheme_name(SchemeId id) {
  switch (id) {
    case SchemeId::Proposed: return "Proposed";
    case SchemeId::Alternate: return "Alternate";
    case SchemeId::FixedSCP: return "FixedSCP";
    case SchemeId::ISS: return "ISS";
    case SchemeId::WCR: return "WCR";
  }
  return "?";
}

inline std::optional<SchemeId> parse_scheme(std::string_view s) {
  std::string key;
  for (char c : s)
    if (c != '-' && c != '_') key.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
  for (auto id : kAllSchemes) {
    std::string name;
    for (char c : scheme_name(id)) name.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
    if (key == name) return id;
  }
  return std::nullopt;
}

inline void require_sensing_feasible(const ProblemInstance& inst) {
  for (std::size_t i = 0; i < inst.n; ++i)
    if (!sensing_feasible(inst.sensing, inst.pu_rx_power[i]))
      throw InfeasibleInstanceError("no threshold meets both sensing caps on subcarrier " +
                                    std::to_string(i));
}

// ---------------------------------------------------------------------------------------
// Alternate
// ---------------------------------------------------------------------------------------

struct RelaxedMultipliers {
  double eta = 0.0;
  double kappa = 0.0;
  bool fallback = false;  // system had no positive solution; eta = kappa from one equation
};

/// Multipliers meeting both interference caps with equality when every pair with gamma > 0
/// takes an equal share of its row (q_ij = 1/#pairs in row i), zero false alarm, and the
/// unclamped water-filling power.
inline RelaxedMultipliers solve_relaxed_multipliers(const ProblemInstance& inst) {
  struct Term {
    double q, a, b, c, inv_g;
  };
  std::vector<Term> terms;
  const std::size_t n = inst.n;
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t count = 0;
    for (std::size_t j = 0; j < n; ++j) count += inst.gamma(i, j) > 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      const double g = inst.gamma(i, j);
      if (!(g > 0.0)) continue;
      terms.push_back({1.0 / static_cast<double>(count), inst.factors.eff_s(i, j),
                       inst.factors.eff_r(i, j), 0.5 * inst.rho[i], 1.0 / g});
    }
  }
  if (terms.empty()) throw InfeasibleInstanceError("alternate: no pair has a positive gain");
  const double cap = inst.interference_limit;
  auto usage = [&](double eta, double kappa, bool relay_side) {
    double u = 0.0;
    for (const auto& t : terms) {
      const double f = relay_side ? t.b : t.a;
      if (!(f > 0.0)) continue;
      const double den = eta * t.a + kappa * t.b;
      if (!(den > 0.0)) return std::numeric_limits<double>::infinity();
      u += t.q * (t.c / den - t.inv_g) * f;
    }
    return u;
  };
  double sum_a = 0.0, sum_b = 0.0, c_sum = 0.0;
  for (const auto& t : terms) {
    sum_a += t.q * t.a;
    sum_b += t.q * t.b;
    c_sum += t.q * t.c;
  }
  const double x0 = std::max(c_sum / cap, 1e-300);
  const double tol = 1e-13;
  auto single = [&](bool relay_side) {
    RelaxedMultipliers r;
    r.fallback = true;
    r.eta = r.kappa =
        bisect_decreasing_positive([&](double x) { return usage(x, x, relay_side) - cap; }, x0, tol);
    return r;
  };
  if (!(sum_a > 0.0) && !(sum_b > 0.0))
    throw UnboundedWaterLevelError(0, 0);
  if (!(sum_b > 0.0)) return single(false);
  if (!(sum_a > 0.0)) return single(true);

  auto eta_for = [&](double kappa) {
    if (usage(0.0, kappa, false) <= cap) return 0.0;
    return bisect_decreasing_positive([&](double e) { return usage(e, kappa, false) - cap; }, x0, tol);
  };
  auto excess_r = [&](double kappa) { return usage(eta_for(kappa), kappa, true) - cap; };
  RelaxedMultipliers r;
  r.kappa = bisect_decreasing_positive(excess_r, x0, tol);
  r.eta = eta_for(r.kappa);
  const bool interior = r.eta > 0.0 && r.kappa > 0.0 && std::isfinite(r.eta) && std::isfinite(r.kappa);
  if (!interior) return single(false);
  return r;
}

/// Multipliers from the relaxed system, one pass of thresholds/Omega/pairing/power, one
/// multiplier update, thresholds recomputed from the updated multipliers. Power for the
/// resulting pairing is then solved exactly so that the caps hold.
inline SolveResult solve_alternate(const ProblemInstance& inst, const SolverConfig& cfg = {}) {
  inst.validate();
  cfg.validate();
  require_sensing_feasible(inst);
  const auto rm = solve_relaxed_multipliers(inst);
  DualState d = initial_dual(inst.n, cfg);
  d.eta = rm.eta;
  d.kappa = rm.kappa;
  SolverConfig pass_cfg = cfg;
  pass_cfg.fixed_pairing = false;
  const auto s = primal_step(d, inst, pass_cfg, nullptr);
  SubgradientInputs in{s.usage, column_load(s.assigned), s.pf, s.pd};
  const DualState next = subgradient_step(d, in, inst, cfg.steps);
  const auto rt = normalized_rates(next.eta, next.kappa, inst);
  const auto thresholds =
      project_thresholds(update_thresholds(rt, next.delta, inst.pu_rx_power, inst.sensing), inst);
  SolveResult out;
  if (!pick_best_pairing({s.perm}, thresholds, inst, out))
    throw InfeasibleInstanceError("alternate: pairing infeasible at its power floors");
  out.diagnostics.iterations = 1;
  out.diagnostics.fallback = rm.fallback;
  out.dual = next;
  return out;
}

// ---------------------------------------------------------------------------------------
// Fixed pairing and initial-sensing-only
// ---------------------------------------------------------------------------------------

/// Identity pairing (the SU subcarrier is reused by the relay); thresholds and power from the
/// same multiplier iteration as solve_joint.
inline SolveResult solve_fixed_scp(const ProblemInstance& inst, SolverConfig cfg = {}) {
  cfg.fixed_pairing = true;
  return solve_joint(inst, cfg);
}

/// Thresholds frozen at the given false-alarm level; pairing and power optimized jointly.
inline SolveResult solve_iss(const ProblemInstance& inst, SolverConfig cfg = {},
                             double false_alarm = kBaselineFalseAlarm) {
  cfg.update_thresholds = false;
  cfg.thresholds = fixed_false_alarm_thresholds(inst, false_alarm);
  return solve_joint(inst, cfg);
}

// ---------------------------------------------------------------------------------------
// Direct-link water-filling
// ---------------------------------------------------------------------------------------

struct WaterFilling {
  std::vector<double> power;
  double level = 0.0;  // 1 / varpi
};

/// P_i = max(0, level - 1/gamma_i) with sum_i P_i leak_i = budget, level found by bisection.
inline WaterFilling water_fill(std::span<const double> gamma, std::span<const double> leak,
                               double budget) {
  const std::size_t n = gamma.size();
  if (leak.size() != n) throw ValidationError("water_fill: size mismatch");
  if (!(budget > 0.0)) throw ValidationError("water_fill: budget must be > 0");
  WaterFilling wf;
  wf.power.assign(n, 0.0);
  double leak_sum = 0.0, offset = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    if (!(gamma[i] > 0.0)) continue;
    if (!(leak[i] > 0.0)) throw UnboundedWaterLevelError(i, i);
    leak_sum += leak[i];
    offset += leak[i] / gamma[i];
  }
  if (leak_sum == 0.0) return wf;  // nothing can transmit
  auto used = [&](double level) {
    double u = 0.0;
    for (std::size_t i = 0; i < n; ++i)
      if (gamma[i] > 0.0) u += std::max(0.0, level - 1.0 / gamma[i]) * leak[i];
    return u;
  };
  double lo = 0.0, hi = (budget + offset) / leak_sum;  // used(hi) >= budget
  for (int it = 0; it < 300 && hi - lo > 1e-16 * hi; ++it) {
    const double mid = 0.5 * (lo + hi);
    (used(mid) > budget ? hi : lo) = mid;
  }
  wf.level = lo;
  for (std::size_t i = 0; i < n; ++i)
    if (gamma[i] > 0.0) wf.power[i] = std::max(0.0, lo - 1.0 / gamma[i]);
  return wf;
}

inline SolveResult solve_wcr(const ProblemInstance& inst, double false_alarm = kBaselineFalseAlarm) {
  inst.validate();
  require_sensing_feasible(inst);
  const std::size_t n = inst.n;
  std::vector<double> leak(n);
  for (std::size_t i = 0; i < n; ++i) leak[i] = inst.factors.phi_s_total(i);
  const auto wf = water_fill(inst.ratios.ss, leak, inst.interference_limit);
  SolveResult out;
  auto& a = out.allocation;
  a.direct_only = true;
  a.floor_enforced = false;
  a.pairs = identity_pairing(n);
  a.power = Matrix<double>(n, n, 0.0);
  for (std::size_t i = 0; i < n; ++i) a.power(i, i) = wf.power[i];
  a.thresholds = fixed_false_alarm_thresholds(inst, false_alarm);
  out.metrics = evaluate_metrics(a, inst);
  const auto u = interference_usage(a, inst);
  out.diagnostics.usage = u;
  out.diagnostics.slack_s = (inst.interference_limit - u.s) / inst.interference_limit;
  out.diagnostics.slack_r = 1.0;
  out.diagnostics.eta = wf.level > 0.0 ? 1.0 / wf.level : 0.0;
  out.diagnostics.converged = true;
  return out;
}

// ---------------------------------------------------------------------------------------

inline SolveResult solve_scheme(SchemeId id, const ProblemInstance& inst, const SolverConfig& cfg = {}) {
  switch (id) {
    case SchemeId::Proposed: return solve_joint(inst, cfg);
    case SchemeId::Alternate: return solve_alternate(inst, cfg);
    case SchemeId::FixedSCP: return solve_fixed_scp(inst, cfg);
    case SchemeId::ISS: return solve_iss(inst, cfg);
    case SchemeId::WCR: return solve_wcr(inst);
  }
  throw ValidationError("unknown scheme");
}

/// Whether the scheme chooses its own thresholds (and is therefore held to the sensing caps).
inline bool scheme_optimizes_sensing(SchemeId id) {
  return id == SchemeId::Proposed || id == SchemeId::Alternate || id == SchemeId::FixedSCP;
}

}  // namespace crsim
