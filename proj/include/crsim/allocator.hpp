#pragma once

// Joint sensing / power / pairing optimizer: dual decomposition with subgradient multiplier
// updates, modified water-filling, Omega-based pairing and greedy permutation repair.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstdio>
#include <limits>
#include <map>
#include <numbers>
#include <numeric>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "crsim/channel.hpp"
#include "crsim/dual_state.hpp"
#include "crsim/errors.hpp"
#include "crsim/matrix.hpp"
#include "crsim/numeric.hpp"
#include "crsim/problem.hpp"
#include "crsim/sensing.hpp"

namespace crsim {

// ---------------------------------------------------------------------------------------
// Per-pair primitives
// ---------------------------------------------------------------------------------------

inline double pair_denominator(std::size_t i, std::size_t j, double eta, double kappa,
                               const ProblemInstance& inst) {
  return eta * inst.factors.eff_s(i, j) + kappa * inst.factors.eff_r(i, j);
}

/// Modified water-filling power of pair (i, j) assuming the pair is selected:
/// max(nu, (rho_i/2)(1 - pf_i)(1 - pf_j) / (eta Phi_s + kappa Phi_r) - 1/gamma).
/// Pairs with gamma = 0 carry nothing.
inline double pair_power(std::size_t i, std::size_t j, double pf_i, double pf_j, double eta,
                         double kappa, const ProblemInstance& inst) {
  const double g = inst.gamma(i, j);
  if (!(g > 0.0)) return 0.0;
  const double den = pair_denominator(i, j, eta, kappa, inst);
  if (!(den > 0.0)) throw UnboundedWaterLevelError(i, j);
  const double water = 0.5 * inst.rho[i] * (1.0 - pf_i) * (1.0 - pf_j) / den;
  return std::max(inst.nu(i, j), water - 1.0 / g);
}

inline double power_update(std::size_t i, std::size_t j, const PairingMatrix& q,
                           const DetectorThresholds& t, const DualState& dual,
                           const ProblemInstance& inst) {
  if (!q(i, j)) return 0.0;
  return pair_power(i, j, false_alarm_prob(t.lambda.at(i), inst.sensing),
                    false_alarm_prob(t.lambda.at(j), inst.sensing), dual.eta, dual.kappa, inst);
}

/// Normalized rate of subcarrier i on its own diagonal pair. Always >= log2(e)/2.
inline double normalized_rate(std::size_t i, double eta, double kappa, const ProblemInstance& inst) {
  const double g = inst.gamma(i, i);
  if (!(g > 0.0)) return 0.5 * std::numbers::log2e;
  const double den = 2.0 * pair_denominator(i, i, eta, kappa, inst);
  if (!(den > 0.0)) throw UnboundedWaterLevelError(i, i);
  // 1 + g * max((e-1)/g, 1/den - 1/g) = max(e, g/den)
  return 0.5 * std::log2(std::max(std::numbers::e, g / den));
}

inline double normalized_rate(std::size_t i, const DualState& dual, const ProblemInstance& inst) {
  return normalized_rate(i, dual.eta, dual.kappa, inst);
}

inline std::vector<double> normalized_rates(double eta, double kappa, const ProblemInstance& inst) {
  std::vector<double> r(inst.n);
  for (std::size_t i = 0; i < inst.n; ++i) r[i] = normalized_rate(i, eta, kappa, inst);
  return r;
}

/// Per-pair Lagrangian contribution in bits. The water-filling power is the stationary point
/// of the natural-log Lagrangian, so the interference penalty is carried in the same units
/// as the rate before converting to bits.
inline double omega_entry(std::size_t i, std::size_t j, double pf_i, double pf_j, double eta,
                          double kappa, double tau_j, const ProblemInstance& inst) {
  const double p = pair_power(i, j, pf_i, pf_j, eta, kappa, inst);
  if (p == 0.0) return -tau_j;
  const double w = 0.5 * inst.rho[i] * (1.0 - pf_i) * (1.0 - pf_j);
  const double gain = w * std::log1p(inst.gamma(i, j) * p);
  const double penalty = pair_denominator(i, j, eta, kappa, inst) * p;
  return (gain - penalty) * std::numbers::log2e - tau_j;
}

inline Matrix<double> omega_matrix(std::span<const double> pf, double eta, double kappa,
                                   std::span<const double> tau, const ProblemInstance& inst) {
  const std::size_t n = inst.n;
  if (pf.size() != n || tau.size() != n) throw ValidationError("omega_matrix: size mismatch");
  Matrix<double> om(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      om(i, j) = omega_entry(i, j, pf[i], pf[j], eta, kappa, tau[j], inst);
  return om;
}

inline Matrix<double> omega_matrix(const DetectorThresholds& t, const DualState& dual,
                                   const ProblemInstance& inst) {
  return omega_matrix(false_alarm_probs(t, inst.sensing), dual.eta, dual.kappa, dual.tau, inst);
}

// ---------------------------------------------------------------------------------------
// Pairing
// ---------------------------------------------------------------------------------------

/// Each SU subcarrier i takes the relay subcarrier j maximizing Omega(i, j); lowest index
/// wins ties. Rows sums are 1; several rows may land on the same column.
inline PairingMatrix assign_pairs(const Matrix<double>& omega) {
  const std::size_t n = omega.rows();
  PairingMatrix q(n, omega.cols(), 0);
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t best = 0;
    for (std::size_t j = 0; j < omega.cols(); ++j) {
      const double v = omega(i, j);
      if (std::isnan(v)) throw ValidationError("assign_pairs: Omega contains NaN");
      if (v > omega(i, best)) best = j;
    }
    q(i, best) = 1;
  }
  return q;
}

inline std::vector<int> column_load(const PairingMatrix& q) {
  std::vector<int> t(q.cols(), 0);
  for (std::size_t i = 0; i < q.rows(); ++i)
    for (std::size_t j = 0; j < q.cols(); ++j) t[j] += q(i, j);
  return t;
}

/// Resolves overloaded columns: the best row (by Omega) stays, every other row moves to the
/// empty column whose tau is closest to the overloaded column's tau, choosing the mover with
/// the largest Omega on that destination.
inline PairingMatrix greedy_repair(PairingMatrix q, const Matrix<double>& omega,
                                   std::span<const double> tau) {
  const std::size_t n = q.rows();
  if (q.cols() != n || omega.rows() != n || omega.cols() != n || tau.size() != n)
    throw ValidationError("greedy_repair: size mismatch");
  for (std::size_t i = 0; i < n; ++i) {
    int s = 0;
    for (std::size_t j = 0; j < n; ++j) s += q(i, j);
    if (s != 1) throw ValidationError("greedy_repair: every row needs exactly one assignment");
  }
  auto t = column_load(q);
  for (std::size_t u = 0; u < n; ++u) {
    if (t[u] <= 1) continue;
    std::size_t b = n;
    for (std::size_t r = 0; r < n; ++r)
      if (q(r, u) && (b == n || omega(r, u) > omega(b, u))) b = r;
    while (t[u] > 1) {
      std::size_t dest = n;
      for (std::size_t j = 0; j < n; ++j)
        if (t[j] == 0 && (dest == n || std::abs(tau[u] - tau[j]) < std::abs(tau[u] - tau[dest])))
          dest = j;
      std::size_t mover = n;
      for (std::size_t r = 0; r < n; ++r)
        if (q(r, u) && r != b && (mover == n || omega(r, dest) > omega(mover, dest))) mover = r;
      q(mover, u) = 0;
      q(mover, dest) = 1;
      --t[u];
      ++t[dest];
    }
  }
  return q;
}

// ---------------------------------------------------------------------------------------
// Multiplier updates
// ---------------------------------------------------------------------------------------

/// Initial step sizes; each decays as 1/sqrt(k). The interference step is relative: the
/// multiplier moves by a fraction of itself proportional to the clipped relative slack.
struct StepSchedule {
  double interference = 0.5;
  double pairing = 0.05;
  double false_alarm = 0.05;
  double miss = 0.05;
};

struct SubgradientInputs {
  InterferenceUsage usage;
  std::vector<int> column_load;  // of the assignment before repair
  std::vector<double> pf;
  std::vector<double> pd;
};

inline DualState subgradient_step(const DualState& d, const SubgradientInputs& in,
                                  const ProblemInstance& inst, const StepSchedule& s,
                                  bool update_sensing = true) {
  const std::size_t n = inst.n;
  if (d.k < 1) throw ValidationError("subgradient_step: iteration index must be >= 1");
  if (in.column_load.size() != n || in.pf.size() != n || in.pd.size() != n || d.tau.size() != n ||
      d.mu.size() != n || d.delta.size() != n)
    throw ValidationError("subgradient_step: size mismatch");
  const double root_k = std::sqrt(static_cast<double>(d.k));
  const double cap = inst.interference_limit;
  auto relative = [&](double m, double used) {
    const double slack = std::clamp((cap - used) / cap, -1.0, 1.0);
    return std::max(0.0, m * (1.0 - s.interference / root_k * slack));
  };
  DualState out = d;
  out.eta = relative(d.eta, in.usage.s);
  out.kappa = relative(d.kappa, in.usage.r);
  for (std::size_t j = 0; j < n; ++j)
    out.tau[j] = d.tau[j] - s.pairing / root_k * (1.0 - in.column_load[j]);
  if (update_sensing) {
    const auto& sp = inst.sensing;
    for (std::size_t i = 0; i < n; ++i) {
      out.mu[i] = std::max(0.0, d.mu[i] - s.false_alarm / root_k * (sp.false_alarm_bound - in.pf[i]));
      out.delta[i] = std::max(0.0, d.delta[i] - s.miss / root_k * (in.pd[i] - 1.0 + sp.miss_bound));
    }
  }
  out.k = d.k + 1;
  return out;
}

/// Convenience form: slacks computed from an allocation (its own q supplies the column load).
inline DualState subgradient_step(const DualState& d, const Allocation& a,
                                  const ProblemInstance& inst, const StepSchedule& s = {}) {
  SubgradientInputs in;
  in.usage = interference_usage(a, inst);
  in.column_load = column_load(a.pairs);
  in.pf = false_alarm_probs(a.thresholds, inst.sensing);
  in.pd = detection_probs(a.thresholds, inst.sensing, inst.pu_rx_power);
  return subgradient_step(d, in, inst, s);
}

/// max over all multipliers of |new - old| / (1 + |old|).
inline double max_relative_change(const DualState& a, const DualState& b) {
  auto rel = [](double x, double y) { return std::abs(y - x) / (1.0 + std::abs(x)); };
  double m = std::max(rel(a.eta, b.eta), rel(a.kappa, b.kappa));
  for (std::size_t i = 0; i < a.tau.size(); ++i)
    m = std::max({m, rel(a.tau[i], b.tau[i]), rel(a.mu[i], b.mu[i]), rel(a.delta[i], b.delta[i])});
  return m;
}

// ---------------------------------------------------------------------------------------
// Exact power for a fixed pairing and fixed thresholds
// ---------------------------------------------------------------------------------------

struct PowerSolution {
  std::vector<double> power;  // P_{i, perm[i]}
  double eta = 0.0;
  double kappa = 0.0;
  double throughput = 0.0;
  InterferenceUsage usage;
  bool feasible = false;
};

namespace detail {

struct PairTerm {
  std::size_t row;
  double a;      // SU TX leakage factor
  double b;      // relay leakage factor
  double c;      // (rho/2)(1 - pf_i)(1 - pf_j)
  double inv_g;  // 1/gamma
  double nu;
};

inline double term_power(const PairTerm& t, double eta, double kappa) {
  const double den = eta * t.a + kappa * t.b;
  if (!(den > 0.0)) return std::numeric_limits<double>::infinity();
  return std::max(t.nu, t.c / den - t.inv_g);
}

inline InterferenceUsage term_usage(const std::vector<PairTerm>& terms, double eta, double kappa) {
  InterferenceUsage u;
  for (const auto& t : terms) {
    const double p = term_power(t, eta, kappa);
    if (t.a > 0.0) u.s += t.a * p;
    if (t.b > 0.0) u.r += t.b * p;
  }
  return u;
}

}  // namespace detail

/// Maximizes the weighted sum rate of a fixed pairing under both interference caps and the
/// per-pair floors. The two multipliers are found by nested monotone bisection: for a fixed
/// kappa the SU-side usage decreases in eta, and along the resulting curve the relay-side usage
/// decreases in kappa (both follow from convexity of the dual function).
inline PowerSolution optimal_power(std::span<const int> perm, std::span<const double> pf,
                                   const ProblemInstance& inst) {
  using detail::PairTerm;
  const std::size_t n = inst.n;
  if (perm.size() != n || pf.size() != n) throw ValidationError("optimal_power: size mismatch");
  PowerSolution sol;
  sol.power.assign(n, 0.0);
  std::vector<PairTerm> terms;
  for (std::size_t i = 0; i < n; ++i) {
    const auto j = static_cast<std::size_t>(perm[i]);
    const double g = inst.gamma(i, j);
    if (!(g > 0.0)) continue;
    PairTerm t{i, inst.factors.eff_s(i, j), inst.factors.eff_r(i, j),
               0.5 * inst.rho[i] * (1.0 - pf[i]) * (1.0 - pf[j]), 1.0 / g, inst.nu(i, j)};
    if (!(t.a > 0.0) && !(t.b > 0.0)) throw UnboundedWaterLevelError(i, j);
    terms.push_back(t);
  }
  const double cap = inst.interference_limit;
  double floor_s = 0.0, floor_r = 0.0, c_sum = 0.0;
  bool all_a = true, all_b = true;
  for (const auto& t : terms) {
    floor_s += t.a * t.nu;
    floor_r += t.b * t.nu;
    c_sum += t.c;
    all_a = all_a && t.a > 0.0;
    all_b = all_b && t.b > 0.0;
  }
  if (terms.empty()) {
    sol.feasible = true;
    return sol;
  }
  if (floor_s > cap || floor_r > cap) return sol;  // floors alone break a cap

  const double x0 = std::max(c_sum / cap, 1e-300);
  const double tol = 1e-13;
  double eta = 0.0, kappa = 0.0;
  bool done = false;

  if (all_a) {  // relay-side cap slack
    eta = bisect_decreasing_positive(
        [&](double e) { return detail::term_usage(terms, e, 0.0).s - cap; }, x0, tol);
    kappa = 0.0;
    done = detail::term_usage(terms, eta, 0.0).r <= cap;
  }
  if (!done && all_b) {  // SU-side cap slack
    kappa = bisect_decreasing_positive(
        [&](double k) { return detail::term_usage(terms, 0.0, k).r - cap; }, x0, tol);
    eta = 0.0;
    done = detail::term_usage(terms, 0.0, kappa).s <= cap;
  }
  if (!done) {  // both caps bind
    auto eta_for = [&](double k) {
      if (detail::term_usage(terms, 0.0, k).s <= cap) return 0.0;
      return bisect_decreasing_positive(
          [&](double e) { return detail::term_usage(terms, e, k).s - cap; }, x0, tol);
    };
    kappa = bisect_decreasing_positive(
        [&](double k) { return detail::term_usage(terms, eta_for(k), k).r - cap; }, x0, tol);
    eta = eta_for(kappa);
  }
  if (!std::isfinite(eta) || !std::isfinite(kappa)) return sol;

  sol.eta = eta;
  sol.kappa = kappa;
  for (const auto& t : terms) {
    const double p = detail::term_power(t, eta, kappa);
    sol.power[t.row] = p;
    sol.usage.s += t.a * p;
    sol.usage.r += t.b * p;
    sol.throughput += t.c * std::log2(1.0 + p / t.inv_g);
  }
  sol.throughput *= inst.bandwidth;
  sol.feasible = std::isfinite(sol.throughput) && sol.usage.s <= cap * (1.0 + 1e-9) &&
                 sol.usage.r <= cap * (1.0 + 1e-9);
  return sol;
}

inline Allocation make_allocation(std::span<const int> perm, const PowerSolution& sol,
                                  const DetectorThresholds& thresholds) {
  const std::size_t n = perm.size();
  Allocation a;
  a.pairs = pairing_from_permutation(perm);
  a.power = Matrix<double>(n, n, 0.0);
  for (std::size_t i = 0; i < n; ++i) a.power(i, static_cast<std::size_t>(perm[i])) = sol.power[i];
  a.thresholds = thresholds;
  return a;
}

// ---------------------------------------------------------------------------------------
// Solver
// ---------------------------------------------------------------------------------------

/// Thresholds at the false-alarm cap on every subcarrier.
inline DetectorThresholds floor_thresholds(const ProblemInstance& inst) {
  return DetectorThresholds{std::vector<double>(inst.n, false_alarm_floor(inst.sensing))};
}

/// Thresholds giving false-alarm probability pf on every subcarrier.
inline DetectorThresholds fixed_false_alarm_thresholds(const ProblemInstance& inst, double pf) {
  return DetectorThresholds{std::vector<double>(inst.n, threshold_for_false_alarm(pf, inst.sensing))};
}

/// Clamps each threshold into [false-alarm floor, miss-detection ceiling].
inline DetectorThresholds project_thresholds(DetectorThresholds t, const ProblemInstance& inst) {
  const double floor = false_alarm_floor(inst.sensing);
  for (std::size_t i = 0; i < t.lambda.size(); ++i) {
    const double ceil =
        std::nextafter(miss_detection_ceiling(inst.sensing, inst.pu_rx_power[i]), 0.0);
    t.lambda[i] = std::clamp(t.lambda[i], floor, std::max(floor, ceil));
  }
  return t;
}

struct SolverConfig {
  double epsilon = 1e-5;
  int max_iters = 5000;
  StepSchedule steps;
  double tau_init_lo = 0.01, tau_init_hi = 2.0;
  double delta_init_lo = 0.01, delta_init_hi = 2.0;
  double eta_init_lo = 100.0, eta_init_hi = 200.0;  // kappa drawn from the same range
  std::uint64_t seed = 1;
  bool update_thresholds = true;
  std::optional<DetectorThresholds> thresholds;  // held fixed when update_thresholds is false
  bool fixed_pairing = false;                    // identity pairing throughout
  std::size_t max_candidates = 8;                // pairings re-solved exactly at the end
  bool record_trace = false;

  void validate() const {
    if (!(epsilon > 0.0)) throw ValidationError("solver: epsilon must be > 0");
    if (max_iters < 1) throw ValidationError("solver: max_iters must be >= 1");
    if (!(eta_init_lo > 0.0 && eta_init_hi >= eta_init_lo))
      throw ValidationError("solver: eta init range must be positive");
    if (!(tau_init_hi >= tau_init_lo) || !(delta_init_lo >= 0.0 && delta_init_hi >= delta_init_lo))
      throw ValidationError("solver: invalid init range");
  }
};

struct TraceRow {
  int k = 0;
  double eta = 0.0;
  double kappa = 0.0;
  double tau_mean = 0.0;
  double delta_mean = 0.0;
  double usage_s = 0.0;
  double usage_r = 0.0;
  double throughput = 0.0;
  double lagrangian = 0.0;
  int conflicts = 0;  // overloaded-column surplus before repair
};

struct Diagnostics {
  int iterations = 0;
  bool converged = false;
  bool warning = false;   // stopped at max_iters
  bool fallback = false;  // scheme-specific fallback path taken
  double eta = 0.0;       // multipliers certifying the returned power
  double kappa = 0.0;
  InterferenceUsage usage;
  double slack_s = 0.0;  // (P_I - used) / P_I
  double slack_r = 0.0;
  double kkt_s = 0.0;    // eta |P_I - used| / ((eta + kappa) P_I)
  double kkt_r = 0.0;
  std::size_t candidates = 0;
  std::vector<TraceRow> trace;
};

struct SolveResult {
  Allocation allocation;
  Metrics metrics;
  Diagnostics diagnostics;
  DualState dual;
};

inline constexpr std::uint64_t kSolverInitStream = 0x11;

inline DualState initial_dual(std::size_t n, const SolverConfig& cfg) {
  RandomStream rng(cfg.seed, 0, kSolverInitStream);
  DualState d;
  d.eta = rng.uniform(cfg.eta_init_lo, cfg.eta_init_hi);
  d.kappa = rng.uniform(cfg.eta_init_lo, cfg.eta_init_hi);
  d.tau.resize(n);
  d.delta.resize(n);
  for (auto& t : d.tau) t = rng.uniform(cfg.tau_init_lo, cfg.tau_init_hi);
  for (auto& x : d.delta) x = rng.uniform(cfg.delta_init_lo, cfg.delta_init_hi);
  d.mu.assign(n, 0.0);
  d.k = 1;
  return d;
}

inline void fill_certificate(Diagnostics& diag, const PowerSolution& sol, const ProblemInstance& inst) {
  const double cap = inst.interference_limit;
  diag.eta = sol.eta;
  diag.kappa = sol.kappa;
  diag.usage = sol.usage;
  diag.slack_s = (cap - sol.usage.s) / cap;
  diag.slack_r = (cap - sol.usage.r) / cap;
  const double total = sol.eta + sol.kappa;
  diag.kkt_s = total > 0.0 ? sol.eta * std::abs(diag.slack_s) / total : 0.0;
  diag.kkt_r = total > 0.0 ? sol.kappa * std::abs(diag.slack_r) / total : 0.0;
}

/// Re-solves power exactly for each candidate pairing and keeps the best feasible one.
/// Returns false when none is feasible.
inline bool pick_best_pairing(const std::vector<std::vector<int>>& candidates,
                              const DetectorThresholds& thresholds, const ProblemInstance& inst,
                              SolveResult& out) {
  const auto pf = false_alarm_probs(thresholds, inst.sensing);
  bool found = false;
  PowerSolution best;
  std::vector<int> best_perm;
  for (const auto& perm : candidates) {
    auto sol = optimal_power(perm, pf, inst);
    if (!sol.feasible) continue;
    if (!found || sol.throughput > best.throughput) {
      best = std::move(sol);
      best_perm = perm;
      found = true;
    }
  }
  if (!found) return false;
  out.allocation = make_allocation(best_perm, best, thresholds);
  out.metrics = evaluate_metrics(out.allocation, inst);
  fill_certificate(out.diagnostics, best, inst);
  out.diagnostics.candidates = candidates.size();
  return true;
}

/// One sweep of the thresholds -> Omega -> pairing -> power steps for the given multipliers.
struct IterateState {
  DetectorThresholds thresholds;
  std::vector<double> pf, pd;
  Matrix<double> omega;
  PairingMatrix assigned;  // before repair
  PairingMatrix pairs;     // after repair
  std::vector<int> perm;
  std::vector<double> power;  // per row on its pair
  InterferenceUsage usage;
};

inline IterateState primal_step(const DualState& d, const ProblemInstance& inst,
                                const SolverConfig& cfg,
                                const DetectorThresholds* held_thresholds) {
  const std::size_t n = inst.n;
  IterateState s;
  if (held_thresholds) {
    s.thresholds = *held_thresholds;
  } else {
    const auto rt = normalized_rates(d.eta, d.kappa, inst);
    s.thresholds = update_thresholds(rt, d.delta, inst.pu_rx_power, inst.sensing);
  }
  s.pf = false_alarm_probs(s.thresholds, inst.sensing);
  s.pd = detection_probs(s.thresholds, inst.sensing, inst.pu_rx_power);
  if (cfg.fixed_pairing) {
    s.assigned = identity_pairing(n);
    s.pairs = s.assigned;
  } else {
    s.omega = omega_matrix(s.pf, d.eta, d.kappa, d.tau, inst);
    s.assigned = assign_pairs(s.omega);
    s.pairs = greedy_repair(s.assigned, s.omega, d.tau);
  }
  s.perm = partners(s.pairs);
  s.power.assign(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    const auto j = static_cast<std::size_t>(s.perm[i]);
    const double p = pair_power(i, j, s.pf[i], s.pf[j], d.eta, d.kappa, inst);
    s.power[i] = p;
    s.usage.s += p * inst.factors.eff_s(i, j);
    s.usage.r += p * inst.factors.eff_r(i, j);
  }
  return s;
}

inline TraceRow trace_row(const DualState& d, const IterateState& s, const ProblemInstance& inst) {
  TraceRow row;
  const std::size_t n = inst.n;
  row.k = d.k;
  row.eta = d.eta;
  row.kappa = d.kappa;
  row.tau_mean = std::accumulate(d.tau.begin(), d.tau.end(), 0.0) / static_cast<double>(n);
  row.delta_mean = std::accumulate(d.delta.begin(), d.delta.end(), 0.0) / static_cast<double>(n);
  row.usage_s = s.usage.s;
  row.usage_r = s.usage.r;
  for (std::size_t i = 0; i < n; ++i) {
    const auto j = static_cast<std::size_t>(s.perm[i]);
    if (s.power[i] > 0.0)
      row.throughput += 0.5 * inst.rho[i] * (1.0 - s.pf[i]) * (1.0 - s.pf[j]) *
                        std::log2(1.0 + inst.gamma(i, j) * s.power[i]) * inst.bandwidth;
  }
  const auto load = column_load(s.assigned);
  // Lagrangian at the unrepaired maximizer (the dual function value up to threshold terms)
  double lag = 0.0;
  const double cap = inst.interference_limit;
  if (!s.omega.empty()) {
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j)
        if (s.assigned(i, j)) lag += s.omega(i, j);
  }
  lag += (d.eta + d.kappa) * cap * std::numbers::log2e;
  for (std::size_t j = 0; j < n; ++j) {
    lag += d.tau[j];
    row.conflicts += std::max(0, load[j] - 1);
  }
  for (std::size_t i = 0; i < n; ++i)
    lag += d.mu[i] * (inst.sensing.false_alarm_bound - s.pf[i]) +
           d.delta[i] * (s.pd[i] - 1.0 + inst.sensing.miss_bound);
  row.lagrangian = lag;
  return row;
}

/// Joint sensing-threshold, pairing and power optimization.
///
/// Runs the multiplier iteration until every multiplier's relative change falls below
/// epsilon (or max_iters). The pairings it visits are then re-solved exactly for power at the
/// final thresholds (with identity always among them) and the best feasible one is returned,
/// so the output meets every constraint even when the multipliers have not settled.
inline SolveResult solve_joint(const ProblemInstance& inst, const SolverConfig& cfg = {}) {
  inst.validate();
  cfg.validate();
  const std::size_t n = inst.n;
  for (std::size_t i = 0; i < n; ++i)
    if (!sensing_feasible(inst.sensing, inst.pu_rx_power[i]))
      throw InfeasibleInstanceError("no threshold meets both sensing caps on subcarrier " +
                                    std::to_string(i));
  std::optional<DetectorThresholds> held;
  if (!cfg.update_thresholds) {
    held = cfg.thresholds ? *cfg.thresholds : floor_thresholds(inst);
    if (held->lambda.size() != n) throw ValidationError("solver: fixed thresholds size mismatch");
  }

  SolveResult out;
  DualState d = initial_dual(n, cfg);
  struct Seen {
    int count = 0;
    int last = 0;
  };
  std::map<std::vector<int>, Seen> seen;
  int k_done = 0;
  for (int it = 1; it <= cfg.max_iters; ++it) {
    const auto s = primal_step(d, inst, cfg, held ? &*held : nullptr);
    auto& rec = seen[s.perm];
    ++rec.count;
    rec.last = it;
    if (cfg.record_trace) out.diagnostics.trace.push_back(trace_row(d, s, inst));
    SubgradientInputs in{s.usage, column_load(s.assigned), s.pf, s.pd};
    DualState next = subgradient_step(d, in, inst, cfg.steps, cfg.update_thresholds);
    const double change = max_relative_change(d, next);
    d = std::move(next);
    k_done = it;
    if (change < cfg.epsilon) {
      out.diagnostics.converged = true;
      break;
    }
  }
  out.diagnostics.iterations = k_done;
  out.diagnostics.warning = !out.diagnostics.converged;

  DetectorThresholds final_t;
  if (held) {
    final_t = *held;
  } else {
    const auto rt = normalized_rates(d.eta, d.kappa, inst);
    final_t = project_thresholds(update_thresholds(rt, d.delta, inst.pu_rx_power, inst.sensing), inst);
  }

  // most recent and most visited pairings first
  std::vector<std::pair<std::vector<int>, Seen>> ranked(seen.begin(), seen.end());
  std::sort(ranked.begin(), ranked.end(), [](const auto& x, const auto& y) {
    if (x.second.count != y.second.count) return x.second.count > y.second.count;
    return x.second.last > y.second.last;
  });
  std::vector<std::vector<int>> candidates;
  std::vector<int> ident(n);
  std::iota(ident.begin(), ident.end(), 0);
  auto add = [&](const std::vector<int>& p) {
    if (std::find(candidates.begin(), candidates.end(), p) == candidates.end()) candidates.push_back(p);
  };
  auto latest = std::max_element(ranked.begin(), ranked.end(), [](const auto& x, const auto& y) {
    return x.second.last < y.second.last;
  });
  if (latest != ranked.end()) add(latest->first);
  for (const auto& r : ranked) {
    if (candidates.size() >= cfg.max_candidates) break;
    add(r.first);
  }
  add(ident);

  if (!pick_best_pairing(candidates, final_t, inst, out))
    throw InfeasibleInstanceError("no visited pairing meets the interference caps at its power floors");
  out.dual = d;
  return out;
}

/// Best pairing over all n! permutations, each with exact optimal power (n <= 9).
inline SolveResult exhaustive_search(const ProblemInstance& inst, const DetectorThresholds& thresholds) {
  inst.validate();
  const std::size_t n = inst.n;
  if (n > 9) throw ValidationError("exhaustive_search: n must be <= 9");
  if (thresholds.lambda.size() != n) throw ValidationError("exhaustive_search: size mismatch");
  std::vector<std::vector<int>> all;
  std::vector<int> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  do all.push_back(perm);
  while (std::next_permutation(perm.begin(), perm.end()));
  SolveResult out;
  if (!pick_best_pairing(all, thresholds, inst, out))
    throw InfeasibleInstanceError("exhaustive search: no pairing is feasible");
  out.diagnostics.converged = true;
  return out;
}

inline void write_trace_csv(std::ostream& os, const std::vector<TraceRow>& trace) {
  os << "k,eta,kappa,tau_mean,delta_mean,usage_s,usage_r,throughput,lagrangian,conflicts\n";
  char buf[512];
  for (const auto& r : trace) {
    std::snprintf(buf, sizeof buf, "%d,%.10g,%.10g,%.10g,%.10g,%.10g,%.10g,%.10g,%.10g,%d\n", r.k,
                  r.eta, r.kappa, r.tau_mean, r.delta_mean, r.usage_s, r.usage_r, r.throughput,
                  r.lagrangian, r.conflicts);
    os << buf;
  }
}

}  // namespace crsim
