#pragma once

// Problem instance, allocation, metrics and the feasibility checker shared by every scheme.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numbers>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "crsim/channel.hpp"
#include "crsim/errors.hpp"
#include "crsim/interference.hpp"
#include "crsim/matrix.hpp"
#include "crsim/sensing.hpp"

namespace crsim {

/// gamma * P must exceed this for the pair rate to stay in its concave region.
inline constexpr double kConcavityProduct = 1.7183;

struct ProblemInstance {
  std::size_t n = 0;
  GainRatios ratios;
  Matrix<EquivalentLink> links;
  InterferenceFactors factors;
  std::vector<double> rho;
  double interference_limit = 0.0;  // P_I^(th), W
  SensingParams sensing;
  Matrix<double> nu;                // power floors, 0 for pairs that cannot carry rate
  std::vector<double> pu_rx_power;  // P_PU |h^(pr)|^2 per subcarrier, for p_d
  double bandwidth = 1.0;           // rate scale; 1 reports bits/s/Hz

  double gamma(std::size_t i, std::size_t j) const { return links(i, j).gamma; }

  void validate() const {
    auto bad = [](const std::string& what) { throw ValidationError("instance: " + what); };
    if (n == 0) bad("no subcarriers");
    if (ratios.size() != n || ratios.sr.size() != n || ratios.rs.size() != n)
      bad("gain ratio size mismatch");
    if (links.rows() != n || links.cols() != n || nu.rows() != n || nu.cols() != n)
      bad("pair table size mismatch");
    if (factors.eff_s.rows() != n || factors.eff_r.rows() != n || factors.phi_s.rows() != n ||
        factors.phi_r.rows() != n)
      bad("interference factor size mismatch");
    if (rho.size() != n || pu_rx_power.size() != n) bad("per-subcarrier vector size mismatch");
    for (double r : rho)
      if (!(r > 0.0) || !std::isfinite(r)) bad("weights must be positive");
    if (!(interference_limit > 0.0) || !std::isfinite(interference_limit))
      bad("interference limit must be positive");
    if (!(bandwidth > 0.0)) bad("bandwidth must be positive");
    for (double s : pu_rx_power)
      if (!(s >= 0.0) || !std::isfinite(s)) bad("PU received power must be >= 0");
    for (const auto* m : {&factors.eff_s, &factors.eff_r, &factors.phi_s, &factors.phi_r})
      for (double v : m->values())
        if (!(v >= 0.0) || !std::isfinite(v)) bad("interference factors must be finite and >= 0");
    sensing.validate();
  }
};

struct InstanceInputs {
  GainRatios ratios;
  std::vector<double> j_ps;
  std::vector<double> j_pr;
  Matrix<double> phi_s;  // N x L, gains included
  Matrix<double> phi_r;
  std::vector<double> rho;  // empty: uniform weights
  double interference_limit = 1e-3;
  SensingParams sensing;
  std::vector<double> pu_rx_power;
  double bandwidth = 1.0;
};

inline std::vector<double> uniform_weights(std::size_t n) { return std::vector<double>(n, 1.0); }

/// rho_i = 1 + (i - 1)/(N - 1) for 1-based i.
inline std::vector<double> linear_weights(std::size_t n) {
  std::vector<double> w(n, 1.0);
  if (n > 1)
    for (std::size_t i = 0; i < n; ++i) w[i] = 1.0 + static_cast<double>(i) / static_cast<double>(n - 1);
  return w;
}

inline ProblemInstance build_instance(InstanceInputs in) {
  ProblemInstance p;
  p.n = in.ratios.size();
  p.links = link_table(in.ratios);
  auto [eff_s, eff_r] = effective_factors(p.links, in.phi_s, in.phi_r);
  p.factors.j_ps = in.j_ps.empty() ? std::vector<double>(p.n, 0.0) : std::move(in.j_ps);
  p.factors.j_pr = in.j_pr.empty() ? std::vector<double>(p.n, 0.0) : std::move(in.j_pr);
  p.factors.phi_s = std::move(in.phi_s);
  p.factors.phi_r = std::move(in.phi_r);
  p.factors.eff_s = std::move(eff_s);
  p.factors.eff_r = std::move(eff_r);
  p.ratios = std::move(in.ratios);
  p.rho = in.rho.empty() ? uniform_weights(p.n) : std::move(in.rho);
  p.interference_limit = in.interference_limit;
  p.sensing = in.sensing;
  p.pu_rx_power = in.pu_rx_power.empty() ? std::vector<double>(p.n, 0.0) : std::move(in.pu_rx_power);
  p.bandwidth = in.bandwidth;
  p.nu = Matrix<double>(p.n, p.n, 0.0);
  for (std::size_t i = 0; i < p.n; ++i)
    for (std::size_t j = 0; j < p.n; ++j) {
      const double g = p.links(i, j).gamma;
      p.nu(i, j) = g > 0.0 ? kConcavityProduct / g : 0.0;
    }
  p.validate();
  return p;
}

/// Decision variables. power(i, j) is the pair total P_{i,j}; the SU TX and relay shares
/// follow from the link's split fractions.
struct Allocation {
  Matrix<double> power;
  PairingMatrix pairs;
  DetectorThresholds thresholds;
  bool direct_only = false;    // relay unused: gamma^(ss) on the diagonal, no split
  bool floor_enforced = true;  // the gamma P >= 1.7183 floor applies

  std::size_t n() const noexcept { return pairs.rows(); }
};

/// Equivalent gain and split of pair (i, j) as used by this allocation.
inline EquivalentLink pair_link(const Allocation& a, const ProblemInstance& inst, std::size_t i,
                                std::size_t j) {
  if (a.direct_only) return EquivalentLink{LinkMode::Direct, inst.ratios.ss[i], 1.0, 0.0};
  return inst.links(i, j);
}

struct InterferenceUsage {
  double s = 0.0;  // SU TX side
  double r = 0.0;  // relay side
};

inline InterferenceUsage interference_usage(const Allocation& a, const ProblemInstance& inst) {
  InterferenceUsage u;
  const std::size_t n = a.n();
  for (std::size_t i = 0; i < n; ++i) {
    const double ps = a.direct_only ? inst.factors.phi_s_total(i) : 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      const double p = a.power(i, j);
      if (p == 0.0) continue;
      if (a.direct_only) {
        u.s += p * ps;
      } else {
        u.s += p * inst.factors.eff_s(i, j);
        u.r += p * inst.factors.eff_r(i, j);
      }
    }
  }
  return u;
}

struct Metrics {
  double throughput = 0.0;   // rate weighted by sensing success (the optimized objective)
  double sum_rate = 0.0;     // same without the (1 - p_f) factors
  double relay_power = 0.0;  // sum of relay shares, W
};

inline Metrics evaluate_metrics(const Allocation& a, const ProblemInstance& inst) {
  Metrics m;
  const std::size_t n = a.n();
  const auto pf = false_alarm_probs(a.thresholds, inst.sensing);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      const double p = a.power(i, j);
      if (p == 0.0 || !a.pairs(i, j)) continue;
      const auto link = pair_link(a, inst, i, j);
      const double rate = 0.5 * inst.rho[i] * std::log2(1.0 + link.gamma * p) * inst.bandwidth;
      m.sum_rate += rate;
      m.throughput += (1.0 - pf[i]) * (1.0 - pf[j]) * rate;
      m.relay_power += link.split_second * p;
    }
  return m;
}

struct FeasibilityTolerance {
  double interference_rel = 1e-6;
  double probability = 1e-9;
  double floor_abs = 1e-9;
};

struct FeasibilityReport {
  InterferenceUsage usage;
  double max_false_alarm = 0.0;
  double max_miss = 0.0;
  double min_gamma_power = 0.0;  // over active pairs; +inf when none
  bool permutation = false;
  std::vector<std::string> violations;

  bool ok() const noexcept { return violations.empty(); }
};

inline FeasibilityReport check_feasibility(const Allocation& a, const ProblemInstance& inst,
                                           const FeasibilityTolerance& tol = {}) {
  FeasibilityReport rep;
  const std::size_t n = inst.n;
  auto fail = [&](std::string s) { rep.violations.push_back(std::move(s)); };
  if (a.pairs.rows() != n || a.power.rows() != n || a.thresholds.lambda.size() != n) {
    fail("shape: allocation does not match the instance size");
    return rep;
  }
  rep.permutation = is_permutation(a.pairs);
  if (!rep.permutation) fail("pairing: q is not a permutation matrix");

  rep.min_gamma_power = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      const double p = a.power(i, j);
      if (!(p >= 0.0) || !std::isfinite(p)) {
        fail("power: negative or non-finite entry at (" + std::to_string(i) + ", " +
             std::to_string(j) + ")");
        continue;
      }
      if (p > 0.0 && !a.pairs(i, j))
        fail("power: positive power on unpaired entry (" + std::to_string(i) + ", " +
             std::to_string(j) + ")");
      if (p > 0.0) {
        const double gp = pair_link(a, inst, i, j).gamma * p;
        rep.min_gamma_power = std::min(rep.min_gamma_power, gp);
        if (a.floor_enforced && gp < kConcavityProduct - tol.floor_abs)
          fail("floor: gamma*P below 1.7183 at (" + std::to_string(i) + ", " + std::to_string(j) +
               ")");
      }
    }

  rep.usage = interference_usage(a, inst);
  const double cap = inst.interference_limit * (1.0 + tol.interference_rel);
  if (rep.usage.s > cap) fail("interference: SU TX side exceeds the limit");
  if (rep.usage.r > cap) fail("interference: relay side exceeds the limit");

  for (std::size_t i = 0; i < n; ++i) {
    const double lam = a.thresholds.lambda[i];
    if (!(lam >= 0.0)) fail("threshold: negative energy threshold");
    const double pf = false_alarm_prob(lam, inst.sensing);
    const double miss = 1.0 - detection_prob(lam, inst.sensing, inst.pu_rx_power[i]);
    rep.max_false_alarm = std::max(rep.max_false_alarm, pf);
    rep.max_miss = std::max(rep.max_miss, miss);
  }
  if (rep.max_false_alarm > inst.sensing.false_alarm_bound + tol.probability)
    fail("sensing: false-alarm probability above beta");
  if (rep.max_miss > inst.sensing.miss_bound + tol.probability)
    fail("sensing: miss-detection probability above alpha");
  return rep;
}

}  // namespace crsim
