#include <gtest/gtest.h>

#include <cmath>
#include <numeric>
#include <random>

#include "crsim/schemes.hpp"
#include "fixtures.hpp"
#include "oracles.hpp"

using namespace crsim;
using fixture::make_instance;
using fixture::random_instance;

namespace {

std::vector<oracle::RelaxedTerm> relaxed_terms(const ProblemInstance& inst) {
  std::vector<oracle::RelaxedTerm> t;
  for (std::size_t i = 0; i < inst.n; ++i) {
    double count = 0;
    for (std::size_t j = 0; j < inst.n; ++j) count += inst.gamma(i, j) > 0.0;
    for (std::size_t j = 0; j < inst.n; ++j)
      if (inst.gamma(i, j) > 0.0)
        t.push_back({1.0 / count, inst.factors.eff_s(i, j), inst.factors.eff_r(i, j),
                     0.5 * inst.rho[i], inst.gamma(i, j)});
  }
  return t;
}

double relaxed_usage(const std::vector<oracle::RelaxedTerm>& terms, double eta, double kappa,
                     bool relay_side) {
  double u = 0.0;
  for (const auto& t : terms) u += t.q * (relay_side ? t.b : t.a) * (t.c / (eta * t.a + kappa * t.b) - 1.0 / t.g);
  return u;
}

}  // namespace

TEST(RelaxedMultipliers, MatchNewtonOnRandomInstances) {
  int interior = 0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto inst = random_instance(4, 600 + seed);
    const auto rm = solve_relaxed_multipliers(inst);
    const auto terms = relaxed_terms(inst);
    const double cap = inst.interference_limit;
    // both caps hold with equality (the fallback only guarantees the binding one)
    const double us = relaxed_usage(terms, rm.eta, rm.kappa, false);
    const double ur = relaxed_usage(terms, rm.eta, rm.kappa, true);
    EXPECT_LE(std::min(std::abs(us - cap), std::abs(ur - cap)), 1e-9 * cap);
    if (rm.fallback) continue;
    ++interior;
    EXPECT_NEAR(us, cap, 1e-9 * cap);
    EXPECT_NEAR(ur, cap, 1e-9 * cap);
    const auto [eta, kappa] = oracle::relaxed_newton(terms, cap, 2 * rm.eta, 0.5 * rm.kappa);
    EXPECT_NEAR(rm.eta, eta, 1e-8 * eta) << seed;
    EXPECT_NEAR(rm.kappa, kappa, 1e-8 * kappa) << seed;
  }
  EXPECT_GT(interior, 0);
}

TEST(RelaxedMultipliers, FallbackWithoutRelayLeakage) {
  // every pair is direct: no relay-side equation, so eta = kappa from the SU side
  const auto inst = make_instance(GainRatios{{5.0, 6.0}, {1.0, 1.0}, {1.0, 1.0}}, {0.1, 0.2},
                                  {0.1, 0.2}, 1.0);
  const auto rm = solve_relaxed_multipliers(inst);
  EXPECT_TRUE(rm.fallback);
  EXPECT_DOUBLE_EQ(rm.eta, rm.kappa);
  const auto terms = relaxed_terms(inst);
  EXPECT_NEAR(relaxed_usage(terms, rm.eta, rm.kappa, false), 1.0, 1e-9);
}

TEST(Alternate, FeasibleAndNoBetterThanJointOnAverage) {
  double alt = 0.0, joint = 0.0;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto inst = random_instance(5, 700 + seed);
    const auto a = solve_alternate(inst);
    const auto rep = check_feasibility(a.allocation, inst);
    EXPECT_TRUE(rep.ok()) << (rep.ok() ? "" : rep.violations.front());
    EXPECT_EQ(a.diagnostics.iterations, 1);
    alt += a.metrics.throughput;
    joint += solve_joint(inst).metrics.throughput;
  }
  EXPECT_LE(alt, joint);
}

TEST(FixedScp, IdentityPairingWithExactPower) {
  const auto inst = random_instance(5, 31);
  SolverConfig cfg;
  cfg.update_thresholds = false;
  cfg.thresholds = floor_thresholds(inst);
  const auto res = solve_fixed_scp(inst, cfg);
  EXPECT_EQ(res.allocation.pairs, identity_pairing(5));
  std::vector<int> ident(5);
  std::iota(ident.begin(), ident.end(), 0);
  const auto pf = false_alarm_probs(*cfg.thresholds, inst.sensing);
  const auto ref = oracle::dual_oracle(oracle::pair_data(inst, ident, pf), inst.interference_limit);
  EXPECT_NEAR(res.metrics.throughput, ref.throughput, 1e-6 * ref.throughput);
  EXPECT_LE(res.metrics.throughput, solve_joint(inst, cfg).metrics.throughput * (1 + 1e-12));
}

TEST(FixedScp, SymmetricSubcarriersShareEvenly) {
  const auto inst = make_instance(GainRatios{{3.0, 3.0, 3.0}, {8.0, 8.0, 8.0}, {8.0, 8.0, 8.0}},
                                  {0.1, 0.1, 0.1}, {0.1, 0.1, 0.1}, 2.0);
  const auto res = solve_fixed_scp(inst);
  for (std::size_t i = 1; i < 3; ++i)
    EXPECT_NEAR(res.allocation.power(i, i), res.allocation.power(0, 0), 1e-9 * res.allocation.power(0, 0));
}

TEST(Iss, ThresholdsHeldAtBaselineFalseAlarm) {
  const auto inst = random_instance(4, 12);
  const auto res = solve_iss(inst);
  for (double l : res.allocation.thresholds.lambda)
    EXPECT_NEAR(false_alarm_prob(l, inst.sensing), kBaselineFalseAlarm, 1e-12);
  EXPECT_TRUE(is_permutation(res.allocation.pairs));
  // the rate loss is exactly the (1 - 0.2)^2 sensing factor
  EXPECT_NEAR(res.metrics.throughput, 0.64 * res.metrics.sum_rate, 1e-12 * res.metrics.sum_rate);
}

TEST(WaterFill, HandExample) {
  const std::vector<double> g{1.0 / 0.55, 20.0}, w{1.0, 1.0};
  const auto wf = water_fill(g, w, 1.0);
  EXPECT_NEAR(wf.level, 0.8, 1e-12);
  EXPECT_NEAR(wf.power[0], 0.25, 1e-12);
  EXPECT_NEAR(wf.power[1], 0.75, 1e-12);
}

TEST(WaterFill, MatchesActiveSetOracle) {
  std::mt19937_64 rng(13);
  std::exponential_distribution<double> e(1.0);
  for (int t = 0; t < 100; ++t) {
    const std::size_t n = 1 + t % 12;
    std::vector<double> g(n), w(n);
    for (std::size_t i = 0; i < n; ++i) {
      g[i] = 10 * e(rng);
      w[i] = 0.1 + e(rng);
    }
    const double budget = 0.05 + 3 * e(rng);
    const auto wf = water_fill(g, w, budget);
    const auto [p, level] = oracle::water_fill_sorted(g, w, budget);
    EXPECT_NEAR(wf.level, level, 1e-12 * level);
    double used = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      EXPECT_NEAR(wf.power[i], p[i], 1e-12 * level);
      used += wf.power[i] * w[i];
    }
    EXPECT_NEAR(used, budget, 1e-10 * budget);
  }
}

TEST(WaterFill, LimitsAndEdgeCases) {
  const std::vector<double> g{1.0, 4.0, 4.0}, w{1.0, 1.0, 1.0};
  // a vanishing budget goes to the strongest subcarriers only
  const auto tiny = water_fill(g, w, 1e-9);
  EXPECT_EQ(tiny.power[0], 0.0);
  EXPECT_NEAR(tiny.power[1], 5e-10, 1e-15);
  EXPECT_DOUBLE_EQ(tiny.power[1], tiny.power[2]);
  EXPECT_THROW(water_fill(g, w, 0.0), ValidationError);
  const std::vector<double> zero_leak{1.0, 0.0, 1.0};
  EXPECT_THROW(water_fill(g, zero_leak, 1.0), UnboundedWaterLevelError);
  const std::vector<double> dead{0.0, 0.0};
  EXPECT_EQ(water_fill(dead, dead, 1.0).power, (std::vector<double>{0.0, 0.0}));
}

TEST(Wcr, DirectLinksOnlyAndBudgetSpent) {
  const auto inst = random_instance(6, 44);
  const auto res = solve_wcr(inst);
  const auto& a = res.allocation;
  EXPECT_TRUE(a.direct_only);
  EXPECT_FALSE(a.floor_enforced);
  EXPECT_EQ(a.pairs, identity_pairing(6));
  EXPECT_EQ(res.metrics.relay_power, 0.0);
  EXPECT_NEAR(res.diagnostics.usage.s, inst.interference_limit, 1e-10 * inst.interference_limit);
  EXPECT_EQ(res.diagnostics.usage.r, 0.0);
  for (double l : a.thresholds.lambda)
    EXPECT_NEAR(false_alarm_prob(l, inst.sensing), kBaselineFalseAlarm, 1e-12);
  EXPECT_TRUE(check_feasibility(a, inst).ok());
}

TEST(Schemes, NamesParseAndDispatch) {
  for (auto id : kAllSchemes) EXPECT_EQ(parse_scheme(scheme_name(id)), id);
  EXPECT_EQ(parse_scheme("fixed-scp"), SchemeId::FixedSCP);
  EXPECT_EQ(parse_scheme("FIXED_SCP"), SchemeId::FixedSCP);
  EXPECT_EQ(parse_scheme("wcr"), SchemeId::WCR);
  EXPECT_FALSE(parse_scheme("joint").has_value());
  EXPECT_FALSE(parse_scheme("").has_value());

  EXPECT_TRUE(scheme_optimizes_sensing(SchemeId::Proposed));
  EXPECT_TRUE(scheme_optimizes_sensing(SchemeId::FixedSCP));
  EXPECT_FALSE(scheme_optimizes_sensing(SchemeId::ISS));
  EXPECT_FALSE(scheme_optimizes_sensing(SchemeId::WCR));

  const auto inst = random_instance(3, 5);
  EXPECT_TRUE(solve_scheme(SchemeId::WCR, inst).allocation.direct_only);
  EXPECT_EQ(solve_scheme(SchemeId::FixedSCP, inst).allocation.pairs, identity_pairing(3));
}

TEST(Schemes, SensingInfeasibleInstanceIsRejected) {
  auto inst = random_instance(2, 6);
  inst.pu_rx_power[1] = 0.0;  // no PU signal: detection cannot exceed false alarm
  for (auto id : kAllSchemes) EXPECT_THROW(solve_scheme(id, inst), InfeasibleInstanceError);
}
