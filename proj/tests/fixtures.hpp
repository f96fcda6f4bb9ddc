#pragma once

// Small hand-built instances shared by the allocator and scheme tests.

#include <cstdint>
#include <random>
#include <vector>

#include "crsim/problem.hpp"

namespace fixture {

inline crsim::SensingParams sensing() { return crsim::SensingParams{32, 1e-5, 0.2, 0.3061}; }

/// One PU subchannel; phi_s / phi_r are the per-subcarrier leakage into it.
inline crsim::ProblemInstance make_instance(crsim::GainRatios r, const std::vector<double>& phi_s,
                                            const std::vector<double>& phi_r, double cap) {
  const std::size_t n = r.size();
  crsim::InstanceInputs in;
  in.ratios = std::move(r);
  in.phi_s = crsim::Matrix<double>(n, 1);
  in.phi_r = crsim::Matrix<double>(n, 1);
  for (std::size_t i = 0; i < n; ++i) {
    in.phi_s(i, 0) = phi_s[i];
    in.phi_r(i, 0) = phi_r[i];
  }
  in.interference_limit = cap;
  in.sensing = sensing();
  in.pu_rx_power.assign(n, 5e-3);
  return crsim::build_instance(std::move(in));
}

inline crsim::ProblemInstance random_instance(std::size_t n, std::uint64_t seed,
                                              double cap_per_pair = 0.05) {
  std::mt19937_64 rng(seed);
  std::exponential_distribution<double> e(1.0);
  std::uniform_real_distribution<double> u(0.5, 1.5);
  crsim::GainRatios r{std::vector<double>(n), std::vector<double>(n), std::vector<double>(n)};
  std::vector<double> ps(n), pr(n);
  for (std::size_t i = 0; i < n; ++i) {
    r.ss[i] = 30 * e(rng);
    r.sr[i] = 80 * e(rng);
    r.rs[i] = 80 * e(rng);
    ps[i] = 1e-2 * u(rng);
    pr[i] = 1e-2 * u(rng);
  }
  return make_instance(std::move(r), ps, pr, cap_per_pair * static_cast<double>(n));
}

}  // namespace fixture
