#pragma once

// Channel state: gain-to-noise-plus-interference ratios, the relay/direct link
// equivalence, and seeded Rayleigh sampling.

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <random>
#include <span>
#include <vector>

#include "crsim/errors.hpp"
#include "crsim/matrix.hpp"

namespace crsim {

/// Owned pseudo-random stream. Seeded from (root, trial, purpose) so that each trial
/// and each consumer inside a trial draws from an independent sequence.
class RandomStream {
 public:
  explicit RandomStream(std::uint64_t root, std::uint64_t trial = 0, std::uint64_t purpose = 0) {
    std::seed_seq seq{static_cast<std::uint32_t>(root), static_cast<std::uint32_t>(root >> 32),
                      static_cast<std::uint32_t>(trial), static_cast<std::uint32_t>(trial >> 32),
                      static_cast<std::uint32_t>(purpose), 0x63727369u};
    engine_.seed(seq);
  }

  /// Uniform on [0, 1) with 53 random bits (independent of the library's distributions).
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Uniform integer in [0, n).
  std::size_t index(std::size_t n) {
    // rejection sampling keeps the result unbiased
    const std::uint64_t bound = static_cast<std::uint64_t>(n);
    const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                                std::numeric_limits<std::uint64_t>::max() % bound;
    std::uint64_t r;
    do r = engine_();
    while (r >= limit);
    return static_cast<std::size_t>(r % bound);
  }

  /// Exponential variate with the given mean (|h|^2 of a Rayleigh amplitude).
  double exponential(double mean) { return -mean * std::log1p(-uniform()); }

 private:
  std::mt19937_64 engine_;
};

/// Per-subcarrier gain-to-(noise + PU interference) ratios of the three SU links.
struct GainRatios {
  std::vector<double> ss;  // SU TX -> SU RX, subcarrier i
  std::vector<double> sr;  // SU TX -> relay, subcarrier i
  std::vector<double> rs;  // relay -> SU RX, subcarrier j

  std::size_t size() const noexcept { return ss.size(); }
};

/// Squared magnitudes |h|^2 of the three SU links on every subcarrier.
struct LinkGains {
  std::vector<double> ss;
  std::vector<double> sr;
  std::vector<double> rs;
};

/// gamma = |h|^2 / (sigma_s^2 + sum_l J). The SU RX sees the PU->SU-RX interference j_ps;
/// the relay sees j_pr.
inline GainRatios compute_ratios(const LinkGains& gains, double noise_var,
                                 std::span<const double> j_ps, std::span<const double> j_pr) {
  const std::size_t n = gains.ss.size();
  if (gains.sr.size() != n || gains.rs.size() != n || j_ps.size() != n || j_pr.size() != n)
    throw ValidationError("compute_ratios: size mismatch");
  if (!(noise_var > 0.0)) throw ValidationError("compute_ratios: noise variance must be > 0");
  GainRatios r;
  r.ss.resize(n);
  r.sr.resize(n);
  r.rs.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (j_ps[i] < 0.0 || j_pr[i] < 0.0)
      throw ValidationError("compute_ratios: interference power must be >= 0");
    r.ss[i] = gains.ss[i] / (noise_var + j_ps[i]);
    r.sr[i] = gains.sr[i] / (noise_var + j_pr[i]);
    r.rs[i] = gains.rs[i] / (noise_var + j_ps[i]);
  }
  return r;
}

enum class LinkMode { Relay, Direct };

/// Equivalent single-hop view of subcarrier pair (i, j). split_first/split_second are the
/// fractions of the pair power spent by the SU TX and the relay.
struct EquivalentLink {
  LinkMode mode = LinkMode::Direct;
  double gamma = 0.0;
  double split_first = 1.0;
  double split_second = 0.0;
};

inline EquivalentLink equivalent_link(double gamma_sr, double gamma_rs, double gamma_ss) {
  EquivalentLink link;
  const double den = gamma_sr + gamma_rs - gamma_ss;
  // den > 0 excludes the all-zero corner where the relay carries nothing
  if (gamma_sr >= gamma_ss && gamma_rs >= gamma_ss && den > 0.0) {
    link.mode = LinkMode::Relay;
    link.split_first = gamma_rs / den;
    link.split_second = (gamma_sr - gamma_ss) / den;
    link.gamma = gamma_sr * gamma_rs / den;
  } else {
    link.gamma = gamma_ss;
  }
  return link;
}

inline EquivalentLink equivalent_link(std::size_t i, std::size_t j, const GainRatios& r) {
  return equivalent_link(r.sr.at(i), r.rs.at(j), r.ss.at(i));
}

inline Matrix<EquivalentLink> link_table(const GainRatios& r) {
  const std::size_t n = r.size();
  Matrix<EquivalentLink> t(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) t(i, j) = equivalent_link(i, j, r);
  return t;
}

/// |h|^2 draws for a Rayleigh-faded amplitude with E|h|^2 = avg_gain.
inline std::vector<double> sample_rayleigh(double avg_gain, std::size_t count, RandomStream& rng) {
  if (!(avg_gain > 0.0) || !std::isfinite(avg_gain))
    throw ValidationError("sample_rayleigh: average gain must be positive and finite");
  std::vector<double> out(count);
  for (auto& g : out) g = rng.exponential(avg_gain);
  return out;
}

inline std::vector<double> sample_rayleigh(double avg_gain, std::size_t count, std::uint64_t seed) {
  RandomStream rng(seed);
  return sample_rayleigh(avg_gain, count, rng);
}

}  // namespace crsim
