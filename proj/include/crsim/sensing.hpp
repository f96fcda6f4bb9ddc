#pragma once

// Energy-detector statistics and the per-subcarrier sensing threshold update.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numbers>
#include <optional>
#include <span>
#include <vector>

#include "crsim/errors.hpp"
#include "crsim/numeric.hpp"

namespace crsim {

/// Largest false-alarm cap for which (1 - p_f(i))(1 - p_f(j)) stays concave; Q(0.507).
inline constexpr double kMaxFalseAlarmBound = 0.3061;
/// Largest miss-detection cap for which the miss-detection constraint stays convex.
inline constexpr double kMaxMissBound = 0.5;

struct SensingParams {
  int samples = 32;                 // M
  double noise_var = 1e-5;          // sigma_n^2 [W]
  double miss_bound = 0.2;          // alpha
  double false_alarm_bound = 0.3061;  // beta

  void validate() const {
    if (samples < 1) throw ValidationError("sensing: sample count must be >= 1");
    if (!(noise_var > 0.0)) throw ValidationError("sensing: noise variance must be > 0");
    if (!(miss_bound > 0.0 && miss_bound <= kMaxMissBound))
      throw ValidationError("sensing: miss-detection bound must lie in (0, 0.5]");
    if (!(false_alarm_bound > 0.0 && false_alarm_bound <= kMaxFalseAlarmBound + 1e-12))
      throw ValidationError("sensing: false-alarm bound must lie in (0, 0.3061]");
  }
};

struct DetectorThresholds {
  std::vector<double> lambda;
};

/// p_f(lambda) = Q((lambda - M sigma^2) / (sqrt(2M) sigma^2)).
inline double false_alarm_prob(double lambda, const SensingParams& p) {
  const double m = p.samples;
  return gaussian_q((lambda - m * p.noise_var) / (std::sqrt(2.0 * m) * p.noise_var));
}

/// p_d(lambda) for a PU received with power pu_rx_power at the detector.
inline double detection_prob(double lambda, const SensingParams& p, double pu_rx_power) {
  const double m = p.samples;
  const double s2 = p.noise_var;
  const double num = lambda - m * (s2 + pu_rx_power);
  const double den = std::sqrt(2.0 * m * s2 * (s2 + 2.0 * pu_rx_power));
  return gaussian_q(num / den);
}

/// Energy threshold at which the false-alarm probability equals target.
inline double threshold_for_false_alarm(double target, const SensingParams& p) {
  const double m = p.samples;
  return (inverse_gaussian_q(target) * std::sqrt(2.0 * m) + m) * p.noise_var;
}

/// Lowest admissible threshold: p_f(lambda) <= beta.
inline double false_alarm_floor(const SensingParams& p) {
  return threshold_for_false_alarm(p.false_alarm_bound, p);
}

/// Highest admissible threshold: 1 - p_d(lambda) <= alpha.
inline double miss_detection_ceiling(const SensingParams& p, double pu_rx_power) {
  const double m = p.samples;
  const double s2 = p.noise_var;
  const double den = std::sqrt(2.0 * m * s2 * (s2 + 2.0 * pu_rx_power));
  return m * (s2 + pu_rx_power) + inverse_gaussian_q(1.0 - p.miss_bound) * den;
}

/// Derivative of R(1 - p_f) + delta p_d with respect to lambda (the per-subcarrier
/// Lagrangian terms that depend on the threshold). Its zero is the closed-form threshold.
inline double threshold_slope(double lambda, double rate_weight, double delta, double pu_rx_power,
                              const SensingParams& p) {
  const double m = p.samples;
  const double s2 = p.noise_var;
  const double a = std::sqrt(2.0 * m) * s2;
  const double b = std::sqrt(2.0 * m * s2 * (s2 + 2.0 * pu_rx_power));
  const double x = (lambda - m * s2) / a;
  const double y = (lambda - m * (s2 + pu_rx_power)) / b;
  const double inv_sqrt_2pi = 0.5 * std::numbers::sqrt2 * std::numbers::inv_sqrtpi;
  return rate_weight * inv_sqrt_2pi * std::exp(-0.5 * x * x) / a -
         delta * inv_sqrt_2pi * std::exp(-0.5 * y * y) / b;
}

/// Closed-form stationary threshold for xi = delta / (mu + R~) > 0.
///
/// Solves ((lambda - M(s2+S))/b)^2 - ((lambda - M s2)/a)^2 = 2 ln(sigma xi / sqrt(s2 + 2S))
/// for the larger root, which is the local maximum of R(1 - p_f) + delta p_d:
///
///   lambda = M s2 / 2 + 1/2 sqrt(M s2 (s2 + 2S) (M - 8 s2 ln(sigma xi / sqrt(s2 + 2S)) / S))
///
/// Returns nullopt when no stationary point exists (no PU energy, or the radicand is
/// nonpositive); the threshold objective is then decreasing everywhere.
inline std::optional<double> stationary_threshold(double xi, double pu_rx_power,
                                                  const SensingParams& p) {
  const double s2 = p.noise_var;
  const double pu = pu_rx_power;
  if (!(pu > 0.0) || !(xi > 0.0)) return std::nullopt;
  const double m = p.samples;
  const double log_term = std::log(std::sqrt(s2) * xi / std::sqrt(s2 + 2.0 * pu));
  const double radicand = m * s2 * (s2 + 2.0 * pu) * (m - 8.0 * s2 * log_term / pu);
  if (!(radicand > 0.0) || !std::isfinite(radicand)) return std::nullopt;
  return 0.5 * m * s2 + 0.5 * std::sqrt(radicand);
}

/// Threshold for one subcarrier given its normalized rate and miss-detection multiplier.
inline double update_threshold(std::size_t subcarrier, double rate_tilde, double delta,
                               double pu_rx_power, const SensingParams& p) {
  const double floor = false_alarm_floor(p);
  if (!(rate_tilde > 0.0) || !std::isfinite(rate_tilde))
    throw DegenerateThresholdError(subcarrier, "normalized rate must be positive and finite");
  const double xi = delta / rate_tilde;
  if (!(xi >= 0.0) || !std::isfinite(xi))
    throw DegenerateThresholdError(subcarrier, "xi = delta / R~ must be finite and >= 0");
  if (xi == 0.0) {
    // No miss-detection pressure: the stationary point runs off to infinity, so sit on
    // the largest threshold that still meets the miss-detection cap.
    return std::max(floor, std::nextafter(miss_detection_ceiling(p, pu_rx_power), 0.0));
  }
  const auto interior = stationary_threshold(xi, pu_rx_power, p);
  return interior ? std::max(floor, *interior) : floor;
}

/// Thresholds for all subcarriers. delta holds the miss-detection multipliers; the
/// false-alarm multipliers mu are held at zero inside xi.
inline DetectorThresholds update_thresholds(std::span<const double> rate_tilde,
                                            std::span<const double> delta,
                                            std::span<const double> pu_rx_power,
                                            const SensingParams& p) {
  if (rate_tilde.size() != delta.size() || rate_tilde.size() != pu_rx_power.size())
    throw ValidationError("update_thresholds: size mismatch");
  DetectorThresholds out;
  out.lambda.resize(rate_tilde.size());
  for (std::size_t i = 0; i < rate_tilde.size(); ++i)
    out.lambda[i] = update_threshold(i, rate_tilde[i], delta[i], pu_rx_power[i], p);
  return out;
}

inline std::vector<double> false_alarm_probs(const DetectorThresholds& t, const SensingParams& p) {
  std::vector<double> out(t.lambda.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = false_alarm_prob(t.lambda[i], p);
  return out;
}

inline std::vector<double> detection_probs(const DetectorThresholds& t, const SensingParams& p,
                                           std::span<const double> pu_rx_power) {
  std::vector<double> out(t.lambda.size());
  for (std::size_t i = 0; i < out.size(); ++i)
    out[i] = detection_prob(t.lambda[i], p, pu_rx_power[i]);
  return out;
}

/// True when some threshold satisfies both sensing caps on subcarrier i.
inline bool sensing_feasible(const SensingParams& p, double pu_rx_power) {
  return miss_detection_ceiling(p, pu_rx_power) >= false_alarm_floor(p);
}

}  // namespace crsim
