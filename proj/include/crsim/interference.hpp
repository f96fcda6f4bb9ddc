#pragma once

// Mutual spectral leakage between CR subcarriers and PU subchannels.
//
//   PU -> CR : J = |h|^2 * integral over the CR subcarrier of the expected K-point
//              periodogram of the PU PSD (PSD convolved with the Fejer kernel).
//   CR -> PU : phi = |h|^2 * T_s * integral over the PU band of sinc^2(pi f T_s).
//
// Frequencies on the PU->CR side are normalized: one subcarrier spacing delta_f maps to
// 2*pi/K rad/sample, i.e. one periodogram bin.

#include <cmath>
#include <cstddef>
#include <functional>
#include <map>
#include <mutex>
#include <numbers>
#include <stdexcept>
#include <utility>
#include <vector>

#include "crsim/channel.hpp"
#include "crsim/errors.hpp"
#include "crsim/matrix.hpp"
#include "crsim/numeric.hpp"

namespace crsim {

/// PU power spectral density as a function of normalized frequency offset (rad/sample)
/// from the subchannel center, supported on [-half_width, half_width].
struct Psd {
  std::function<double(double)> density;
  double half_width = 0.0;
};

/// Flat PSD carrying total_power over a band of the given normalized width.
inline Psd flat_psd(double total_power, double normalized_width) {
  if (!(normalized_width > 0.0)) throw ValidationError("flat_psd: width must be > 0");
  if (total_power < 0.0) throw ValidationError("flat_psd: power must be >= 0");
  const double level = total_power / normalized_width;
  return Psd{[level](double) { return level; }, 0.5 * normalized_width};
}

struct PuSubchannel {
  std::size_t index = 0;
  double center = 0.0;     // Hz, on the common axis with the CR subcarriers
  double bandwidth = 0.0;  // B_l, Hz
  Psd psd;
  double gain_ps = 0.0;  // PU -> SU RX
  double gain_pr = 0.0;  // PU -> relay
  double gain_sp = 0.0;  // SU TX -> PU
  double gain_rp = 0.0;  // relay -> PU
};

struct SpectralGeometry {
  double delta_f = 0.15625e6;       // Hz
  double symbol_duration = 7e-6;    // T_s, seconds
  std::size_t fft_size = 64;        // K
  std::vector<double> cr_centers;   // Hz, one per CR subcarrier
  std::vector<PuSubchannel> pu_subchannels;

  std::size_t n_cr() const noexcept { return cr_centers.size(); }

  void validate() const {
    if (!(delta_f > 0.0)) throw ValidationError("geometry: delta_f must be > 0");
    if (!(symbol_duration > 0.0)) throw ValidationError("geometry: symbol duration must be > 0");
    if (fft_size < 1) throw ValidationError("geometry: FFT size must be >= 1");
  }

  double spectral_distance(std::size_t i, std::size_t l) const {
    return std::abs(cr_centers.at(i) - pu_subchannels.at(l).center);
  }

  /// Hz -> rad/sample on the periodogram axis.
  double normalized(double hz) const {
    return 2.0 * std::numbers::pi * hz / (static_cast<double>(fft_size) * delta_f);
  }
};

/// Fejer kernel (sin(K x / 2) / sin(x / 2))^2; integrates to 2*pi*K over one period.
inline double fejer_kernel(double x, std::size_t k) {
  const double kk = static_cast<double>(k);
  const double den = std::sin(0.5 * x);
  if (std::abs(den) < 1e-9) return kk * kk;
  const double num = std::sin(0.5 * kk * x);
  return (num * num) / (den * den);
}

/// Expected K-point periodogram of psd at normalized frequency w (relative to the PU center).
inline double expected_periodogram(const Psd& psd, double w, std::size_t k, double rel_tol = 1e-11) {
  if (!psd.density || !(psd.half_width > 0.0)) return 0.0;
  const double kk = static_cast<double>(k);
  auto integrand = [&](double nu) {
    const double d = psd.density(nu);
    if (d < 0.0 || !std::isfinite(d)) throw ValidationError("PSD must be finite and >= 0");
    return d * fejer_kernel(w - nu, k);
  };
  // the PSD is periodic in 2*pi; wider supports are folded onto one period by the caller
  const double hw = std::min(psd.half_width, std::numbers::pi);
  return integrate(integrand, -hw, hw, rel_tol) / (2.0 * std::numbers::pi * kk);
}

/// PU->CR interference power of subchannel l on CR subcarrier i.
inline double pu_to_cr_interference(std::size_t l, std::size_t i, const SpectralGeometry& geom,
                                    double gain, double rel_tol = 1e-10) {
  geom.validate();
  if (gain < 0.0) throw ValidationError("pu_to_cr_interference: gain must be >= 0");
  if (gain == 0.0) return 0.0;
  const auto& pu = geom.pu_subchannels.at(l);
  const double center = geom.normalized(geom.spectral_distance(i, l));
  const double half_bin = geom.normalized(0.5 * geom.delta_f);
  auto outer = [&](double w) {
    return expected_periodogram(pu.psd, w, geom.fft_size, 0.1 * rel_tol);
  };
  const double j = gain * integrate(outer, center - half_bin, center + half_bin, rel_tol);
  if (!std::isfinite(j)) throw ValidationError("pu_to_cr_interference: PSD not integrable");
  return j;
}

/// sinc^2(x) = (sin(pi x) / (pi x))^2 with the removable singularity at x = 0.
inline double sinc_squared(double x) {
  const double px = std::numbers::pi * x;
  if (std::abs(px) < 1e-4) {
    const double p2 = px * px;
    return 1.0 - p2 / 3.0 + 2.0 * p2 * p2 / 45.0;
  }
  const double s = std::sin(px) / px;
  return s * s;
}

/// Leakage factor of a CR subcarrier at spectral distance `distance` into a PU band of
/// width `bandwidth`: T_s * integral of sinc^2(pi f T_s) over the band, per unit gain.
inline double sinc_squared_leakage(double distance, double bandwidth, double symbol_duration,
                                   double rel_tol = 1e-10) {
  if (!(bandwidth > 0.0)) throw ValidationError("leakage: PU bandwidth must be > 0");
  const double lo = (distance - 0.5 * bandwidth) * symbol_duration;
  const double hi = (distance + 0.5 * bandwidth) * symbol_duration;
  return integrate(sinc_squared, lo, hi, rel_tol);
}

/// CR->PU leakage density phi of CR subcarrier i into PU subchannel l, times the link gain.
inline double cr_to_pu_factor(std::size_t i, std::size_t l, const SpectralGeometry& geom,
                              double gain, double rel_tol = 1e-10) {
  geom.validate();
  if (gain < 0.0) throw ValidationError("cr_to_pu_factor: gain must be >= 0");
  const auto& pu = geom.pu_subchannels.at(l);
  if (!(pu.bandwidth > 0.0)) throw ValidationError("cr_to_pu_factor: PU bandwidth must be > 0");
  if (gain == 0.0) return 0.0;
  return gain *
         sinc_squared_leakage(geom.spectral_distance(i, l), pu.bandwidth, geom.symbol_duration,
                              rel_tol);
}

struct InterferenceFactors {
  std::vector<double> j_ps;  // summed PU interference at the SU RX, per CR subcarrier
  std::vector<double> j_pr;  // summed PU interference at the relay, per CR subcarrier
  Matrix<double> phi_s;      // N x L, SU TX leakage density into each PU subchannel
  Matrix<double> phi_r;      // N x L, relay leakage density
  Matrix<double> eff_s;      // N x N, sum_l Phi^{s,(l)}_{i,j}
  Matrix<double> eff_r;      // N x N, sum_l Phi^{r,(l)}_{i,j}

  std::size_t n() const noexcept { return j_ps.size(); }

  double phi_s_total(std::size_t i) const {
    double s = 0.0;
    for (double v : phi_s.row(i)) s += v;
    return s;
  }
  double phi_r_total(std::size_t j) const {
    double s = 0.0;
    for (double v : phi_r.row(j)) s += v;
    return s;
  }
};

/// Pair factors: the SU TX leakage weighted by its power share and the relay leakage
/// (on the relay's subcarrier j) weighted by the relay share. Direct-mode pairs put the
/// whole pair power on the SU TX.
inline std::pair<Matrix<double>, Matrix<double>> effective_factors(
    const Matrix<EquivalentLink>& links, const Matrix<double>& phi_s, const Matrix<double>& phi_r) {
  const std::size_t n = links.rows();
  if (phi_s.rows() != n || phi_r.rows() != n)
    throw ValidationError("effective_factors: size mismatch");
  std::vector<double> ps(n, 0.0), pr(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (double v : phi_s.row(i)) ps[i] += v;
    for (double v : phi_r.row(i)) pr[i] += v;
  }
  Matrix<double> eff_s(n, n, 0.0), eff_r(n, n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      const auto& link = links(i, j);
      if (link.mode == LinkMode::Relay) {
        if (!(link.split_first >= 0.0 && link.split_second >= 0.0) ||
            std::abs(link.split_first + link.split_second - 1.0) > 1e-9)
          throw std::logic_error("effective_factors: relay pair with invalid power split");
        eff_s(i, j) = link.split_first * ps[i];
        eff_r(i, j) = link.split_second * pr[j];
      } else {
        eff_s(i, j) = ps[i];
      }
    }
  }
  return {std::move(eff_s), std::move(eff_r)};
}

inline std::pair<Matrix<double>, Matrix<double>> effective_factors(const GainRatios& ratios,
                                                                   const Matrix<double>& phi_s,
                                                                   const Matrix<double>& phi_r) {
  const std::size_t n = ratios.size();
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      const double den = ratios.sr[i] + ratios.rs[j] - ratios.ss[i];
      const bool relay = ratios.sr[i] >= ratios.ss[i] && ratios.rs[j] >= ratios.ss[i];
      if (relay && ratios.rs[j] > 0.0 && !(den > 0.0))
        throw std::logic_error("effective_factors: nonpositive denominator on a relay pair");
    }
  return effective_factors(link_table(ratios), phi_s, phi_r);
}

/// Unit-gain leakage for a layout where every CR subcarrier and PU subchannel occupies
/// one slot of width delta_f and every PU subchannel carries the same PSD shape. Both
/// directions then depend only on the integer slot offset, so values are memoized.
/// Thread-safe.
class SlotLeakageTable {
 public:
  SlotLeakageTable(double delta_f, double symbol_duration, std::size_t fft_size, double pu_power,
                   double rel_tol = 1e-10)
      : delta_f_(delta_f),
        symbol_duration_(symbol_duration),
        fft_size_(fft_size),
        pu_power_(pu_power),
        rel_tol_(rel_tol) {
    if (!(delta_f > 0.0) || !(symbol_duration > 0.0) || fft_size < 1)
      throw ValidationError("SlotLeakageTable: invalid geometry");
  }

  /// PU->CR interference (PU TX power included) per unit link gain at |offset| slots.
  double pu_to_cr(long offset) const { return lookup(offset).first; }
  /// CR->PU leakage per unit link gain at |offset| slots.
  double cr_to_pu(long offset) const { return lookup(offset).second; }

  /// Geometry with one slot per subcarrier/subchannel for the given slot positions.
  SpectralGeometry geometry(const std::vector<long>& cr_slots, const std::vector<long>& pu_slots) const {
    SpectralGeometry g;
    g.delta_f = delta_f_;
    g.symbol_duration = symbol_duration_;
    g.fft_size = fft_size_;
    for (long s : cr_slots) g.cr_centers.push_back(static_cast<double>(s) * delta_f_);
    const double width = g.normalized(delta_f_);
    for (std::size_t l = 0; l < pu_slots.size(); ++l) {
      PuSubchannel pu;
      pu.index = l;
      pu.center = static_cast<double>(pu_slots[l]) * delta_f_;
      pu.bandwidth = delta_f_;
      pu.psd = flat_psd(pu_power_, width);
      g.pu_subchannels.push_back(std::move(pu));
    }
    return g;
  }

 private:
  std::pair<double, double> lookup(long offset) const {
    const long key = offset < 0 ? -offset : offset;
    std::lock_guard lock(mutex_);
    auto it = cache_.find(key);
    if (it != cache_.end()) return it->second;
    const auto g = geometry({0}, {key});
    const std::pair<double, double> v{pu_to_cr_interference(0, 0, g, 1.0, rel_tol_),
                                      cr_to_pu_factor(0, 0, g, 1.0, rel_tol_)};
    cache_.emplace(key, v);
    return v;
  }

  double delta_f_;
  double symbol_duration_;
  std::size_t fft_size_;
  double pu_power_;
  double rel_tol_;
  mutable std::mutex mutex_;
  mutable std::map<long, std::pair<double, double>> cache_;
};

}  // namespace crsim
