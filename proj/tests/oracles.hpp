#pragma once

// Reference computations used only by the tests. Each one takes a different numerical
// route from the library code it checks.

#include <boost/multiprecision/cpp_dec_float.hpp>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <numbers>
#include <numeric>
#include <utility>
#include <vector>

#include "crsim/problem.hpp"

namespace oracle {

using Big50 = boost::multiprecision::cpp_dec_float_50;
using Big100 = boost::multiprecision::number<boost::multiprecision::cpp_dec_float<100>>;

/// Q(x) = 1/2 - (1/sqrt(2 pi)) sum_n (-1)^n x^(2n+1) / (2^n n! (2n+1)), in 50 digits.
inline double q_series(double xd) {
  const Big50 x = xd;
  const Big50 x2 = x * x;
  Big50 term = x;  // x^(2n+1) / (2^n n!) with alternating sign
  Big50 sum = 0;
  for (int n = 0; n < 2000; ++n) {
    const Big50 add = term / (2 * n + 1);
    sum += add;
    if (n > 5 && abs(add) < Big50("1e-45")) break;
    term *= -x2 / (2 * (n + 1));
  }
  const Big50 pi = boost::math::constants::pi<Big50>();
  const Big50 q = Big50(0.5) - sum / sqrt(2 * pi);
  return static_cast<double>(q);
}

/// Inverse of q_series by bisection on [-40, 40].
inline double inverse_q_bisect(double p) {
  double lo = -40.0, hi = 40.0;  // q decreasing
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    (q_series(mid) > p ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

/// Q via erfc, for the oracles that need many evaluations.
inline double q_fast(double x) { return 0.5 * std::erfc(x / std::numbers::sqrt2); }

/// Stationary threshold of R (1 - p_f(lambda)) + delta p_d(lambda) that is a local maximum.
/// The objective itself is flat to machine precision over a wide range, so the search runs on
/// h(lambda) = ln(R phi(x)/a) - ln(delta phi(y)/b), the log-ratio of its two slope terms:
/// golden-section search locates the maximum of h (concave in lambda) and bisection then finds
/// the zero to its right, where the slope changes from positive to negative.
inline double threshold_argmax(double rate, double delta, double pu, int m_samples, double s2) {
  const double m = m_samples;
  const double a = std::sqrt(2.0 * m) * s2;
  const double b = std::sqrt(2.0 * m * s2 * (s2 + 2.0 * pu));
  auto h = [&](double lam) {
    const double x = (lam - m * s2) / a;
    const double y = (lam - m * (s2 + pu)) / b;
    return (std::log(rate / a) - 0.5 * x * x) - (std::log(delta / b) - 0.5 * y * y);
  };
  double lo = -1e3 * m * (s2 + pu), hi = 1e3 * m * (s2 + pu);
  const double g = (std::sqrt(5.0) - 1.0) / 2.0;
  double x1 = hi - g * (hi - lo), x2 = lo + g * (hi - lo);
  double f1 = h(x1), f2 = h(x2);
  for (int it = 0; it < 300; ++it) {
    if (f1 < f2) {
      lo = x1;
      x1 = x2;
      f1 = f2;
      x2 = lo + g * (hi - lo);
      f2 = h(x2);
    } else {
      hi = x2;
      x2 = x1;
      f2 = f1;
      x1 = hi - g * (hi - lo);
      f1 = h(x1);
    }
  }
  double l = 0.5 * (lo + hi);
  if (!(h(l) > 0.0)) return std::numeric_limits<double>::quiet_NaN();  // no stationary point
  double r = l + m * (s2 + pu);
  while (h(r) > 0.0) r += r - l;
  for (int it = 0; it < 400; ++it) {
    const double mid = 0.5 * (l + r);
    (h(mid) > 0.0 ? l : r) = mid;
  }
  return 0.5 * (l + r);
}

/// Integral over [lo, hi] of the Fejer kernel, from its Fourier series
/// F_K(x) = K + 2 sum_{m=1}^{K-1} (K - m) cos(m x).
inline double fejer_integral(double lo, double hi, std::size_t k) {
  const double kk = static_cast<double>(k);
  double s = kk * (hi - lo);
  for (std::size_t m = 1; m < k; ++m) {
    const double mm = static_cast<double>(m);
    s += 2.0 * (kk - mm) * (std::sin(mm * hi) - std::sin(mm * lo)) / mm;
  }
  return s;
}

/// Double antiderivative of the Fejer kernel.
inline double fejer_double_antiderivative(double x, std::size_t k) {
  const double kk = static_cast<double>(k);
  double s = 0.5 * kk * x * x;
  for (std::size_t m = 1; m < k; ++m) {
    const double mm = static_cast<double>(m);
    s -= 2.0 * (kk - mm) * std::cos(mm * x) / (mm * mm);
  }
  return s;
}

/// PU->CR interference of a flat PSD (total power p, normalized half width a) integrated
/// over [c - h, c + h] of the expected K-point periodogram, in closed form.
inline double flat_psd_bin_power(double p, double a, double c, double h, std::size_t k) {
  // inner: integral_{-a}^{a} F(w - nu) dnu = G(w + a) - G(w - a), G' = F
  // outer over w in [c - h, c + h] uses the double antiderivative H
  auto H = [k](double x) { return fejer_double_antiderivative(x, k); };
  const double outer = (H(c + h + a) - H(c - h + a)) - (H(c + h - a) - H(c - h - a));
  const double level = p / (2.0 * a);
  return level * outer / (2.0 * std::numbers::pi * static_cast<double>(k));
}

/// Si(x) by its power series in 100 digits (adequate for |x| up to ~80).
inline Big100 sine_integral(const Big100& x) {
  Big100 sum = 0, term = x;  // x^(2n+1)/(2n+1)! with sign
  for (int n = 0; n < 4000; ++n) {
    const Big100 add = term / (2 * n + 1);
    sum += add;
    if (n > 5 && abs(add) < Big100("1e-80")) break;
    term *= -x * x / ((2 * n + 2) * (2 * n + 3));
  }
  return sum;
}

/// integral_{lo}^{hi} (sin(pi u)/(pi u))^2 du via the antiderivative
/// Si(2 pi u)/pi - sin^2(pi u)/(pi^2 u).
inline double sinc2_integral(double lo, double hi) {
  const Big100 pi = boost::math::constants::pi<Big100>();
  auto F = [&](double ud) {
    const Big100 u = ud;
    if (ud == 0.0) return Big100(0);
    const Big100 s = sin(pi * u);
    return sine_integral(2 * pi * u) / pi - s * s / (pi * pi * u);
  };
  return static_cast<double>(F(hi) - F(lo));
}

/// Exact water-filling by sorting: P_i = max(0, L - 1/g_i), sum_i w_i P_i = budget.
inline std::pair<std::vector<double>, double> water_fill_sorted(const std::vector<double>& g,
                                                                const std::vector<double>& w,
                                                                double budget) {
  const std::size_t n = g.size();
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  std::sort(idx.begin(), idx.end(), [&](auto x, auto y) { return g[x] > g[y]; });
  double level = 0.0;
  double sw = 0.0, swg = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    const auto i = idx[k];
    sw += w[i];
    swg += w[i] / g[i];
    const double cand = (budget + swg) / sw;
    const bool next_inactive = k + 1 == n || cand <= 1.0 / g[idx[k + 1]];
    if (cand > 1.0 / g[i] && next_inactive) {
      level = cand;
      break;
    }
  }
  std::vector<double> p(n);
  for (std::size_t i = 0; i < n; ++i) p[i] = std::max(0.0, level - 1.0 / g[i]);
  return {p, level};
}

/// Pair data for one fixed pairing, as the dual oracle sees it.
struct PairData {
  double a, b, c, g, nu;  // leakage on each side, rate weight, gamma, floor
};

inline std::vector<PairData> pair_data(const crsim::ProblemInstance& inst, const std::vector<int>& perm,
                                       const std::vector<double>& pf) {
  std::vector<PairData> d;
  for (std::size_t i = 0; i < inst.n; ++i) {
    const auto j = static_cast<std::size_t>(perm[i]);
    const double g = inst.gamma(i, j);
    if (!(g > 0.0)) continue;
    d.push_back({inst.factors.eff_s(i, j), inst.factors.eff_r(i, j),
                 0.5 * inst.rho[i] * (1.0 - pf[i]) * (1.0 - pf[j]), g, inst.nu(i, j)});
  }
  return d;
}

struct DualOracleResult {
  bool feasible = false;
  double eta = 0.0, kappa = 0.0;
  double throughput = 0.0;  // bits
  std::vector<double> power;
};

/// Minimizes the concave-program dual g(eta, kappa) = sum max_{P >= nu} [c ln(1 + gP) -
/// (eta a + kappa b) P] + (eta + kappa) cap by nested golden-section search over
/// log-multipliers; a side with no leakage keeps its multiplier at zero.
inline DualOracleResult dual_oracle(const std::vector<PairData>& d, double cap) {
  DualOracleResult r;
  double fs = 0.0, fr = 0.0;
  bool any_a = false, any_b = false;
  for (const auto& t : d) {
    fs += t.a * t.nu;
    fr += t.b * t.nu;
    any_a = any_a || t.a > 0.0;
    any_b = any_b || t.b > 0.0;
  }
  if (fs > cap * (1 + 1e-12) || fr > cap * (1 + 1e-12)) return r;
  r.feasible = true;
  if (d.empty()) return r;
  auto power = [](const PairData& t, double eta, double kappa) {
    const double den = eta * t.a + kappa * t.b;
    if (!(den > 0.0)) return std::numeric_limits<double>::infinity();
    return std::max(t.nu, t.c / den - 1.0 / t.g);
  };
  auto dual = [&](double eta, double kappa) {
    double v = (eta + kappa) * cap;
    for (const auto& t : d) {
      const double p = power(t, eta, kappa);
      if (!std::isfinite(p)) return std::numeric_limits<double>::infinity();
      v += t.c * std::log1p(t.g * p) - (eta * t.a + kappa * t.b) * p;
    }
    return v;
  };
  auto golden = [](const std::function<double(double)>& f, double lo, double hi) {
    const double g = (std::sqrt(5.0) - 1.0) / 2.0;
    double x1 = hi - g * (hi - lo), x2 = lo + g * (hi - lo);
    double f1 = f(x1), f2 = f(x2);
    for (int it = 0; it < 160; ++it) {
      if (f1 > f2) {
        lo = x1;
        x1 = x2;
        f1 = f2;
        x2 = lo + g * (hi - lo);
        f2 = f(x2);
      } else {
        hi = x2;
        x2 = x1;
        f2 = f1;
        x1 = hi - g * (hi - lo);
        f1 = f(x1);
      }
    }
    return 0.5 * (lo + hi);
  };
  double csum = 0.0;
  for (const auto& t : d) csum += t.c;
  const double centre = std::log(csum / cap);
  const double span = 60.0;
  // a multiplier is allowed to vanish: exp(t) with t far below the centre stands in for 0
  auto best_eta = [&](double kappa) {
    if (!any_a) return 0.0;
    return std::exp(golden([&](double t) { return dual(std::exp(t), kappa); }, centre - span, centre + span));
  };
  auto inner = [&](double kappa) { return dual(best_eta(kappa), kappa); };
  double kappa = 0.0;
  if (any_b) kappa = std::exp(golden([&](double t) { return inner(std::exp(t)); }, centre - span, centre + span));
  double eta = best_eta(kappa);
  // snap multipliers that are negligible against the active one to zero when that is feasible
  auto usage = [&](double e, double k, bool rs) {
    double u = 0.0;
    for (const auto& t : d) u += (rs ? t.b : t.a) * power(t, e, k);
    return u;
  };
  if (any_a && any_b) {
    if (eta < 1e-12 * kappa && usage(0.0, kappa, false) <= cap) eta = 0.0;
    if (kappa < 1e-12 * eta && usage(eta, 0.0, true) <= cap) kappa = 0.0;
  }
  r.eta = eta;
  r.kappa = kappa;
  for (const auto& t : d) {
    const double p = power(t, eta, kappa);
    r.power.push_back(p);
    r.throughput += t.c * std::log2(1.0 + t.g * p);
  }
  return r;
}

/// Best throughput over every pairing with the dual oracle for power. Returns -1 when no
/// pairing is feasible.
inline double exhaustive_optimum(const crsim::ProblemInstance& inst, const std::vector<double>& pf) {
  std::vector<int> perm(inst.n);
  std::iota(perm.begin(), perm.end(), 0);
  double best = -1.0;
  do {
    const auto r = dual_oracle(pair_data(inst, perm, pf), inst.interference_limit);
    if (r.feasible) best = std::max(best, r.throughput * inst.bandwidth);
  } while (std::next_permutation(perm.begin(), perm.end()));
  return best;
}

/// Damped Newton in log-multipliers for the two-cap relaxed system
///   sum_t q_t f_t (c_t / (eta a_t + kappa b_t) - 1/g_t) = cap, f in {a, b}.
struct RelaxedTerm {
  double q, a, b, c, g;
};

inline std::pair<double, double> relaxed_newton(const std::vector<RelaxedTerm>& terms, double cap,
                                                double eta0, double kappa0) {
  auto F = [&](double le, double lk) {
    const double e = std::exp(le), k = std::exp(lk);
    double fs = -cap, fr = -cap;
    for (const auto& t : terms) {
      const double p = t.c / (e * t.a + k * t.b) - 1.0 / t.g;
      fs += t.q * t.a * p;
      fr += t.q * t.b * p;
    }
    return std::pair{fs / cap, fr / cap};
  };
  double le = std::log(eta0), lk = std::log(kappa0);
  for (int it = 0; it < 200; ++it) {
    const auto [f1, f2] = F(le, lk);
    if (std::abs(f1) < 1e-15 && std::abs(f2) < 1e-15) break;
    const double h = 1e-7;
    const auto [a1, a2] = F(le + h, lk);
    const auto [b1, b2] = F(le, lk + h);
    const double j11 = (a1 - f1) / h, j21 = (a2 - f2) / h, j12 = (b1 - f1) / h, j22 = (b2 - f2) / h;
    const double det = j11 * j22 - j12 * j21;
    if (det == 0.0) break;
    double de = -(j22 * f1 - j12 * f2) / det;
    double dk = -(-j21 * f1 + j11 * f2) / det;
    double step = 1.0;
    const double norm0 = std::hypot(f1, f2);
    for (int ls = 0; ls < 40; ++ls) {
      const auto [g1, g2] = F(le + step * de, lk + step * dk);
      if (std::hypot(g1, g2) < norm0) break;
      step *= 0.5;
    }
    le += step * de;
    lk += step * dk;
  }
  return {std::exp(le), std::exp(lk)};
}

}  // namespace oracle
