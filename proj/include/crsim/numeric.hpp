#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numbers>

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/special_functions/erf.hpp>

#include "crsim/errors.hpp"

namespace crsim {

/// Standard normal tail probability Q(x) = P(Z > x).
inline double gaussian_q(double x) { return 0.5 * std::erfc(x / std::numbers::sqrt2); }

/// Functional inverse of gaussian_q on (0, 1).
inline double inverse_gaussian_q(double p) {
  if (!(p > 0.0 && p < 1.0))
    throw DomainError("inverse_gaussian_q: probability must lie in (0, 1)");
  return std::numbers::sqrt2 * boost::math::erfc_inv(2.0 * p);
}

/// Adaptive 31-point Gauss-Kronrod integral of f over [a, b] to relative tolerance rel_tol.
template <typename F>
double integrate(F&& f, double a, double b, double rel_tol = 1e-10, unsigned max_depth = 18) {
  if (a == b) return 0.0;
  using Rule = boost::math::quadrature::gauss_kronrod<double, 31>;
  return Rule::integrate(std::forward<F>(f), a, b, max_depth, rel_tol);
}

/// Root of a nonincreasing function on [lo, hi] by bisection in linear space.
/// Returns the point where f changes sign (f(lo) >= 0 >= f(hi) assumed).
template <typename F>
double bisect_decreasing(F&& f, double lo, double hi, double rel_tol = 1e-13, int max_iter = 200) {
  for (int it = 0; it < max_iter; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (f(mid) > 0.0)
      lo = mid;
    else
      hi = mid;
    if (hi - lo <= rel_tol * std::max(std::abs(lo), std::abs(hi))) break;
  }
  return 0.5 * (lo + hi);
}

/// Root of a nonincreasing function of a positive variable, searched geometrically.
/// f(x) must eventually become <= 0 as x grows; returns the smallest x with f(x) <= 0
/// (to relative tolerance) starting from the bracket guess x0.
template <typename F>
double bisect_decreasing_positive(F&& f, double x0, double rel_tol = 1e-13) {
  double lo = x0;
  double hi = x0;
  if (f(x0) > 0.0) {
    do {
      lo = hi;
      hi *= 4.0;
      if (!std::isfinite(hi)) return std::numeric_limits<double>::infinity();
    } while (f(hi) > 0.0);
  } else {
    do {
      hi = lo;
      lo *= 0.25;
      if (lo < std::numeric_limits<double>::min()) return 0.0;
    } while (f(lo) <= 0.0);
  }
  // geometric bisection: the bracket can span many decades
  for (int it = 0; it < 400; ++it) {
    const double mid = std::sqrt(lo * hi);
    if (f(mid) > 0.0)
      lo = mid;
    else
      hi = mid;
    if (hi - lo <= rel_tol * hi) break;
  }
  return hi;
}

}  // namespace crsim
