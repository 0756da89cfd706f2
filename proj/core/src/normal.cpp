#include "mrsl/normal.hpp"

#include <boost/math/distributions/normal.hpp>
#include <cmath>
#include <limits>
#include <numbers>

#include "mrsl/error.hpp"

namespace mrsl {

namespace {
constexpr double kLogSqrt2Pi = 0.91893853320467274178;
constexpr double kTailCut = -35.0;
}  // namespace

double normal_pdf(double t) noexcept { return std::exp(-0.5 * t * t - kLogSqrt2Pi); }

double log_normal_pdf(double t) noexcept { return -0.5 * t * t - kLogSqrt2Pi; }

double normal_cdf(double t) noexcept { return 0.5 * std::erfc(-t / std::numbers::sqrt2); }

double log_normal_cdf(double t) noexcept {
  if (t == -std::numeric_limits<double>::infinity()) return t;
  if (t > kTailCut) {
    if (t > 5.0) return std::log1p(-0.5 * std::erfc(t / std::numbers::sqrt2));
    return std::log(0.5 * std::erfc(-t / std::numbers::sqrt2));
  }
  // Mills-ratio asymptotic series; truncation error below 1e-14 for t <= -35.
  const double r = 1.0 / (t * t);
  const double series =
      1.0 + r * (-1.0 + r * (3.0 + r * (-15.0 + r * (105.0 + r * (-945.0)))));
  return log_normal_pdf(t) - std::log(-t) + std::log(series);
}

double log_normal_interval(double lo, double hi) noexcept {
  constexpr double inf = std::numeric_limits<double>::infinity();
  if (!(lo < hi)) return -inf;
  if (lo == -inf) return log_normal_cdf(hi);
  if (hi == inf) return log_normal_cdf(-lo);
  if (lo > 0.0) {
    // Both in the upper tail: Phi(-lo) - Phi(-hi).
    const double a = log_normal_cdf(-lo);
    const double b = log_normal_cdf(-hi);
    return a + std::log1p(-std::exp(b - a));
  }
  const double a = log_normal_cdf(hi);
  const double b = log_normal_cdf(lo);
  return a + std::log1p(-std::exp(b - a));
}

double normal_quantile(double p) {
  if (!(p > 0.0 && p < 1.0)) throw Error("normal_quantile: p must lie in (0,1)");
  return boost::math::quantile(boost::math::normal_distribution<double>(), p);
}

}  // namespace mrsl
