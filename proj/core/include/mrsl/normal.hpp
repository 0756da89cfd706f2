#pragma once

// Standard normal distribution helpers with tail-stable logarithms.

namespace mrsl {

double normal_pdf(double t) noexcept;
double log_normal_pdf(double t) noexcept;
double normal_cdf(double t) noexcept;
/// log Phi(t), accurate far into the lower tail.
double log_normal_cdf(double t) noexcept;
/// log(Phi(hi) - Phi(lo)) for lo < hi; either bound may be infinite.
double log_normal_interval(double lo, double hi) noexcept;
/// Phi^{-1}(p) for p in (0, 1).
double normal_quantile(double p);

}  // namespace mrsl
