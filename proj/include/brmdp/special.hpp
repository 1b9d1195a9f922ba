#pragma once

namespace brmdp {

// Standard normal helpers. All of these keep full relative accuracy in the
// far tails, which the truncated-normal family relies on.

double normal_pdf(double z) noexcept;
double normal_cdf(double z) noexcept;
/// Upper tail 1 - Phi(z).
double normal_sf(double z) noexcept;
/// log(1 - Phi(z)).
double log_normal_sf(double z) noexcept;
/// Inverse of Phi on (0, 1).
double normal_quantile(double p) noexcept;
/// z such that 1 - Phi(z) = q, accurate for tiny q.
double normal_upper_quantile(double q) noexcept;

}  // namespace brmdp
