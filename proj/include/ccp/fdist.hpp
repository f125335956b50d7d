#pragma once

namespace ccp {

/// P(F <= x) for F ~ F(d1, d2). x <= 0 gives 0; +inf gives 1. Throws
/// InputError for non-positive or non-finite degrees of freedom, or NaN x.
double f_cdf(double x, double d1, double d2);

/// P(F > x), computed directly so that small tail probabilities keep their
/// relative accuracy.
double f_sf(double x, double d1, double d2);

} // namespace ccp
