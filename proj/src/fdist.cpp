#include "ccp/fdist.hpp"

#include "ccp/error.hpp"

#include <boost/math/special_functions/beta.hpp>

#include <cmath>
#include <limits>
#include <string>

namespace ccp {

namespace {

void check(double x, double d1, double d2) {
    if (!(d1 > 0.0) || !(d2 > 0.0) || !std::isfinite(d1) || !std::isfinite(d2)) {
        throw InputError("F distribution needs positive finite degrees of freedom, got (" +
                         std::to_string(d1) + ", " + std::to_string(d2) + ")");
    }
    if (std::isnan(x)) {
        throw InputError("F distribution evaluated at NaN");
    }
}

// P(F <= x) = I_{d1 x / (d1 x + d2)}(d1/2, d2/2). The complementary argument
// d2 / (d1 x + d2) is formed separately to avoid 1 - w cancellation.
struct BetaArgs {
    double w;
    double wc;
};

BetaArgs beta_args(double x, double d1, double d2) {
    const double denom = d1 * x + d2;
    return {d1 * x / denom, d2 / denom};
}

} // namespace

double f_cdf(double x, double d1, double d2) {
    check(x, d1, d2);
    if (x <= 0.0) {
        return 0.0;
    }
    if (std::isinf(x)) {
        return 1.0;
    }
    const auto [w, wc] = beta_args(x, d1, d2);
    if (w <= 0.5) {
        return boost::math::ibeta(d1 / 2.0, d2 / 2.0, w);
    }
    return boost::math::ibetac(d2 / 2.0, d1 / 2.0, wc);
}

double f_sf(double x, double d1, double d2) {
    check(x, d1, d2);
    if (x <= 0.0) {
        return 1.0;
    }
    if (std::isinf(x)) {
        return 0.0;
    }
    const auto [w, wc] = beta_args(x, d1, d2);
    if (w <= 0.5) {
        return boost::math::ibetac(d1 / 2.0, d2 / 2.0, w);
    }
    return boost::math::ibeta(d2 / 2.0, d1 / 2.0, wc);
}

} // namespace ccp
