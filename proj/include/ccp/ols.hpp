#pragma once

// Least squares computed directly from the rows of a Dataset with a
// rank-revealing QR factorization. This is the reference route; the
// detection and loss code paths use MomentTable (moments.hpp) and are
// cross-checked against these functions in the tests.

#include "ccp/dataset.hpp"

#include <Eigen/Core>

namespace ccp {

/// Relative singular-value threshold below which a design is rank deficient.
inline constexpr double kSingularTolerance = 1e-10;

struct OlsFit {
    CovariateSubset subset;
    Interval interval;
    /// Length d+1; exactly zero outside `subset`.
    Eigen::VectorXd beta;
};

/// Least squares of Y_J on X_J^S. Throws SingularFitError when the smallest
/// singular value of X_J^S is below kSingularTolerance times the largest,
/// and IntervalError when |J| < |S|.
OlsFit ols_fit(const Dataset& data, Interval fit_interval, const CovariateSubset& subset);

/// Y_l - X_l^T beta for every l in `eval`; the fit may come from a different
/// interval.
Eigen::VectorXd residuals_on(const Dataset& data, const OlsFit& fit, Interval eval);

/// (1/|I|) sum_{l in I} (Y_l - X_l^T beta_J(S))^2 with beta_J(S) fitted on J.
double mean_squared_residual(const Dataset& data, Interval eval, Interval fit_interval,
                             const CovariateSubset& subset);

/// Sum of squared residuals of `fit` over `eval`.
double residual_sum_of_squares(const Dataset& data, const OlsFit& fit, Interval eval);

} // namespace ccp
