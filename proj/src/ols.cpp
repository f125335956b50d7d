#include "ccp/ols.hpp"

#include "ccp/error.hpp"
#include "ccp/kernels.hpp"

#include <Eigen/QR>
#include <Eigen/SVD>

#include <vector>

namespace ccp {

namespace {

void check_interval(const Dataset& data, Interval interval) {
    if (interval.start < 1 || interval.end > data.n() || interval.start > interval.end) {
        throw IntervalError("interval " + to_string(interval) + " outside 1.." +
                            std::to_string(data.n()));
    }
}

// Pointers to the rows of `interval` in each subset column, plus the
// subset-restricted coefficients.
struct SubsetView {
    std::vector<const double*> cols;
    std::vector<double> beta;
};

SubsetView view(const Dataset& data, const OlsFit& fit, Interval interval) {
    SubsetView v;
    const auto offset = interval.start - 1;
    for (auto c : fit.subset.columns()) {
        v.cols.push_back(data.column(c).data() + offset);
        v.beta.push_back(fit.beta(static_cast<Eigen::Index>(c)));
    }
    return v;
}

} // namespace

OlsFit ols_fit(const Dataset& data, Interval fit_interval, const CovariateSubset& subset) {
    check_interval(data, fit_interval);
    if (subset.d() != data.d()) {
        throw InputError("subset built for d = " + std::to_string(subset.d()) +
                         " used with data of d = " + std::to_string(data.d()));
    }
    const auto rows = static_cast<Eigen::Index>(fit_interval.length());
    const auto k = static_cast<Eigen::Index>(subset.size());
    if (rows < k) {
        throw IntervalError("fitting interval " + to_string(fit_interval) + " has " +
                            std::to_string(rows) + " rows, fewer than |S| = " +
                            std::to_string(k));
    }
    const auto first = static_cast<Eigen::Index>(fit_interval.start - 1);
    Eigen::MatrixXd xs(rows, k);
    for (Eigen::Index j = 0; j < k; ++j) {
        xs.col(j) = data.x().col(static_cast<Eigen::Index>(subset.columns()[j])).segment(first, rows);
    }
    const Eigen::VectorXd ys = data.y().segment(first, rows);

    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(xs);
    // X P = Q R, so X and R share singular values.
    const Eigen::MatrixXd r = qr.matrixR().topRows(k).triangularView<Eigen::Upper>();
    const Eigen::VectorXd sv = Eigen::JacobiSVD<Eigen::MatrixXd>(r).singularValues();
    if (sv(0) == 0.0 || sv(k - 1) < kSingularTolerance * sv(0)) {
        throw SingularFitError("rank-deficient design for subset " + subset.to_string() +
                               " on " + to_string(fit_interval));
    }
    const Eigen::VectorXd coef = qr.solve(ys);

    OlsFit fit{subset, fit_interval, Eigen::VectorXd::Zero(static_cast<Eigen::Index>(data.columns()))};
    for (Eigen::Index j = 0; j < k; ++j) {
        fit.beta(static_cast<Eigen::Index>(subset.columns()[j])) = coef(j);
    }
    return fit;
}

Eigen::VectorXd residuals_on(const Dataset& data, const OlsFit& fit, Interval eval) {
    check_interval(data, eval);
    const auto v = view(data, fit, eval);
    Eigen::VectorXd out(static_cast<Eigen::Index>(eval.length()));
    kernels::active().residuals(data.response().data() + eval.start - 1, v.cols.data(),
                                v.beta.data(), v.cols.size(), eval.length(), out.data());
    return out;
}

double residual_sum_of_squares(const Dataset& data, const OlsFit& fit, Interval eval) {
    check_interval(data, eval);
    const auto v = view(data, fit, eval);
    return kernels::active().residual_ssq(data.response().data() + eval.start - 1,
                                          v.cols.data(), v.beta.data(), v.cols.size(),
                                          eval.length());
}

double mean_squared_residual(const Dataset& data, Interval eval, Interval fit_interval,
                             const CovariateSubset& subset) {
    const auto fit = ols_fit(data, fit_interval, subset);
    return residual_sum_of_squares(data, fit, eval) / static_cast<double>(eval.length());
}

} // namespace ccp
