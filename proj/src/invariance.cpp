#include "ccp/invariance.hpp"

#include "ccp/error.hpp"
#include "ccp/fdist.hpp"
#include "ccp/ols.hpp"

#include <Eigen/Cholesky>
#include <Eigen/LU>

#include <algorithm>
#include <cmath>

namespace ccp {

namespace {

void check_split(Interval i1, Interval i2, std::size_t k) {
    if (i1.end + 1 != i2.start || i1.start > i1.end || i2.start > i2.end) {
        throw IntervalError("Chow intervals " + to_string(i1) + " and " + to_string(i2) +
                            " are not adjacent");
    }
    if (i1.length() <= k) {
        throw IntervalError("left interval too short: |I1| = " + std::to_string(i1.length()) +
                            " <= |S| = " + std::to_string(k));
    }
    if (i2.length() > k && i1.length() + i2.length() <= 2 * k) {
        throw IntervalError("no denominator degrees of freedom for the Chow test on " +
                            std::to_string(i1.length() + i2.length()) + " points");
    }
}

ChowStatistic assemble(double rss1, double rss2, double rss_pooled, std::size_t l1,
                       std::size_t l2, std::size_t k) {
    ChowStatistic c;
    c.rss1 = rss1;
    c.rss2 = rss2;
    c.rss_pooled = rss_pooled;
    const double kd = static_cast<double>(k);
    if (l2 > k) {
        c.form = ChowForm::Equal;
        c.df_num = kd;
        c.df_den = static_cast<double>(l1 + l2) - 2.0 * kd;
        const double num = std::max(0.0, rss_pooled - rss1 - rss2) / c.df_num;
        const double den = (rss1 + rss2) / c.df_den;
        c.statistic = den > 0.0 ? num / den : (num > 0.0 ? INFINITY : NAN);
    } else {
        c.form = ChowForm::Predictive;
        c.df_num = static_cast<double>(l2);
        c.df_den = static_cast<double>(l1) - kd;
        const double num = std::max(0.0, rss_pooled - rss1) / c.df_num;
        const double den = rss1 / c.df_den;
        c.statistic = den > 0.0 ? num / den : (num > 0.0 ? INFINITY : NAN);
    }
    return c;
}

TestOutcome degenerate_outcome(const CovariateSubset& subset) {
    TestOutcome out;
    out.subset = subset;
    out.p_value = 1.0;
    out.chow_p_value = 1.0;
    out.degenerate = true;
    out.statistic = NAN;
    return out;
}

} // namespace

void check_alpha(double alpha) {
    if (!(alpha > 0.0 && alpha < 1.0)) {
        throw InputError("alpha must lie in (0, 1), got " + std::to_string(alpha));
    }
}

ChowStatistic chow_statistic(const MomentTable& table, Interval i1, Interval i2,
                             const CovariateSubset& subset) {
    const auto k = subset.size();
    check_split(i1, i2, k);
    const auto m1 = table.block(i1);
    const auto m2 = table.block(i2);
    const auto m = m1 + m2;
    SubsetSolve b1;
    SubsetSolve b2;
    SubsetSolve b;
    if (!fit_subset(m1, subset, b1) || !fit_subset(m, subset, b)) {
        throw SingularFitError("singular Chow fit for subset " + subset.to_string());
    }
    double rss2 = 0.0;
    if (i2.length() > k) {
        if (!fit_subset(m2, subset, b2)) {
            throw SingularFitError("singular Chow fit for subset " + subset.to_string());
        }
        rss2 = ssq(m2, subset, b2);
    }
    return assemble(ssq(m1, subset, b1), rss2, ssq(m, subset, b), i1.length(), i2.length(), k);
}

ChowStatistic chow_statistic_direct(const Dataset& data, Interval i1, Interval i2,
                                    const CovariateSubset& subset) {
    const auto k = subset.size();
    check_split(i1, i2, k);
    const Interval whole{i1.start, i2.end};
    const auto f1 = ols_fit(data, i1, subset);
    const auto f = ols_fit(data, whole, subset);
    const auto rss1 = residual_sum_of_squares(data, f1, i1);
    const auto l1 = i1.length();
    const auto l2 = i2.length();

    // ||X1 b1 - X1 b||^2 = ||(Y1 - X1 b) - (Y1 - X1 b1)||^2
    const Eigen::VectorXd gap1 = residuals_on(data, f, i1) - residuals_on(data, f1, i1);
    ChowStatistic c;
    if (l2 > k) {
        const auto f2 = ols_fit(data, i2, subset);
        const Eigen::VectorXd gap2 = residuals_on(data, f, i2) - residuals_on(data, f2, i2);
        const auto rss2 = residual_sum_of_squares(data, f2, i2);
        const double num = gap1.squaredNorm() + gap2.squaredNorm();
        c = assemble(rss1, rss2, rss1 + rss2 + num, l1, l2, k);
    } else {
        const double num = gap1.squaredNorm() + residuals_on(data, f, i2).squaredNorm();
        c = assemble(rss1, 0.0, rss1 + num, l1, l2, k);
    }
    c.rss_pooled = residual_sum_of_squares(data, f, whole);
    return c;
}

double chow_predictive_quadratic_form(const Dataset& data, Interval i1, Interval i2,
                                      const CovariateSubset& subset) {
    const auto k = subset.size();
    check_split(i1, i2, k);
    const auto f1 = ols_fit(data, i1, subset);
    const Eigen::VectorXd e = residuals_on(data, f1, i2);

    const auto cols = subset.columns();
    auto design = [&](Interval iv) {
        Eigen::MatrixXd x(static_cast<Eigen::Index>(iv.length()), static_cast<Eigen::Index>(k));
        for (std::size_t j = 0; j < k; ++j) {
            x.col(static_cast<Eigen::Index>(j)) =
                data.x().col(static_cast<Eigen::Index>(cols[j]))
                    .segment(static_cast<Eigen::Index>(iv.start - 1),
                             static_cast<Eigen::Index>(iv.length()));
        }
        return x;
    };
    const Eigen::MatrixXd x1 = design(i1);
    const Eigen::MatrixXd x2 = design(i2);
    const Eigen::MatrixXd g1 = x1.transpose() * x1;
    const auto l2 = static_cast<Eigen::Index>(i2.length());
    const Eigen::MatrixXd v =
        Eigen::MatrixXd::Identity(l2, l2) + x2 * g1.ldlt().solve(x2.transpose());
    const double num = e.dot(v.partialPivLu().solve(e)) / static_cast<double>(i2.length());
    const double den = residual_sum_of_squares(data, f1, i1) / static_cast<double>(i1.length() - k);
    return num / den;
}

bool is_testable(Interval interval, const CovariateSubset& subset) {
    return interval.length() >= 2 * (subset.size() + 2);
}

std::size_t min_testable_length(std::span<const CovariateSubset> subsets) {
    std::size_t k = 1;
    for (const auto& s : subsets) {
        k = std::max(k, s.size());
    }
    return 2 * (k + 2);
}

TestOutcome test_subset_invariance(const MomentTable& table, Interval interval,
                                   const CovariateSubset& subset, double alpha,
                                   const TestOptions& opts) {
    check_alpha(alpha);
    if (!is_testable(interval, subset)) {
        throw IntervalError("interval " + to_string(interval) + " too short to test subset " +
                            subset.to_string() + ": need at least " +
                            std::to_string(2 * (subset.size() + 2)) + " points");
    }
    const auto half = interval.length() / 2;
    const Interval i1{interval.start, interval.start + half - 1};
    const Interval i2{interval.start + half, interval.end};

    ChowStatistic c;
    try {
        c = chow_statistic(table, i1, i2, subset);
    } catch (const SingularFitError&) {
        return degenerate_outcome(subset);
    }
    if (!std::isfinite(c.statistic) && !(c.statistic > 0.0)) {
        return degenerate_outcome(subset);
    }
    if (c.rss1 + c.rss2 <= 0.0) {
        return degenerate_outcome(subset);
    }

    TestOutcome out;
    out.subset = subset;
    out.statistic = c.statistic;
    out.df_num = c.df_num;
    out.df_den = c.df_den;
    out.chow_p_value = f_sf(c.statistic, c.df_num, c.df_den);
    out.p_value = out.chow_p_value;

    if (opts.variance_test) {
        const double k = static_cast<double>(subset.size());
        const double dof1 = static_cast<double>(i1.length()) - k;
        const double dof2 = static_cast<double>(i2.length()) - k;
        if (c.rss1 <= 0.0 || c.rss2 <= 0.0) {
            return degenerate_outcome(subset);
        }
        const double ratio = (c.rss1 / dof1) / (c.rss2 / dof2);
        const double pv =
            std::min(1.0, 2.0 * std::min(f_cdf(ratio, dof1, dof2), f_sf(ratio, dof1, dof2)));
        out.variance_p_value = pv;
        out.p_value = std::min(1.0, 2.0 * std::min(out.chow_p_value, pv));
    }
    out.reject = out.p_value <= alpha;
    return out;
}

DetectionResult detect_ccp(const MomentTable& table, Interval interval, double alpha,
                           std::span<const CovariateSubset> subsets, const TestOptions& opts) {
    if (subsets.empty()) {
        throw InputError("detect_ccp: empty subset list");
    }
    DetectionResult result;
    result.interval = interval;
    result.per_subset.reserve(subsets.size());
    result.combined_p_value = 0.0;
    result.detect = true;
    for (const auto& subset : subsets) {
        auto outcome = test_subset_invariance(table, interval, subset, alpha, opts);
        result.combined_p_value = std::max(result.combined_p_value, outcome.p_value);
        result.detect = result.detect && outcome.reject;
        result.per_subset.push_back(std::move(outcome));
    }
    return result;
}

} // namespace ccp
