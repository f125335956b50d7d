#pragma once

// Invariance tests for a single subset on an interval (midpoint Chow test,
// optionally Bonferroni-combined with a residual variance-ratio test) and
// the all-subsets-reject CCP detection rule built on them.

#include "ccp/dataset.hpp"
#include "ccp/moments.hpp"

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

namespace ccp {

struct TestOptions {
    /// Also compare residual variances of the two halves.
    bool variance_test = false;
};

enum class ChowForm {
    /// Both samples larger than |S|: F(k, l - 2k).
    Equal,
    /// Second sample of at most |S| points: F(l2, l1 - k).
    Predictive,
};

struct ChowStatistic {
    double statistic = 0.0;
    double df_num = 0.0;
    double df_den = 0.0;
    ChowForm form = ChowForm::Equal;
    double rss1 = 0.0;
    double rss2 = 0.0;
    double rss_pooled = 0.0;
};

/// Chow statistic for a break between adjacent intervals i1 (first) and i2.
/// Throws IntervalError when |i1| <= |S|, when the intervals are not
/// adjacent, or when the equal-sample form would have no denominator degrees
/// of freedom; SingularFitError for a singular fit.
ChowStatistic chow_statistic(const MomentTable& table, Interval i1, Interval i2,
                             const CovariateSubset& subset);

/// Same statistic from the rows, through ols_fit and explicit fitted-value
/// discrepancies. Reference for the moment route.
ChowStatistic chow_statistic_direct(const Dataset& data, Interval i1, Interval i2,
                                    const CovariateSubset& subset);

/// Predictive form written as a quadratic form in the out-of-sample
/// prediction errors, e' [I + X2 (X1'X1)^-1 X2']^-1 e. Valid for any |i2|;
/// equals the Predictive ChowStatistic when |i2| <= |S|.
double chow_predictive_quadratic_form(const Dataset& data, Interval i1, Interval i2,
                                      const CovariateSubset& subset);

struct TestOutcome {
    CovariateSubset subset;
    double statistic = 0.0;
    double df_num = 0.0;
    double df_den = 0.0;
    double p_value = 1.0;
    double chow_p_value = 1.0;
    std::optional<double> variance_p_value;
    bool reject = false;
    /// Singular fit or zero pooled residual; p_value forced to 1.
    bool degenerate = false;
};

/// |I| >= 2(|S| + 2)
bool is_testable(Interval interval, const CovariateSubset& subset);

/// Smallest interval length on which every subset is testable.
std::size_t min_testable_length(std::span<const CovariateSubset> subsets);

/// First floor(|I|/2) points against the rest. Throws IntervalError when the
/// interval is not testable and InputError when alpha is outside (0, 1).
TestOutcome test_subset_invariance(const MomentTable& table, Interval interval,
                                   const CovariateSubset& subset, double alpha,
                                   const TestOptions& opts = {});

struct DetectionResult {
    Interval interval;
    std::vector<TestOutcome> per_subset;
    /// Max over subsets.
    double combined_p_value = 1.0;
    /// Every subset rejects.
    bool detect = false;
};

DetectionResult detect_ccp(const MomentTable& table, Interval interval, double alpha,
                           std::span<const CovariateSubset> subsets,
                           const TestOptions& opts = {});

/// Throws InputError unless 0 < alpha < 1.
void check_alpha(double alpha);

} // namespace ccp
