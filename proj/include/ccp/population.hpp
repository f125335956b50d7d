#pragma once

// Closed-form moments of linear SCMs with Gaussian (or any finite-variance)
// noise, and the population versions of the OLS, invariance, instability and
// loss quantities computed from them. Used as ground truth in tests and to
// verify the CCP/NCCP labels of simulator schedules.

#include "ccp/dataset.hpp"

#include <cstddef>
#include <span>
#include <vector>

#include <Eigen/Core>

namespace ccp {

/// Absolute tolerance for population comparisons.
inline constexpr double kOracleTolerance = 1e-9;

/// V = B V + noise over p variables, some of which may be hidden.
struct LinearScmSegment {
    /// B(i, j) is the weight of variable j in the equation of variable i.
    Eigen::MatrixXd b;
    Eigen::VectorXd mu;
    Eigen::VectorXd sigma2;
    /// Variable indices of X^1..X^d followed by Y.
    std::vector<std::size_t> observed;

    std::size_t p() const { return static_cast<std::size_t>(b.rows()); }
    std::size_t d() const { return observed.size() - 1; }

    /// Throws InputError on shape mismatch, negative variance, non-zero
    /// diagonal, or a cycle in the graph of B.
    void validate() const;

    /// A topological order of the p variables (parents first).
    std::vector<std::size_t> topological_order() const;
};

/// Moments of (X^1..X^d, 1, Y). Slot d is the intercept.
struct GaussianSystem {
    Eigen::VectorXd mean;
    Eigen::MatrixXd second_moment;

    std::size_t d() const { return static_cast<std::size_t>(mean.size()) - 2; }
};

GaussianSystem system_moments(const LinearScmSegment& segment);

/// Mixture of systems with nonnegative weights (normalized internally); this
/// is the pooled moment of an interval spanning several segments.
GaussianSystem pooled(std::span<const GaussianSystem> systems, std::span<const double> weights);

/// Length d+1, zero off S. Throws SingularFitError when E[X^S X^S'] is
/// singular.
Eigen::VectorXd population_ols(const GaussianSystem& sys, const CovariateSubset& subset);

/// Var(Y - X'beta) with beta = population_ols(sys, subset).
double population_residual_variance(const GaussianSystem& sys, const CovariateSubset& subset);

/// E_eval[(Y - X'beta_fit)^2] with beta_fit fitted on `fit`. Population
/// counterpart of mean_squared_residual.
double population_v(const GaussianSystem& eval, const GaussianSystem& fit,
                    const CovariateSubset& subset);

/// True iff coefficient, residual mean and residual variance of S agree
/// across all segments within `tol`.
bool is_invariant_set(std::span<const LinearScmSegment> segments, const CovariateSubset& subset,
                      double tol = kOracleTolerance);

/// True iff no subset is invariant across the two segments.
bool is_ccp(const LinearScmSegment& before, const LinearScmSegment& after,
            double tol = kOracleTolerance);

/// Segment r governs time points starts[r]..starts[r+1]-1 (1-based).
class PiecewiseScm {
public:
    PiecewiseScm(std::size_t n, std::vector<std::size_t> starts,
                 std::vector<LinearScmSegment> segments);

    std::size_t n() const { return n_; }
    std::size_t d() const { return segments_.front().d(); }
    const std::vector<std::size_t>& starts() const { return starts_; }
    const std::vector<LinearScmSegment>& segments() const { return segments_; }

    /// Moments pooled uniformly over the time points of `interval`.
    GaussianSystem interval_moments(Interval interval) const;

private:
    std::size_t n_;
    std::vector<std::size_t> starts_;
    std::vector<LinearScmSegment> segments_;
    std::vector<GaussianSystem> systems_;
};

struct PopulationInstability {
    double value = 0.0;
    CovariateSubset subset;
};

/// Population minimal OLS instability over `interval` with block length s.
/// Subsets that are singular on some block are skipped.
PopulationInstability population_instability(const PiecewiseScm& scm, Interval interval,
                                             std::size_t s,
                                             std::span<const CovariateSubset> subsets);

/// Population causal stability loss at split point i.
double population_stability_loss(const PiecewiseScm& scm, Interval interval, std::size_t i,
                                 std::size_t s, std::span<const CovariateSubset> subsets);

} // namespace ccp
