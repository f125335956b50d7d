#include "ccp/population.hpp"

#include "ccp/error.hpp"
#include "ccp/stability.hpp"

#include <Eigen/Cholesky>
#include <Eigen/LU>
#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <numeric>

namespace ccp {

namespace {

constexpr double kPopulationSingular = 1e-12;

Eigen::MatrixXd principal(const Eigen::MatrixXd& m, std::span<const std::size_t> idx) {
    const auto k = static_cast<Eigen::Index>(idx.size());
    Eigen::MatrixXd out(k, k);
    for (Eigen::Index i = 0; i < k; ++i) {
        for (Eigen::Index j = 0; j < k; ++j) {
            out(i, j) = m(static_cast<Eigen::Index>(idx[i]), static_cast<Eigen::Index>(idx[j]));
        }
    }
    return out;
}

// E[(Y - X'beta)^2] under second moment m.
double mean_square(const Eigen::MatrixXd& m, const Eigen::VectorXd& beta) {
    const auto y = m.rows() - 1;
    const auto p = beta.size();
    const double yy = m(y, y);
    const double xy = beta.dot(m.col(y).head(p));
    const double xx = beta.dot(m.topLeftCorner(p, p) * beta);
    return yy - 2.0 * xy + xx;
}

double residual_mean(const GaussianSystem& sys, const Eigen::VectorXd& beta) {
    const auto y = sys.mean.size() - 1;
    return sys.mean(y) - beta.dot(sys.mean.head(beta.size()));
}

} // namespace

void LinearScmSegment::validate() const {
    const auto n = b.rows();
    if (b.cols() != n || mu.size() != n || sigma2.size() != n) {
        throw InputError("SCM segment: B, mu and sigma2 must agree on p");
    }
    if (observed.empty()) {
        throw InputError("SCM segment: observed index list is empty");
    }
    for (auto o : observed) {
        if (o >= static_cast<std::size_t>(n)) {
            throw InputError("SCM segment: observed index " + std::to_string(o) + " out of range");
        }
    }
    for (Eigen::Index i = 0; i < n; ++i) {
        if (b(i, i) != 0.0) {
            throw InputError("SCM segment: B has a non-zero diagonal entry at " + std::to_string(i));
        }
        if (!(sigma2(i) >= 0.0)) {
            throw InputError("SCM segment: negative noise variance at " + std::to_string(i));
        }
    }
    (void)topological_order();
}

std::vector<std::size_t> LinearScmSegment::topological_order() const {
    const auto n = static_cast<std::size_t>(b.rows());
    std::vector<std::size_t> indegree(n, 0);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            if (b(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) != 0.0) {
                ++indegree[i];
            }
        }
    }
    std::vector<std::size_t> order;
    std::vector<bool> done(n, false);
    while (order.size() < n) {
        bool progressed = false;
        for (std::size_t v = 0; v < n; ++v) {
            if (done[v] || indegree[v] != 0) {
                continue;
            }
            done[v] = true;
            order.push_back(v);
            progressed = true;
            for (std::size_t c = 0; c < n; ++c) {
                if (b(static_cast<Eigen::Index>(c), static_cast<Eigen::Index>(v)) != 0.0) {
                    --indegree[c];
                }
            }
        }
        if (!progressed) {
            throw InputError("SCM segment: coefficient graph has a cycle");
        }
    }
    return order;
}

GaussianSystem system_moments(const LinearScmSegment& segment) {
    segment.validate();
    const auto p = segment.b.rows();
    const Eigen::MatrixXd a =
        (Eigen::MatrixXd::Identity(p, p) - segment.b).partialPivLu().solve(Eigen::MatrixXd::Identity(p, p));
    const Eigen::VectorXd mean_all = a * segment.mu;
    const Eigen::MatrixXd cov_all = a * segment.sigma2.asDiagonal() * a.transpose();

    const auto d = segment.d();
    const auto dim = static_cast<Eigen::Index>(d + 2);
    // Map slot -> variable, with slot d the intercept.
    std::vector<long> var(static_cast<std::size_t>(dim), -1);
    for (std::size_t j = 0; j < d; ++j) {
        var[j] = static_cast<long>(segment.observed[j]);
    }
    var[d + 1] = static_cast<long>(segment.observed[d]);

    GaussianSystem sys;
    sys.mean = Eigen::VectorXd::Zero(dim);
    Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(dim, dim);
    for (Eigen::Index i = 0; i < dim; ++i) {
        const auto vi = var[static_cast<std::size_t>(i)];
        sys.mean(i) = vi < 0 ? 1.0 : mean_all(vi);
        for (Eigen::Index j = 0; j < dim; ++j) {
            const auto vj = var[static_cast<std::size_t>(j)];
            cov(i, j) = (vi < 0 || vj < 0) ? 0.0 : cov_all(vi, vj);
        }
    }
    sys.second_moment = cov + sys.mean * sys.mean.transpose();
    return sys;
}

GaussianSystem pooled(std::span<const GaussianSystem> systems, std::span<const double> weights) {
    if (systems.empty() || systems.size() != weights.size()) {
        throw InputError("pooled: need one weight per system");
    }
    const double total = std::accumulate(weights.begin(), weights.end(), 0.0);
    if (!(total > 0.0)) {
        throw InputError("pooled: weights must have a positive sum");
    }
    GaussianSystem out{Eigen::VectorXd::Zero(systems[0].mean.size()),
                       Eigen::MatrixXd::Zero(systems[0].second_moment.rows(),
                                             systems[0].second_moment.cols())};
    for (std::size_t r = 0; r < systems.size(); ++r) {
        if (weights[r] < 0.0) {
            throw InputError("pooled: negative weight");
        }
        out.mean += (weights[r] / total) * systems[r].mean;
        out.second_moment += (weights[r] / total) * systems[r].second_moment;
    }
    return out;
}

Eigen::VectorXd population_ols(const GaussianSystem& sys, const CovariateSubset& subset) {
    const auto d = sys.d();
    if (subset.d() != d) {
        throw InputError("population_ols: subset and system disagree on d");
    }
    const auto cols = subset.columns();
    const auto g = principal(sys.second_moment, cols);
    const auto sv = Eigen::JacobiSVD<Eigen::MatrixXd>(g).singularValues();
    if (sv(0) == 0.0 || sv(sv.size() - 1) < kPopulationSingular * sv(0)) {
        throw SingularFitError("population Gram matrix singular for subset " + subset.to_string());
    }
    Eigen::VectorXd r(static_cast<Eigen::Index>(cols.size()));
    const auto y = static_cast<Eigen::Index>(d + 1);
    for (std::size_t i = 0; i < cols.size(); ++i) {
        r(static_cast<Eigen::Index>(i)) = sys.second_moment(static_cast<Eigen::Index>(cols[i]), y);
    }
    const Eigen::VectorXd coef = g.ldlt().solve(r);
    Eigen::VectorXd beta = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(d + 1));
    for (std::size_t i = 0; i < cols.size(); ++i) {
        beta(static_cast<Eigen::Index>(cols[i])) = coef(static_cast<Eigen::Index>(i));
    }
    return beta;
}

double population_residual_variance(const GaussianSystem& sys, const CovariateSubset& subset) {
    const auto beta = population_ols(sys, subset);
    const double m = residual_mean(sys, beta);
    return std::max(0.0, mean_square(sys.second_moment, beta) - m * m);
}

double population_v(const GaussianSystem& eval, const GaussianSystem& fit,
                    const CovariateSubset& subset) {
    return std::max(0.0, mean_square(eval.second_moment, population_ols(fit, subset)));
}

bool is_invariant_set(std::span<const LinearScmSegment> segments, const CovariateSubset& subset,
                      double tol) {
    if (segments.size() < 2) {
        return true;
    }
    const auto ref = system_moments(segments[0]);
    const auto beta0 = population_ols(ref, subset);
    const auto mean0 = residual_mean(ref, beta0);
    const auto var0 = population_residual_variance(ref, subset);
    for (std::size_t r = 1; r < segments.size(); ++r) {
        const auto sys = system_moments(segments[r]);
        const auto beta = population_ols(sys, subset);
        if ((beta - beta0).cwiseAbs().maxCoeff() > tol) {
            return false;
        }
        if (std::abs(residual_mean(sys, beta) - mean0) > tol) {
            return false;
        }
        if (std::abs(population_residual_variance(sys, subset) - var0) > tol) {
            return false;
        }
    }
    return true;
}

bool is_ccp(const LinearScmSegment& before, const LinearScmSegment& after, double tol) {
    if (before.d() != after.d()) {
        throw InputError("is_ccp: segments disagree on d");
    }
    const LinearScmSegment pair[] = {before, after};
    for (const auto& subset : enumerate_subsets(before.d())) {
        if (is_invariant_set(pair, subset, tol)) {
            return false;
        }
    }
    return true;
}

PiecewiseScm::PiecewiseScm(std::size_t n, std::vector<std::size_t> starts,
                           std::vector<LinearScmSegment> segments)
    : n_(n), starts_(std::move(starts)), segments_(std::move(segments)) {
    if (segments_.empty() || starts_.size() != segments_.size() || starts_.front() != 1) {
        throw InputError("piecewise SCM: need one start per segment, the first equal to 1");
    }
    for (std::size_t r = 1; r < starts_.size(); ++r) {
        if (starts_[r] <= starts_[r - 1] || starts_[r] > n_) {
            throw InputError("piecewise SCM: starts must increase within 1..n");
        }
    }
    for (const auto& seg : segments_) {
        if (seg.d() != segments_.front().d()) {
            throw InputError("piecewise SCM: segments disagree on d");
        }
        systems_.push_back(system_moments(seg));
    }
}

GaussianSystem PiecewiseScm::interval_moments(Interval interval) const {
    if (interval.start < 1 || interval.end > n_ || interval.start > interval.end) {
        throw IntervalError("interval " + to_string(interval) + " outside 1.." + std::to_string(n_));
    }
    std::vector<double> weights(segments_.size(), 0.0);
    for (std::size_t r = 0; r < segments_.size(); ++r) {
        const auto lo = std::max(starts_[r], interval.start);
        const auto hi = std::min(r + 1 < segments_.size() ? starts_[r + 1] - 1 : n_, interval.end);
        if (hi >= lo) {
            weights[r] = static_cast<double>(hi - lo + 1);
        }
    }
    return pooled(systems_, weights);
}

PopulationInstability population_instability(const PiecewiseScm& scm, Interval interval,
                                             std::size_t s,
                                             std::span<const CovariateSubset> subsets) {
    const auto scheme = partition(interval, s);
    if (subsets.empty()) {
        throw InputError("empty subset list");
    }
    if (scheme.m() == 1) {
        auto best = subsets.front();
        for (const auto& sub : subsets) {
            if (CovariateSubset::simpler(sub, best)) {
                best = sub;
            }
        }
        return {0.0, best};
    }
    std::vector<GaussianSystem> in;
    std::vector<GaussianSystem> out;
    for (const auto& block : scheme.blocks) {
        in.push_back(scm.interval_moments(block));
        std::vector<GaussianSystem> pieces;
        std::vector<double> weights;
        if (block.start > interval.start) {
            pieces.push_back(scm.interval_moments({interval.start, block.start - 1}));
            weights.push_back(static_cast<double>(block.start - interval.start));
        }
        if (block.end < interval.end) {
            pieces.push_back(scm.interval_moments({block.end + 1, interval.end}));
            weights.push_back(static_cast<double>(interval.end - block.end));
        }
        out.push_back(pooled(pieces, weights));
    }

    bool found = false;
    PopulationInstability best;
    for (const auto& subset : subsets) {
        double total = 0.0;
        bool ok = true;
        for (std::size_t r = 0; r < scheme.m() && ok; ++r) {
            try {
                const double v_out = population_v(out[r], in[r], subset);
                const double v_in = population_v(in[r], in[r], subset);
                total += (v_out - v_in) * (v_out - v_in);
            } catch (const SingularFitError&) {
                ok = false;
            }
        }
        if (!ok) {
            continue;
        }
        if (!found || total < best.value ||
            (total == best.value && CovariateSubset::simpler(subset, best.subset))) {
            best = {total, subset};
            found = true;
        }
    }
    if (!found) {
        throw SingularFitError("every subset singular on some block of " + to_string(interval));
    }
    return best;
}

double population_stability_loss(const PiecewiseScm& scm, Interval interval, std::size_t i,
                                 std::size_t s, std::span<const CovariateSubset> subsets) {
    if (i < interval.start + 2 || i + 1 > interval.end) {
        throw IntervalError("split point " + std::to_string(i) + " not inside " +
                            to_string(interval));
    }
    const Interval left{interval.start, i - 1};
    const Interval right{i, interval.end};
    const auto m = partition(left, s).m() + partition(right, s).m();
    return (population_instability(scm, left, s, subsets).value +
            population_instability(scm, right, s, subsets).value) /
           static_cast<double>(m);
}

} // namespace ccp
