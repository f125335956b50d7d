#include "ccp/moments.hpp"

#include "ccp/error.hpp"
#include "ccp/kernels.hpp"

#include <cmath>

namespace ccp {

BlockMoments& BlockMoments::operator+=(const BlockMoments& other) {
    count += other.count;
    const auto q = dim * (dim + 1) / 2;
    for (std::size_t i = 0; i < q; ++i) {
        m[i] += other.m[i];
    }
    return *this;
}

BlockMoments& BlockMoments::operator-=(const BlockMoments& other) {
    count -= other.count;
    const auto q = dim * (dim + 1) / 2;
    for (std::size_t i = 0; i < q; ++i) {
        m[i] -= other.m[i];
    }
    return *this;
}

MomentTable::MomentTable(const Dataset& data)
    : n_(data.n()), d_(data.d()), dim_(data.d() + 2) {
    if (dim_ > kMaxMomentDim) {
        throw InputError("moment table supports d <= " + std::to_string(kMaxMomentDim - 2) +
                         ", got d = " + std::to_string(d_));
    }
    packed_ = dim_ * (dim_ + 1) / 2;

    // Centered copies of z = (X^1..X^d, 1, Y).
    std::vector<std::vector<double>> z(dim_, std::vector<double>(n_));
    means_.assign(dim_, 0.0);
    for (std::size_t j = 0; j < dim_; ++j) {
        std::span<const double> src =
            j < d_ ? data.column(j) : (j == d_ ? data.column(d_) : data.response());
        double mean = 0.0;
        if (j != d_) {
            for (double v : src) {
                mean += v;
            }
            mean /= static_cast<double>(n_);
        }
        means_[j] = mean;
        for (std::size_t i = 0; i < n_; ++i) {
            z[j][i] = src[i] - mean;
        }
    }

    const auto& kt = kernels::active();
    prefix_.assign(packed_ * (n_ + 1), 0.0);
    for (std::size_t a = 0; a < dim_; ++a) {
        for (std::size_t b = a; b < dim_; ++b) {
            kt.prefix_products(z[a].data(), z[b].data(), n_,
                               prefix_.data() + BlockMoments::index(a, b, dim_) * (n_ + 1));
        }
    }
}

BlockMoments MomentTable::block(Interval interval) const {
    if (interval.start < 1 || interval.end > n_ || interval.start > interval.end) {
        throw IntervalError("interval " + to_string(interval) + " outside 1.." +
                            std::to_string(n_));
    }
    BlockMoments out;
    out.dim = dim_;
    out.count = static_cast<double>(interval.length());
    const auto stride = n_ + 1;
    for (std::size_t q = 0; q < packed_; ++q) {
        const double* p = prefix_.data() + q * stride;
        out.m[q] = p[interval.end] - p[interval.start - 1];
    }
    return out;
}

Eigen::VectorXd MomentTable::to_raw_beta(const CovariateSubset& subset,
                                         const SubsetSolve& solve) const {
    Eigen::VectorXd beta = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(d_ + 1));
    double intercept = means_[d_ + 1];
    for (std::size_t j = 0; j < solve.k; ++j) {
        const auto c = subset.columns()[j];
        if (c == d_) {
            intercept += solve.beta[j];
        } else {
            beta(static_cast<Eigen::Index>(c)) = solve.beta[j];
            intercept -= solve.beta[j] * means_[c];
        }
    }
    beta(static_cast<Eigen::Index>(d_)) = intercept;
    return beta;
}

bool fit_subset(const BlockMoments& moments, const CovariateSubset& subset, SubsetSolve& out) {
    const auto cols = subset.columns();
    const std::size_t k = cols.size();
    const std::size_t y = moments.dim - 1;
    if (moments.count < static_cast<double>(k)) {
        return false;
    }

    // Scaled normal equations D G D u = D r, beta = D u, D = diag(G)^(-1/2).
    std::array<double, kMaxMomentDim * kMaxMomentDim> l{};
    std::array<double, kMaxMomentDim> scale{};
    std::array<double, kMaxMomentDim> rhs{};
    for (std::size_t i = 0; i < k; ++i) {
        const double g = moments.at(cols[i], cols[i]);
        if (!(g > 0.0)) {
            return false;
        }
        scale[i] = 1.0 / std::sqrt(g);
    }
    for (std::size_t i = 0; i < k; ++i) {
        for (std::size_t j = 0; j <= i; ++j) {
            l[i * k + j] = moments.at(cols[i], cols[j]) * scale[i] * scale[j];
        }
        rhs[i] = moments.at(cols[i], y) * scale[i];
    }
    // In-place Cholesky of the lower triangle.
    for (std::size_t j = 0; j < k; ++j) {
        double diag = l[j * k + j];
        for (std::size_t p = 0; p < j; ++p) {
            diag -= l[j * k + p] * l[j * k + p];
        }
        if (!(diag > kMomentPivotTolerance)) {
            return false;
        }
        diag = std::sqrt(diag);
        l[j * k + j] = diag;
        for (std::size_t i = j + 1; i < k; ++i) {
            double v = l[i * k + j];
            for (std::size_t p = 0; p < j; ++p) {
                v -= l[i * k + p] * l[j * k + p];
            }
            l[i * k + j] = v / diag;
        }
    }
    for (std::size_t i = 0; i < k; ++i) {
        double v = rhs[i];
        for (std::size_t p = 0; p < i; ++p) {
            v -= l[i * k + p] * rhs[p];
        }
        rhs[i] = v / l[i * k + i];
    }
    for (std::size_t i = k; i-- > 0;) {
        double v = rhs[i];
        for (std::size_t p = i + 1; p < k; ++p) {
            v -= l[p * k + i] * rhs[p];
        }
        rhs[i] = v / l[i * k + i];
    }
    out.k = k;
    for (std::size_t i = 0; i < k; ++i) {
        out.beta[i] = rhs[i] * scale[i];
    }
    return true;
}

double ssq(const BlockMoments& moments, const CovariateSubset& subset, const SubsetSolve& solve) {
    const auto cols = subset.columns();
    const std::size_t k = solve.k;
    const std::size_t y = moments.dim - 1;
    double total = moments.at(y, y);
    for (std::size_t i = 0; i < k; ++i) {
        const double bi = solve.beta[i];
        total -= 2.0 * bi * moments.at(cols[i], y);
        total += bi * bi * moments.at(cols[i], cols[i]);
        for (std::size_t j = 0; j < i; ++j) {
            total += 2.0 * bi * solve.beta[j] * moments.at(cols[i], cols[j]);
        }
    }
    return total > 0.0 ? total : 0.0;
}

} // namespace ccp
