#pragma once

// Prefix sums of the cross products of z = (X^1..X^d, 1, Y), so that the
// Gram matrix, X'Y and Y'Y of any block of consecutive rows cost O(d^2)
// instead of O(|block| d^2). Every least-squares quantity the tests and the
// loss need (RSS on the fitting block, RSS of that fit on another block) is
// a quadratic form in these moments.
//
// X^1..X^d and Y are centered by their global means before accumulation.
// Residuals do not change because every subset contains the intercept; only
// the intercept coefficient is shifted, and to_raw_beta undoes that.

#include "ccp/dataset.hpp"

#include <array>
#include <cstddef>
#include <utility>
#include <vector>

#include <Eigen/Core>

namespace ccp {

/// Largest supported d + 2 (covariates, intercept, response).
inline constexpr std::size_t kMaxMomentDim = 16;
inline constexpr std::size_t kMaxPacked = kMaxMomentDim * (kMaxMomentDim + 1) / 2;

/// Scaled Cholesky pivots below this are treated as rank deficiency.
inline constexpr double kMomentPivotTolerance = 1e-11;

/// Packed upper triangle of sum z z' over a block.
struct BlockMoments {
    std::size_t dim = 0;
    double count = 0.0;
    std::array<double, kMaxPacked> m{};

    static std::size_t index(std::size_t i, std::size_t j, std::size_t dim) {
        if (i > j) {
            std::swap(i, j);
        }
        return i * dim - (i * (i + 1)) / 2 + j;
    }
    double at(std::size_t i, std::size_t j) const { return m[index(i, j, dim)]; }

    BlockMoments& operator+=(const BlockMoments& other);
    BlockMoments& operator-=(const BlockMoments& other);
    friend BlockMoments operator+(BlockMoments a, const BlockMoments& b) { return a += b; }
    friend BlockMoments operator-(BlockMoments a, const BlockMoments& b) { return a -= b; }
};

/// Coefficients on the subset columns, in subset order, in centered units.
struct SubsetSolve {
    std::size_t k = 0;
    std::array<double, kMaxMomentDim> beta{};
};

class MomentTable {
public:
    /// Throws InputError when d + 2 > kMaxMomentDim.
    explicit MomentTable(const Dataset& data);

    std::size_t n() const { return n_; }
    std::size_t d() const { return d_; }

    /// Moments of rows start..end. Throws IntervalError when out of range.
    BlockMoments block(Interval interval) const;

    /// Coefficients for the uncentered design, length d + 1, zero off S.
    Eigen::VectorXd to_raw_beta(const CovariateSubset& subset, const SubsetSolve& solve) const;

private:
    std::size_t n_ = 0;
    std::size_t d_ = 0;
    std::size_t dim_ = 0;
    std::size_t packed_ = 0;
    std::vector<double> means_;
    // packed_ arrays of n_ + 1 prefix sums, stored back to back.
    std::vector<double> prefix_;
};

/// Least squares of Y on the subset columns from block moments. Returns false
/// (leaving `out` unspecified) when the block has fewer rows than |S| or the
/// scaled Gram matrix is numerically singular.
bool fit_subset(const BlockMoments& moments, const CovariateSubset& subset, SubsetSolve& out);

/// Sum of squared residuals of `solve` over the rows summarized by `moments`,
/// clamped at zero.
double ssq(const BlockMoments& moments, const CovariateSubset& subset, const SubsetSolve& solve);

} // namespace ccp
