#pragma once

// Interval partitioning, minimal OLS instability, the causal stability loss
// and argmin localization of a single CCP.

#include "ccp/dataset.hpp"
#include "ccp/moments.hpp"

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

namespace ccp {

/// Blocks P_1..P_m of an interval. When |I| >= 2s the first m-1 blocks have
/// length s and the last takes the remainder; otherwise m = 1 and the single
/// block is its own complement.
struct PartitionScheme {
    Interval interval;
    std::size_t s = 2;
    std::vector<Interval> blocks;

    std::size_t m() const { return blocks.size(); }
};

/// Throws InputError when s < 2.
PartitionScheme partition(Interval interval, std::size_t s);

struct Instability {
    double value = 0.0;
    CovariateSubset subset;
};

/// min over subsets of sum_r (V(P_r^c, P_r) - V(P_r, P_r))^2, where V(A, B) is
/// the mean squared residual on A of the fit on B. Subsets with a singular
/// block fit are skipped; throws SingularFitError if every subset is.
/// Ties go to the simpler subset.
Instability instability(const MomentTable& table, Interval interval, std::size_t s,
                        std::span<const CovariateSubset> subsets);

/// (C(I_{i-}) + C(I_{i+})) / (m(I_{i-}) + m(I_{i+})) with I_{i-} = start..i-1
/// and I_{i+} = i..end. Throws IntervalError unless start + 2 <= i <= end - 1.
double stability_loss(const MomentTable& table, Interval interval, std::size_t i,
                       std::size_t s, std::span<const CovariateSubset> subsets);

/// Block length used when none is configured: max(ceil(0.1 |I|), 2(d+3)).
std::size_t default_block_length(std::size_t length, std::size_t d);

/// max(ceil(0.01 n), 1)
std::size_t default_grid_step(std::size_t n);

/// max(ceil(0.1 |I|), 10)
std::size_t default_trim(std::size_t length);

struct GridSpec {
    /// 0 selects default_grid_step(n).
    std::size_t step = 0;
    /// Points excluded at each end; unset selects default_trim(|I|).
    std::optional<std::size_t> trim;
    /// When non-empty, used as-is (points outside the valid range dropped).
    std::vector<std::size_t> points;
};

/// Grid points start+T, start+T+step, ... <= end-T, restricted to the valid
/// split range start+2..end-1. May be empty.
std::vector<std::size_t> grid_points(Interval interval, std::size_t n, const GridSpec& grid);

struct LossCurve {
    Interval interval;
    std::size_t s = 2;
    std::vector<std::size_t> grid_points;
    std::vector<double> values;
};

/// Throws IntervalError when the grid is empty.
LossCurve loss_curve(const MomentTable& table, Interval interval, std::size_t s,
                     const GridSpec& grid, std::span<const CovariateSubset> subsets);

struct SingleEstimate {
    std::size_t point = 0;
    double loss = 0.0;
    LossCurve curve;
};

/// argmin of the loss curve; ties go to the smallest index.
SingleEstimate localize_single(const MomentTable& table, Interval interval, std::size_t s,
                               const GridSpec& grid, std::span<const CovariateSubset> subsets);

} // namespace ccp
