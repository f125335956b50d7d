#include "ccp/stability.hpp"

#include "ccp/error.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace ccp {

namespace {

std::size_t ceil_fraction(std::size_t value, double fraction) {
    return static_cast<std::size_t>(std::ceil(fraction * static_cast<double>(value) - 1e-9));
}

const CovariateSubset& simplest(std::span<const CovariateSubset> subsets) {
    if (subsets.empty()) {
        throw InputError("empty subset list");
    }
    const CovariateSubset* best = &subsets.front();
    for (const auto& s : subsets) {
        if (CovariateSubset::simpler(s, *best)) {
            best = &s;
        }
    }
    return *best;
}

} // namespace

PartitionScheme partition(Interval interval, std::size_t s) {
    if (s < 2) {
        throw InputError("block length s must be at least 2, got " + std::to_string(s));
    }
    PartitionScheme scheme{interval, s, {}};
    const auto len = interval.length();
    if (len < 2 * s) {
        scheme.blocks.push_back(interval);
        return scheme;
    }
    const auto m = len / s;
    for (std::size_t r = 0; r + 1 < m; ++r) {
        const auto start = interval.start + r * s;
        scheme.blocks.push_back({start, start + s - 1});
    }
    scheme.blocks.push_back({interval.start + (m - 1) * s, interval.end});
    return scheme;
}

Instability instability(const MomentTable& table, Interval interval, std::size_t s,
                        std::span<const CovariateSubset> subsets) {
    const auto scheme = partition(interval, s);
    if (scheme.m() == 1) {
        return {0.0, simplest(subsets)};
    }
    const auto whole = table.block(interval);
    std::vector<BlockMoments> in(scheme.m());
    std::vector<BlockMoments> out(scheme.m());
    for (std::size_t r = 0; r < scheme.m(); ++r) {
        in[r] = table.block(scheme.blocks[r]);
        out[r] = whole - in[r];
    }

    bool found = false;
    Instability best;
    SubsetSolve solve;
    for (const auto& subset : subsets) {
        double total = 0.0;
        bool ok = true;
        for (std::size_t r = 0; r < scheme.m(); ++r) {
            if (!fit_subset(in[r], subset, solve)) {
                ok = false;
                break;
            }
            const double v_out = ssq(out[r], subset, solve) / out[r].count;
            const double v_in = ssq(in[r], subset, solve) / in[r].count;
            total += (v_out - v_in) * (v_out - v_in);
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
        throw SingularFitError("every subset has a singular block fit on " + to_string(interval) +
                               " with s = " + std::to_string(s));
    }
    return best;
}

double stability_loss(const MomentTable& table, Interval interval, std::size_t i,
                      std::size_t s, std::span<const CovariateSubset> subsets) {
    if (i < interval.start + 2 || i + 1 > interval.end) {
        throw IntervalError("split point " + std::to_string(i) + " not inside " +
                            to_string(interval));
    }
    const Interval left{interval.start, i - 1};
    const Interval right{i, interval.end};
    const auto c_left = instability(table, left, s, subsets).value;
    const auto c_right = instability(table, right, s, subsets).value;
    const auto m = partition(left, s).m() + partition(right, s).m();
    return (c_left + c_right) / static_cast<double>(m);
}

std::size_t default_block_length(std::size_t length, std::size_t d) {
    return std::max(ceil_fraction(length, 0.1), 2 * (d + 3));
}

std::size_t default_grid_step(std::size_t n) {
    return std::max<std::size_t>(ceil_fraction(n, 0.01), 1);
}

std::size_t default_trim(std::size_t length) {
    return std::max<std::size_t>(ceil_fraction(length, 0.1), 10);
}

std::vector<std::size_t> grid_points(Interval interval, std::size_t n, const GridSpec& grid) {
    const auto lo = interval.start + 2;
    const auto hi = interval.end >= 1 ? interval.end - 1 : 0;
    std::vector<std::size_t> points;
    if (!grid.points.empty()) {
        for (auto p : grid.points) {
            if (p >= lo && p <= hi) {
                points.push_back(p);
            }
        }
        std::sort(points.begin(), points.end());
        points.erase(std::unique(points.begin(), points.end()), points.end());
        return points;
    }
    const auto step = grid.step == 0 ? default_grid_step(n) : grid.step;
    const auto trim = grid.trim.value_or(default_trim(interval.length()));
    if (interval.length() <= 2 * trim) {
        return points;
    }
    for (auto p = std::max(interval.start + trim, lo); p + trim <= interval.end && p <= hi;
         p += step) {
        points.push_back(p);
    }
    return points;
}

LossCurve loss_curve(const MomentTable& table, Interval interval, std::size_t s,
                     const GridSpec& grid, std::span<const CovariateSubset> subsets) {
    LossCurve curve{interval, s, grid_points(interval, table.n(), grid), {}};
    if (curve.grid_points.empty()) {
        throw IntervalError("no grid points inside " + to_string(interval) + " after trimming");
    }
    curve.values.reserve(curve.grid_points.size());
    for (auto i : curve.grid_points) {
        curve.values.push_back(stability_loss(table, interval, i, s, subsets));
    }
    return curve;
}

SingleEstimate localize_single(const MomentTable& table, Interval interval, std::size_t s,
                               const GridSpec& grid, std::span<const CovariateSubset> subsets) {
    SingleEstimate est;
    est.curve = loss_curve(table, interval, s, grid, subsets);
    std::size_t best = 0;
    for (std::size_t j = 1; j < est.curve.values.size(); ++j) {
        if (est.curve.values[j] < est.curve.values[best]) {
            best = j;
        }
    }
    est.point = est.curve.grid_points[best];
    est.loss = est.curve.values[best];
    return est;
}

} // namespace ccp
