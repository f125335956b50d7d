#include "ccp/localization.hpp"

#include "ccp/error.hpp"

#include <algorithm>
#include <cmath>
#include <optional>

namespace ccp {

namespace {

void add_point(CcpEstimate& est, std::size_t point, Provenance prov) {
    const auto it = std::lower_bound(est.points.begin(), est.points.end(), point);
    const auto pos = it - est.points.begin();
    if (it != est.points.end() && *it == point) {
        return;
    }
    est.points.insert(it, point);
    est.provenance.insert(est.provenance.begin() + pos, std::move(prov));
}

// Loss argmin inside `interval`; falls back to the untrimmed interior when
// trimming leaves no grid point. Empty when the loss cannot be evaluated.
std::optional<std::size_t> localize(const MomentTable& table, Interval interval,
                                    std::span<const CovariateSubset> subsets,
                                    const SegmentationOptions& opts) {
    const auto s = opts.loss_block != 0 ? opts.loss_block
                                        : default_block_length(interval.length(), table.d());
    GridSpec grid = opts.grid;
    if (grid_points(interval, table.n(), grid).empty()) {
        grid.trim = 0;
        grid.points.clear();
    }
    if (grid_points(interval, table.n(), grid).empty()) {
        return std::nullopt;
    }
    try {
        return localize_single(table, interval, s, grid, subsets).point;
    } catch (const SingularFitError&) {
        return std::nullopt;
    }
}

} // namespace

CandidateSet CandidateSet::make(std::vector<std::size_t> points, std::size_t n) {
    std::sort(points.begin(), points.end());
    points.erase(std::unique(points.begin(), points.end()), points.end());
    for (auto p : points) {
        if (p < 2 || p > n) {
            throw InputError("candidate " + std::to_string(p) + " outside 2.." + std::to_string(n));
        }
    }
    return {std::move(points)};
}

CcpEstimate prune_candidates(const MomentTable& table, const CandidateSet& candidates,
                             std::span<const CovariateSubset> subsets, const PruneOptions& opts) {
    check_alpha(opts.alpha);
    const auto& k = candidates.points;
    const auto count = k.size();
    const double level = opts.bonferroni && count > 1 ? opts.alpha / static_cast<double>(count)
                                                      : opts.alpha;
    const auto min_len = min_testable_length(subsets);
    CcpEstimate est;
    for (std::size_t l = 0; l < count; ++l) {
        const auto lo = l == 0 ? std::size_t{1} : k[l - 1];
        const auto hi = l + 1 < count ? k[l + 1] - 1 : table.n();
        const Interval flank{lo, hi};
        if (flank.length() < min_len) {
            est.undecided.push_back(k[l]);
            continue;
        }
        const auto result = detect_ccp(table, flank, level, subsets, opts.test);
        if (result.detect) {
            add_point(est, k[l], {"prune", flank, result.combined_p_value});
        }
    }
    return est;
}

CcpEstimate binary_segmentation(const MomentTable& table, std::size_t s,
                                std::span<const CovariateSubset> subsets,
                                const SegmentationOptions& opts) {
    check_alpha(opts.alpha);
    if (s < 2) {
        throw InputError("minimal segmentation length must be at least 2");
    }
    const auto min_len = min_testable_length(subsets);
    CcpEstimate est;
    std::vector<Interval> stack{{1, table.n()}};
    while (!stack.empty()) {
        const auto iv = stack.back();
        stack.pop_back();
        if (iv.length() <= s || iv.length() < min_len) {
            continue;
        }
        const auto result = detect_ccp(table, iv, opts.alpha, subsets, opts.test);
        if (!result.detect) {
            continue;
        }
        const auto k = localize(table, iv, subsets, opts);
        if (!k) {
            continue;
        }
        add_point(est, *k, {"binseg", iv, result.combined_p_value});
        stack.push_back({*k, iv.end});
        stack.push_back({iv.start, *k - 1});
    }
    return est;
}

SeedLayers seeded_intervals(std::size_t n, double a, std::size_t s) {
    if (!(a >= 0.5 && a < 1.0)) {
        throw InputError("decay a must lie in [1/2, 1), got " + std::to_string(a));
    }
    if (s < 2 || s > n) {
        throw InputError("minimal segmentation length s must lie in 2..n");
    }
    SeedLayers out{n, a, s, {}};
    const double nd = static_cast<double>(n);
    const auto depth = static_cast<std::size_t>(
        std::floor(1.0 + std::log(nd / static_cast<double>(s)) / std::log(1.0 / a) + 1e-9));
    out.layers.push_back({{1, n}});
    for (std::size_t l = 2; l <= depth; ++l) {
        const double shrink = std::pow(a, static_cast<double>(l - 1));
        const double h = nd * shrink;
        const auto q = 2 * static_cast<std::size_t>(std::ceil(1.0 / shrink - 1e-9));
        const double step = (nd - h) / static_cast<double>(q - 1);
        std::vector<Interval> layer;
        for (std::size_t j = 1; j <= q; ++j) {
            const double offset = static_cast<double>(j - 1) * step;
            auto lo = static_cast<std::size_t>(std::floor(offset + 1e-9)) + 1;
            auto hi = static_cast<std::size_t>(std::ceil(offset + h - 1e-9));
            lo = std::clamp<std::size_t>(lo, 1, n);
            hi = std::clamp<std::size_t>(hi, 1, n);
            if (hi > lo) {
                layer.push_back({lo, hi});
            }
        }
        out.layers.push_back(std::move(layer));
    }
    return out;
}

CcpEstimate seeded_binseg_not(const MomentTable& table, const SeedLayers& layers,
                              std::span<const CovariateSubset> subsets,
                              const SeededOptions& opts, std::vector<SeededStep>* trace) {
    check_alpha(opts.alpha);
    if (layers.n != table.n()) {
        throw InputError("seeded intervals built for n = " + std::to_string(layers.n) +
                         ", data has n = " + std::to_string(table.n()));
    }
    const auto min_len = min_testable_length(subsets);

    struct Slot {
        Interval interval;
        bool alive = true;
        bool tested = false;
        bool reject = false;
        double p_value = 1.0;
    };
    std::vector<std::vector<Slot>> slots;
    for (const auto& layer : layers.layers) {
        std::vector<Slot> row;
        for (const auto& iv : layer) {
            row.push_back({iv});
        }
        slots.push_back(std::move(row));
    }
    auto evaluate = [&](Slot& slot) {
        if (slot.tested) {
            return;
        }
        slot.tested = true;
        if (slot.interval.length() < min_len) {
            return;
        }
        const auto r = detect_ccp(table, slot.interval, opts.alpha, subsets, opts.test);
        slot.reject = r.detect;
        slot.p_value = r.combined_p_value;
    };
    // Rejecting interval with the smallest p-value in one layer; ties go to
    // the narrower, then the earlier interval.
    auto pick = [&](std::vector<Slot>& row) -> Slot* {
        Slot* best = nullptr;
        for (auto& slot : row) {
            if (!slot.alive) {
                continue;
            }
            evaluate(slot);
            if (!slot.reject) {
                continue;
            }
            if (best == nullptr || slot.p_value < best->p_value ||
                (slot.p_value == best->p_value &&
                 (slot.interval.length() < best->interval.length() ||
                  (slot.interval.length() == best->interval.length() &&
                   slot.interval.start < best->interval.start)))) {
                best = &slot;
            }
        }
        return best;
    };

    CcpEstimate est;
    // Returns true when an estimate was added.
    auto accept = [&](Slot& slot) {
        const auto k = localize(table, slot.interval, subsets, opts);
        if (!k) {
            slot.alive = false;
            return false;
        }
        add_point(est, *k, {"seedbs", slot.interval, slot.p_value});
        for (auto& row : slots) {
            for (auto& other : row) {
                if (other.alive && other.interval.contains(*k)) {
                    other.alive = false;
                }
            }
        }
        if (trace != nullptr) {
            SeededStep step{slot.interval, *k, slot.p_value, {}};
            for (const auto& row : slots) {
                for (const auto& other : row) {
                    if (other.alive) {
                        step.surviving.push_back(other.interval);
                    }
                }
            }
            trace->push_back(std::move(step));
        }
        return true;
    };

    const auto depth = slots.size();
    if (opts.scan == SeededScan::LayerCounter) {
        for (std::size_t i = 0; i < depth; ++i) {
            auto& row = slots[depth - 1 - i];
            while (Slot* best = pick(row)) {
                if (accept(*best)) {
                    break;
                }
            }
        }
        return est;
    }

    bool progressed = true;
    while (progressed) {
        progressed = false;
        for (std::size_t i = 0; i < depth && !progressed; ++i) {
            auto& row = slots[depth - 1 - i];
            while (Slot* best = pick(row)) {
                if (accept(*best)) {
                    progressed = true;
                    break;
                }
            }
        }
    }
    return est;
}

std::vector<SegmentReport> validate_segments(const MomentTable& table,
                                             std::span<const std::size_t> points, double alpha,
                                             std::span<const CovariateSubset> subsets,
                                             const TestOptions& opts) {
    check_alpha(alpha);
    const auto n = table.n();
    std::vector<std::size_t> cuts(points.begin(), points.end());
    std::sort(cuts.begin(), cuts.end());
    cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());
    for (auto c : cuts) {
        if (c < 2 || c > n) {
            throw InputError("estimate " + std::to_string(c) + " outside 2.." + std::to_string(n));
        }
    }
    const auto min_len = min_testable_length(subsets);
    std::vector<SegmentReport> out;
    std::size_t start = 1;
    for (std::size_t j = 0; j <= cuts.size(); ++j) {
        const auto end = j < cuts.size() ? cuts[j] - 1 : n;
        SegmentReport rep;
        rep.interval = {start, end};
        if (rep.interval.length() >= min_len) {
            rep.testable = true;
            const auto r = detect_ccp(table, rep.interval, alpha, subsets, opts);
            rep.flagged = r.detect;
            rep.combined_p_value = r.combined_p_value;
        }
        out.push_back(rep);
        start = end + 1;
    }
    return out;
}

} // namespace ccp
