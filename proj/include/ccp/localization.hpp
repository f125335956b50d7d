#pragma once

// Multiple-CCP localization: candidate pruning, standard binary
// segmentation, seeded intervals and seeded binary segmentation with
// narrowest-over-threshold selection, plus post-hoc segment validation.
//
// A change point k separates time points k-1 and k, so a segment that
// starts at k is the first one governed by the new regime.

#include "ccp/dataset.hpp"
#include "ccp/invariance.hpp"
#include "ccp/moments.hpp"
#include "ccp/stability.hpp"

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace ccp {

/// Sorted, unique candidate locations in 2..n.
struct CandidateSet {
    std::vector<std::size_t> points;

    /// Sorts and deduplicates; throws InputError for points outside 2..n.
    static CandidateSet make(std::vector<std::size_t> points, std::size_t n);
};

struct Provenance {
    std::string method;
    Interval interval;
    double p_value = 1.0;
};

struct CcpEstimate {
    /// Sorted and unique.
    std::vector<std::size_t> points;
    /// provenance[j] belongs to points[j].
    std::vector<Provenance> provenance;
    /// Candidates whose flanking interval was too short to test (pruning only).
    std::vector<std::size_t> undecided;
};

struct PruneOptions {
    double alpha = 0.05;
    /// Test at alpha / |K| when there is more than one candidate.
    bool bonferroni = true;
    TestOptions test;
};

/// Keeps k_l iff detection fires on k_{l-1}..k_{l+1}-1 with k_0 = 1 and
/// k_{L+1} = n + 1.
CcpEstimate prune_candidates(const MomentTable& table, const CandidateSet& candidates,
                             std::span<const CovariateSubset> subsets,
                             const PruneOptions& opts = {});

struct SegmentationOptions {
    double alpha = 0.05;
    TestOptions test;
    /// Block length of the loss; 0 picks default_block_length(|I|, d) per
    /// interval.
    std::size_t loss_block = 0;
    GridSpec grid;
};

/// Recursive splitting at the loss argmin while |I| > s and detection fires.
CcpEstimate binary_segmentation(const MomentTable& table, std::size_t s,
                                std::span<const CovariateSubset> subsets,
                                const SegmentationOptions& opts = {});

struct SeedLayers {
    std::size_t n = 0;
    double a = 0.5;
    std::size_t s = 2;
    /// layers[0] is the whole range; later layers are narrower.
    std::vector<std::vector<Interval>> layers;

    std::size_t depth() const { return layers.size(); }
};

/// Throws InputError unless 1/2 <= a < 1 and 2 <= s <= n.
SeedLayers seeded_intervals(std::size_t n, double a, std::size_t s);

enum class SeededScan {
    /// After each detection, restart from the narrowest remaining layer.
    RescanNarrowest,
    /// One pass over the layers, at most one detection per layer.
    LayerCounter,
};

struct SeededOptions : SegmentationOptions {
    SeededScan scan = SeededScan::RescanNarrowest;
};

/// One accepted estimate and the intervals still alive afterwards.
struct SeededStep {
    Interval interval;
    std::size_t point = 0;
    double p_value = 1.0;
    std::vector<Interval> surviving;
};

CcpEstimate seeded_binseg_not(const MomentTable& table, const SeedLayers& layers,
                              std::span<const CovariateSubset> subsets,
                              const SeededOptions& opts = {},
                              std::vector<SeededStep>* trace = nullptr);

struct SegmentReport {
    Interval interval;
    bool testable = false;
    /// Detection fired: no subset looks invariant on this segment.
    bool flagged = false;
    double combined_p_value = 1.0;
};

/// Runs detection on 1..t1-1, t1..t2-1, ..., tk..n.
std::vector<SegmentReport> validate_segments(const MomentTable& table,
                                             std::span<const std::size_t> points, double alpha,
                                             std::span<const CovariateSubset> subsets,
                                             const TestOptions& opts = {});

} // namespace ccp
