#pragma once

// Seeded data from the five-node SCM
//   X1 := e1,  X2 := a12 X1 + e2,  Y := b15 X1 + b25 X2 + eY,
//   X4 := e4,  X3 := a53 Y + a43 X4 + e3,   e_j ~ N(mu_j, sigma_j^2)
// with piecewise-constant parameters, and from the small examples used as
// oracle fixtures. Every schedule carries ground-truth CCP/NCCP labels that
// are checked against the population oracle when the schedule is built.

#include "ccp/dataset.hpp"
#include "ccp/population.hpp"

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "json.hpp"

namespace ccp {

struct ScmSegmentParams {
    double mu1 = 1.0, mu2 = 1.0, mu3 = 1.0, mu4 = 1.0, muY = 1.0;
    double sigma1 = 1.0, sigma2 = 1.0, sigma3 = 1.0, sigma4 = 1.0, sigmaY = 1.0;
    double a12 = 1.0, a53 = 1.0, a43 = 1.0;
    double b15 = 1.0, b25 = 1.0;

    /// Variables ordered (X1, X2, Y, X4, X3); observed as X1, X2, X3, X4, Y.
    LinearScmSegment to_scm() const;

    friend bool operator==(const ScmSegmentParams&, const ScmSegmentParams&) = default;
};

enum class ChangeLabel { Ccp, Nccp };

std::string to_string(ChangeLabel label);
ChangeLabel parse_label(const std::string& text);

struct Breakpoint {
    /// First time point of the new regime.
    std::size_t index = 0;
    ChangeLabel label = ChangeLabel::Ccp;

    friend bool operator==(const Breakpoint&, const Breakpoint&) = default;
};

struct ScmSchedule {
    std::string name;
    std::size_t n = 0;
    std::vector<Breakpoint> breakpoints;
    std::vector<ScmSegmentParams> segments;

    /// Shape checks plus label verification: each CCP must be a CCP of the
    /// population model and each NCCP a regression change point that is not.
    /// Throws InputError on failure.
    void validate() const;

    PiecewiseScm to_piecewise() const;
    std::vector<std::size_t> points(ChangeLabel label) const;
    std::vector<std::size_t> all_points() const;
};

/// One row per time point sampled in causal order; stream (seed, i) drives
/// time point i.
Dataset generate(const ScmSchedule& schedule, std::uint64_t seed);

/// Names: "detection:<nu>", "detection:none", "exp1", "exp2:<nu>", "exp3",
/// "exp4", "exp5". Relative positions are rounded up. Throws InputError for
/// unknown names or lengths too short for the breakpoints.
ScmSchedule builtin_schedule(const std::string& name, std::size_t n);

/// "example1" (three segments, d = 3), "example2" (hidden confounder, d = 1),
/// "appendixB" (two segments, d = 2).
std::vector<LinearScmSegment> example_segments(const std::string& name);

struct ExampleData {
    Dataset data;
    std::vector<LinearScmSegment> segments;
    /// 1-based first time point of each segment.
    std::vector<std::size_t> starts;
};

/// Samples an example with the given segment lengths; hidden variables are
/// dropped from the dataset.
ExampleData example_generator(const std::string& name,
                              const std::vector<std::size_t>& segment_lengths,
                              std::uint64_t seed);

/// Samples any piecewise linear SCM; variables drawn in topological order.
Dataset sample_piecewise(const PiecewiseScm& scm, std::uint64_t seed);

void to_json(nlohmann::json& j, const ScmSegmentParams& p);
void from_json(const nlohmann::json& j, ScmSegmentParams& p);
void to_json(nlohmann::json& j, const ScmSchedule& s);
void from_json(const nlohmann::json& j, ScmSchedule& s);

/// Ground-truth sidecar for a generated dataset.
nlohmann::json truth_json(const ScmSchedule& schedule, std::uint64_t seed);

} // namespace ccp
