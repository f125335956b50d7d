#include "ccp/simulator.hpp"

#include "ccp/error.hpp"
#include "ccp/rng.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>

namespace ccp {

namespace {

std::size_t relative_position(double fraction, std::size_t n) {
    return static_cast<std::size_t>(std::ceil(fraction * static_cast<double>(n) + 1.0 - 1e-9));
}

double parse_fraction(const std::string& text, const std::string& name) {
    double value = 0.0;
    const auto* first = text.data();
    const auto* last = text.data() + text.size();
    const auto [ptr, ec] = std::from_chars(first, last, value);
    if (ec != std::errc{} || ptr != last || !(value > 0.0 && value < 1.0)) {
        throw InputError("schedule " + name + ": relative location must lie in (0, 1)");
    }
    return value;
}

double round2(double v) {
    return std::round(v * 100.0) / 100.0;
}

bool is_rcp(const LinearScmSegment& before, const LinearScmSegment& after) {
    const auto full = CovariateSubset::full(before.d());
    const auto sb = system_moments(before);
    const auto sa = system_moments(after);
    const auto diff = (population_ols(sb, full) - population_ols(sa, full)).cwiseAbs().maxCoeff();
    const auto dv = std::abs(population_residual_variance(sb, full) -
                             population_residual_variance(sa, full));
    return diff > kOracleTolerance || dv > kOracleTolerance;
}

ScmSchedule assemble(std::string name, std::size_t n, std::vector<Breakpoint> breaks,
                     std::vector<ScmSegmentParams> segments) {
    ScmSchedule s{std::move(name), n, std::move(breaks), std::move(segments)};
    s.validate();
    return s;
}

// Segment values after `causal` causal and `noncausal` non-causal changes,
// each scaling means and coefficients by 1.5 and variances by 1.5.
ScmSegmentParams scaled(int causal, int noncausal) {
    const double c = std::pow(1.5, causal);
    const double nc = std::pow(1.5, noncausal);
    ScmSegmentParams p;
    p.mu1 = p.mu2 = p.mu3 = p.mu4 = nc;
    p.sigma1 = p.sigma2 = p.sigma3 = p.sigma4 = round2(std::sqrt(nc));
    p.a12 = p.a53 = p.a43 = nc;
    p.muY = c;
    p.sigmaY = round2(std::sqrt(c));
    p.b15 = p.b25 = c;
    return p;
}

LinearScmSegment make_segment(std::size_t p, std::vector<std::size_t> observed) {
    LinearScmSegment seg;
    seg.b = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(p), static_cast<Eigen::Index>(p));
    seg.mu = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(p));
    seg.sigma2 = Eigen::VectorXd::Ones(static_cast<Eigen::Index>(p));
    seg.observed = std::move(observed);
    return seg;
}

} // namespace

LinearScmSegment ScmSegmentParams::to_scm() const {
    // 0 = X1, 1 = X2, 2 = Y, 3 = X4, 4 = X3
    auto seg = make_segment(5, {0, 1, 4, 3, 2});
    seg.b(1, 0) = a12;
    seg.b(2, 0) = b15;
    seg.b(2, 1) = b25;
    seg.b(4, 2) = a53;
    seg.b(4, 3) = a43;
    seg.mu << mu1, mu2, muY, mu4, mu3;
    seg.sigma2 << sigma1 * sigma1, sigma2 * sigma2, sigmaY * sigmaY, sigma4 * sigma4,
        sigma3 * sigma3;
    return seg;
}

std::string to_string(ChangeLabel label) {
    return label == ChangeLabel::Ccp ? "CCP" : "NCCP";
}

ChangeLabel parse_label(const std::string& text) {
    if (text == "CCP") {
        return ChangeLabel::Ccp;
    }
    if (text == "NCCP") {
        return ChangeLabel::Nccp;
    }
    throw InputError("unknown change label '" + text + "' (expected CCP or NCCP)");
}

void ScmSchedule::validate() const {
    if (n < 2) {
        throw InputError("schedule " + name + ": n must be at least 2");
    }
    if (segments.size() != breakpoints.size() + 1) {
        throw InputError("schedule " + name + ": need exactly one more segment than breakpoints");
    }
    for (std::size_t r = 0; r < breakpoints.size(); ++r) {
        const auto k = breakpoints[r].index;
        if (k < 2 || k > n || (r > 0 && k <= breakpoints[r - 1].index)) {
            throw InputError("schedule " + name + ": breakpoints must increase within 2.." +
                             std::to_string(n));
        }
    }
    for (const auto& seg : segments) {
        for (double sd : {seg.sigma1, seg.sigma2, seg.sigma3, seg.sigma4, seg.sigmaY}) {
            if (!(sd >= 0.0)) {
                throw InputError("schedule " + name + ": negative noise standard deviation");
            }
        }
    }
    for (std::size_t r = 0; r < breakpoints.size(); ++r) {
        const auto before = segments[r].to_scm();
        const auto after = segments[r + 1].to_scm();
        const bool ccp = is_ccp(before, after);
        const auto where = "schedule " + name + " at " + std::to_string(breakpoints[r].index);
        if (breakpoints[r].label == ChangeLabel::Ccp && !ccp) {
            throw InputError(where + ": labelled CCP but an invariant subset exists");
        }
        if (breakpoints[r].label == ChangeLabel::Nccp) {
            if (ccp) {
                throw InputError(where + ": labelled NCCP but no subset is invariant");
            }
            if (!is_rcp(before, after)) {
                throw InputError(where + ": labelled NCCP but the regression does not change");
            }
        }
    }
}

PiecewiseScm ScmSchedule::to_piecewise() const {
    std::vector<std::size_t> starts{1};
    for (const auto& b : breakpoints) {
        starts.push_back(b.index);
    }
    std::vector<LinearScmSegment> segs;
    for (const auto& p : segments) {
        segs.push_back(p.to_scm());
    }
    return PiecewiseScm(n, std::move(starts), std::move(segs));
}

std::vector<std::size_t> ScmSchedule::points(ChangeLabel label) const {
    std::vector<std::size_t> out;
    for (const auto& b : breakpoints) {
        if (b.label == label) {
            out.push_back(b.index);
        }
    }
    return out;
}

std::vector<std::size_t> ScmSchedule::all_points() const {
    std::vector<std::size_t> out;
    for (const auto& b : breakpoints) {
        out.push_back(b.index);
    }
    return out;
}

Dataset sample_piecewise(const PiecewiseScm& scm, std::uint64_t seed) {
    const auto n = scm.n();
    const auto d = scm.d();
    const auto& segs = scm.segments();
    const auto& starts = scm.starts();
    std::vector<std::vector<std::size_t>> orders;
    std::vector<Eigen::VectorXd> sds;
    for (const auto& seg : segs) {
        orders.push_back(seg.topological_order());
        sds.push_back(seg.sigma2.cwiseSqrt());
    }

    Eigen::MatrixXd x(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d + 1));
    Eigen::VectorXd y(static_cast<Eigen::Index>(n));
    std::size_t r = 0;
    Eigen::VectorXd v;
    for (std::size_t i = 1; i <= n; ++i) {
        while (r + 1 < segs.size() && i >= starts[r + 1]) {
            ++r;
        }
        const auto& seg = segs[r];
        v = Eigen::VectorXd::Zero(seg.b.rows());
        rng::Stream stream(seed, i);
        for (auto var : orders[r]) {
            const auto vi = static_cast<Eigen::Index>(var);
            v(vi) = seg.mu(vi) + sds[r](vi) * stream.normal() + seg.b.row(vi).dot(v);
        }
        const auto row = static_cast<Eigen::Index>(i - 1);
        for (std::size_t j = 0; j < d; ++j) {
            x(row, static_cast<Eigen::Index>(j)) = v(static_cast<Eigen::Index>(seg.observed[j]));
        }
        x(row, static_cast<Eigen::Index>(d)) = 1.0;
        y(row) = v(static_cast<Eigen::Index>(seg.observed[d]));
    }
    return Dataset(std::move(x), std::move(y));
}

Dataset generate(const ScmSchedule& schedule, std::uint64_t seed) {
    return sample_piecewise(schedule.to_piecewise(), seed);
}

ScmSchedule builtin_schedule(const std::string& name, std::size_t n) {
    const auto colon = name.find(':');
    const auto base = name.substr(0, colon);
    const auto arg = colon == std::string::npos ? std::string{} : name.substr(colon + 1);
    auto need_arg = [&](bool wanted) {
        if (wanted && arg.empty()) {
            throw InputError("schedule " + base + " needs a relative location, e.g. " + base +
                             ":0.5");
        }
        if (!wanted && colon != std::string::npos) {
            throw InputError("schedule " + base + " takes no argument");
        }
    };
    auto check_n = [&](std::size_t minimum) {
        if (n < minimum) {
            throw InputError("schedule " + name + " needs n >= " + std::to_string(minimum));
        }
    };
    using L = ChangeLabel;

    if (base == "detection") {
        need_arg(true);
        check_n(10);
        ScmSegmentParams before;
        if (arg == "none") {
            return assemble(name, n, {}, {before});
        }
        auto after = before;
        after.b15 = after.b25 = 2.0;
        return assemble(name, n, {{relative_position(parse_fraction(arg, name), n), L::Ccp}},
                        {before, after});
    }
    if (base == "exp1") {
        need_arg(false);
        check_n(8);
        ScmSegmentParams s1;
        ScmSegmentParams s2{1.50, 0.50, 0.50, 1.50, 1.00, 0.71, 0.71, 1.22, 1.22, 1.00,
                            1.50, 1.50, 0.50, 1.00, 1.00};
        ScmSegmentParams s3{1.50, 0.50, 0.50, 1.50, 0.50, 0.71, 0.71, 1.22, 1.22, 1.22,
                            1.50, 1.50, 0.50, 1.50, 0.50};
        ScmSegmentParams s4{0.75, 0.75, 0.25, 0.75, 0.50, 0.50, 0.50, 1.50, 0.87, 1.22,
                            2.25, 0.75, 0.25, 1.50, 0.50};
        return assemble(name, n,
                        {{relative_position(0.25, n), L::Nccp},
                         {relative_position(0.5, n), L::Ccp},
                         {relative_position(0.75, n), L::Nccp}},
                        {s1, s2, s3, s4});
    }
    if (base == "exp2") {
        need_arg(true);
        check_n(10);
        const double nu = parse_fraction(arg, name);
        std::vector<Breakpoint> breaks{{relative_position(0.25, n), L::Nccp},
                                       {relative_position(nu, n), L::Ccp},
                                       {relative_position(0.75, n), L::Nccp}};
        std::sort(breaks.begin(), breaks.end(),
                  [](const Breakpoint& a, const Breakpoint& b) { return a.index < b.index; });
        for (std::size_t r = 1; r < breaks.size(); ++r) {
            if (breaks[r].index == breaks[r - 1].index) {
                throw InputError("schedule " + name + ": CCP coincides with an NCCP");
            }
        }
        std::vector<ScmSegmentParams> segs{scaled(0, 0)};
        int causal = 0;
        int noncausal = 0;
        for (const auto& b : breaks) {
            (b.label == L::Ccp ? causal : noncausal) += 1;
            segs.push_back(scaled(causal, noncausal));
        }
        return assemble(name, n, std::move(breaks), std::move(segs));
    }
    if (base == "exp3") {
        need_arg(false);
        check_n(10);
        ScmSegmentParams s1;
        auto s2 = s1;
        s2.b25 = 0.0;
        auto s3 = s2;
        s3.mu3 = s3.mu4 = 2.0;
        s3.a53 = 2.0;
        auto s4 = s3;
        s4.sigmaY = 2.0;
        s4.b15 = 0.0;
        s4.b25 = 1.0;
        return assemble(name, n,
                        {{relative_position(0.2, n), L::Ccp},
                         {relative_position(0.5, n), L::Nccp},
                         {relative_position(0.8, n), L::Ccp}},
                        {s1, s2, s3, s4});
    }
    if (base == "exp4") {
        need_arg(false);
        check_n(8);
        return assemble(name, n,
                        {{relative_position(0.25, n), L::Ccp}, {relative_position(0.75, n), L::Ccp}},
                        {scaled(0, 0), scaled(1, 0), scaled(2, 0)});
    }
    if (base == "exp5") {
        need_arg(false);
        check_n(4);
        const auto k = static_cast<std::size_t>(std::ceil(0.5 * static_cast<double>(n) - 1e-9));
        return assemble(name, n, {{std::max<std::size_t>(k, 2), L::Ccp}},
                        {scaled(0, 0), scaled(1, 0)});
    }
    throw InputError("unknown schedule '" + name +
                     "' (expected detection:<nu>, detection:none, exp1, exp2:<nu>, exp3, exp4, "
                     "exp5)");
}

std::vector<LinearScmSegment> example_segments(const std::string& name) {
    if (name == "example1") {
        // 0 = X1, 1 = X2, 2 = Y, 3 = X3
        auto base = make_segment(4, {0, 1, 3, 2});
        base.b(2, 0) = 1.0;
        base.b(2, 1) = 1.0;
        base.b(3, 2) = 1.0;
        auto s2 = base;
        s2.sigma2(1) = 4.0;
        s2.sigma2(3) = 4.0;
        auto s3 = s2;
        s3.b(2, 0) = 0.0;
        s3.b(3, 0) = 1.0;
        return {base, s2, s3};
    }
    if (name == "example2") {
        // 0 = H, 1 = X1, 2 = Y
        auto s1 = make_segment(3, {1, 2});
        s1.b(1, 0) = 1.0;
        s1.b(2, 0) = 1.0;
        s1.b(2, 1) = 1.0;
        auto s2 = s1;
        s2.sigma2(0) = 2.0;
        auto s3 = s2;
        s3.b(1, 0) = 0.0;
        return {s1, s2, s3};
    }
    if (name == "appendixB") {
        // 0 = X1, 1 = Y, 2 = X2
        auto s1 = make_segment(3, {0, 2, 1});
        s1.b(1, 0) = 2.0;
        s1.b(2, 1) = 3.0;
        auto s2 = s1;
        s2.b(1, 0) = 1.0;
        s2.b(2, 1) = 8.0 / 3.0;
        s2.sigma2(2) = 2.0;
        s2.sigma2(1) = 18.0 / 16.0;
        return {s1, s2};
    }
    throw InputError("unknown example '" + name + "' (expected example1, example2, appendixB)");
}

ExampleData example_generator(const std::string& name,
                              const std::vector<std::size_t>& segment_lengths,
                              std::uint64_t seed) {
    auto segments = example_segments(name);
    if (segment_lengths.size() != segments.size()) {
        throw InputError("example " + name + " has " + std::to_string(segments.size()) +
                         " segments, got " + std::to_string(segment_lengths.size()) + " lengths");
    }
    std::vector<std::size_t> starts;
    std::size_t next = 1;
    for (auto len : segment_lengths) {
        if (len == 0) {
            throw InputError("example segment lengths must be positive");
        }
        starts.push_back(next);
        next += len;
    }
    PiecewiseScm scm(next - 1, starts, segments);
    return {sample_piecewise(scm, seed), std::move(segments), std::move(starts)};
}

void to_json(nlohmann::json& j, const ScmSegmentParams& p) {
    j = nlohmann::json{{"mu1", p.mu1},       {"mu2", p.mu2},       {"mu3", p.mu3},
                       {"mu4", p.mu4},       {"muY", p.muY},       {"sigma1", p.sigma1},
                       {"sigma2", p.sigma2}, {"sigma3", p.sigma3}, {"sigma4", p.sigma4},
                       {"sigmaY", p.sigmaY}, {"a12", p.a12},       {"a53", p.a53},
                       {"a43", p.a43},       {"b15", p.b15},       {"b25", p.b25}};
}

void from_json(const nlohmann::json& j, ScmSegmentParams& p) {
    ScmSegmentParams defaults;
    p.mu1 = j.value("mu1", defaults.mu1);
    p.mu2 = j.value("mu2", defaults.mu2);
    p.mu3 = j.value("mu3", defaults.mu3);
    p.mu4 = j.value("mu4", defaults.mu4);
    p.muY = j.value("muY", defaults.muY);
    p.sigma1 = j.value("sigma1", defaults.sigma1);
    p.sigma2 = j.value("sigma2", defaults.sigma2);
    p.sigma3 = j.value("sigma3", defaults.sigma3);
    p.sigma4 = j.value("sigma4", defaults.sigma4);
    p.sigmaY = j.value("sigmaY", defaults.sigmaY);
    p.a12 = j.value("a12", defaults.a12);
    p.a53 = j.value("a53", defaults.a53);
    p.a43 = j.value("a43", defaults.a43);
    p.b15 = j.value("b15", defaults.b15);
    p.b25 = j.value("b25", defaults.b25);
}

void to_json(nlohmann::json& j, const ScmSchedule& s) {
    auto breaks = nlohmann::json::array();
    for (const auto& b : s.breakpoints) {
        breaks.push_back({{"index", b.index}, {"label", to_string(b.label)}});
    }
    j = nlohmann::json{{"name", s.name}, {"n", s.n}, {"breakpoints", breaks},
                       {"segments", s.segments}};
}

void from_json(const nlohmann::json& j, ScmSchedule& s) {
    try {
        s.name = j.value("name", std::string{"custom"});
        s.n = j.at("n").get<std::size_t>();
        s.breakpoints.clear();
        for (const auto& b : j.at("breakpoints")) {
            s.breakpoints.push_back(
                {b.at("index").get<std::size_t>(), parse_label(b.at("label").get<std::string>())});
        }
        s.segments = j.at("segments").get<std::vector<ScmSegmentParams>>();
    } catch (const nlohmann::json::exception& e) {
        throw InputError(std::string("schedule JSON: ") + e.what());
    }
    s.validate();
}

nlohmann::json truth_json(const ScmSchedule& schedule, std::uint64_t seed) {
    auto breaks = nlohmann::json::array();
    for (const auto& b : schedule.breakpoints) {
        breaks.push_back({{"index", b.index}, {"label", to_string(b.label)}});
    }
    return {{"schema", "ccp-truth/1"},
            {"n", schedule.n},
            {"schedule", schedule.name},
            {"seed", seed},
            {"breakpoints", breaks}};
}

} // namespace ccp
