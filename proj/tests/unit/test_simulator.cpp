#include "ccp/error.hpp"
#include "ccp/moments.hpp"
#include "ccp/rng.hpp"
#include "ccp/simulator.hpp"

#include "oracles.hpp"

#include <catch_amalgamated.hpp>

#include <cmath>

#include <Eigen/LU>

using namespace ccp;

TEST_CASE("builtin schedule breakpoints") {
    const auto e1 = builtin_schedule("exp1", 1000);
    CHECK(e1.points(ChangeLabel::Ccp) == std::vector<std::size_t>{501});
    CHECK(e1.points(ChangeLabel::Nccp) == std::vector<std::size_t>{251, 751});
    CHECK(e1.all_points() == std::vector<std::size_t>{251, 501, 751});
    CHECK(e1.segments.size() == 4);

    const auto e3 = builtin_schedule("exp3", 4000);
    CHECK(e3.points(ChangeLabel::Ccp) == std::vector<std::size_t>{801, 3201});
    CHECK(e3.points(ChangeLabel::Nccp) == std::vector<std::size_t>{2001});

    const auto det = builtin_schedule("detection:0.5", 1000);
    REQUIRE(det.breakpoints.size() == 1);
    CHECK(det.breakpoints[0] == Breakpoint{501, ChangeLabel::Ccp});
    CHECK(det.segments[0].b15 == 1.0);
    CHECK(det.segments[1].b15 == 2.0);
    CHECK(det.segments[1].b25 == 2.0);
    CHECK(builtin_schedule("detection:0.33", 1000).breakpoints[0].index == 331);
    CHECK(builtin_schedule("detection:none", 100).breakpoints.empty());

    const auto e5 = builtin_schedule("exp5", 4000);
    CHECK(e5.points(ChangeLabel::Ccp) == std::vector<std::size_t>{2000});
    CHECK(e5.segments[1].b15 == 1.5);

    const auto e4 = builtin_schedule("exp4", 1000);
    CHECK(e4.points(ChangeLabel::Ccp) == std::vector<std::size_t>{251, 751});

    const auto e2 = builtin_schedule("exp2:0.1", 2000);
    CHECK(e2.all_points() == std::vector<std::size_t>{201, 501, 1501});
    CHECK(e2.points(ChangeLabel::Ccp) == std::vector<std::size_t>{201});

    CHECK_THROWS_AS(builtin_schedule("exp9", 100), InputError);
    CHECK_THROWS_AS(builtin_schedule("detection", 100), InputError);
    CHECK_THROWS_AS(builtin_schedule("exp1:0.2", 100), InputError);
    CHECK_THROWS_AS(builtin_schedule("exp2:0.25", 100), InputError);
    CHECK_THROWS_AS(builtin_schedule("detection:1.5", 100), InputError);
}

TEST_CASE("every builtin label agrees with the oracle") {
    for (const auto* name : {"detection:0.1", "detection:0.9", "exp1", "exp2:0.1", "exp2:0.5",
                             "exp2:0.9", "exp3", "exp4", "exp5"}) {
        const auto s = builtin_schedule(name, 1000);
        for (std::size_t r = 0; r < s.breakpoints.size(); ++r) {
            const bool ccp = is_ccp(s.segments[r].to_scm(), s.segments[r + 1].to_scm());
            INFO(name << " breakpoint " << s.breakpoints[r].index);
            CHECK(ccp == (s.breakpoints[r].label == ChangeLabel::Ccp));
        }
    }
}

TEST_CASE("mislabelled schedules are rejected") {
    ScmSegmentParams a;
    ScmSegmentParams b;
    b.a53 = 2.0;
    ScmSchedule wrong{"wrong", 100, {{51, ChangeLabel::Ccp}}, {a, b}};
    CHECK_THROWS_AS(wrong.validate(), InputError);
    wrong.breakpoints[0].label = ChangeLabel::Nccp;
    CHECK_NOTHROW(wrong.validate());

    ScmSchedule no_change{"flat", 100, {{51, ChangeLabel::Nccp}}, {a, a}};
    CHECK_THROWS_AS(no_change.validate(), InputError);

    ScmSchedule shape{"shape", 100, {{51, ChangeLabel::Nccp}}, {a}};
    CHECK_THROWS_AS(shape.validate(), InputError);
    ScmSchedule order{"order", 100, {{60, ChangeLabel::Nccp}, {50, ChangeLabel::Nccp}}, {a, b, a}};
    CHECK_THROWS_AS(order.validate(), InputError);
    ScmSchedule range{"range", 100, {{1, ChangeLabel::Nccp}}, {a, b}};
    CHECK_THROWS_AS(range.validate(), InputError);
}

TEST_CASE("generation is deterministic and seed dependent") {
    const auto s = builtin_schedule("exp3", 500);
    const auto a = generate(s, 17);
    const auto b = generate(s, 17);
    const auto c = generate(s, 18);
    CHECK(a.x() == b.x());
    CHECK(a.y() == b.y());
    CHECK_FALSE(a.y() == c.y());
    CHECK(a.d() == 4);
    CHECK((a.x().col(4).array() == 1.0).all());
}

TEST_CASE("per-time-point streams do not shift with breakpoints") {
    // Same parameters before the first break, so the first rows coincide.
    const auto a = generate(builtin_schedule("detection:0.5", 400), 3);
    const auto b = generate(builtin_schedule("detection:0.8", 400), 3);
    CHECK(a.x().topRows(200) == b.x().topRows(200));
    CHECK(a.y().head(200) == b.y().head(200));
    // X1, X2 draws do not depend on the causal coefficients of Y.
    CHECK(a.x().col(0) == b.x().col(0));
}

TEST_CASE("sample mean of X1 under unit parameters") {
    const std::size_t n = 100000;
    const auto data = generate(builtin_schedule("detection:none", n), 99);
    const double mean = data.x().col(0).mean();
    CHECK(std::fabs(mean - 1.0) < 3.0 / std::sqrt(static_cast<double>(n)));
}

TEST_CASE("zero noise scales reproduce the structural recursion") {
    ScmSegmentParams p{0.5, -1.0, 2.0, 3.0, 0.25, 0, 0, 0, 0, 0, 2.0, 0.5, -1.5, 1.25, 0.75};
    ScmSchedule s{"det", 10, {}, {p}};
    const auto data = generate(s, 1);
    const double x1 = 0.5;
    const double x2 = 2.0 * x1 - 1.0;
    const double y = 1.25 * x1 + 0.75 * x2 + 0.25;
    const double x4 = 3.0;
    const double x3 = 0.5 * y - 1.5 * x4 + 2.0;
    for (Eigen::Index i = 0; i < 10; ++i) {
        CHECK(data.x()(i, 0) == x1);
        CHECK(data.x()(i, 1) == x2);
        CHECK(data.x()(i, 2) == x3);
        CHECK(data.x()(i, 3) == x4);
        CHECK(data.y()(i) == y);
    }
}

TEST_CASE("sample OLS per segment of the first experiment is within 3 SE of the oracle") {
    const std::size_t n = 4000;
    const auto s = builtin_schedule("exp1", n);
    const auto data = generate(s, 2024);
    const auto pw = s.to_piecewise();
    const auto full = CovariateSubset::full(4);
    const auto bounds = s.all_points();
    std::vector<Interval> segs;
    std::size_t start = 1;
    for (auto b : bounds) {
        segs.push_back({start, b - 1});
        start = b;
    }
    segs.push_back({start, n});
    int outside = 0;
    for (const auto& seg : segs) {
        const auto beta = testing::normal_equations_fit(data, seg, full);
        const auto truth = population_ols(pw.interval_moments(seg), full);
        const Eigen::MatrixXd x = data.x().middleRows(static_cast<Eigen::Index>(seg.start - 1),
                                                      static_cast<Eigen::Index>(seg.length()));
        const double sigma2 = testing::rss(data, beta, seg) / static_cast<double>(seg.length() - 5);
        const Eigen::MatrixXd cov = (x.transpose() * x).inverse() * sigma2;
        for (Eigen::Index j = 0; j < 5; ++j) {
            outside += std::fabs(beta(j) - truth(j)) > 3.0 * std::sqrt(cov(j, j)) ? 1 : 0;
        }
    }
    // 20 coefficients; a single 3 SE miss has probability about 5%.
    CHECK(outside <= 1);
}

TEST_CASE("example generators match the population moments") {
    const auto ex2 = example_generator("example2", {20000, 20000, 20000}, 5);
    REQUIRE(ex2.data.d() == 1);
    REQUIRE(ex2.starts == std::vector<std::size_t>{1, 20001, 40001});
    const double var[3] = {6.0, 10.0, 4.0};
    for (std::size_t r = 0; r < 3; ++r) {
        const auto y = ex2.data.y().segment(static_cast<Eigen::Index>(ex2.starts[r] - 1), 20000);
        const double v = (y.array() - y.mean()).square().sum() / 19999.0;
        CHECK(std::fabs(v - var[r]) < 0.05 * var[r]);
    }

    const auto b = example_generator("appendixB", {30000, 30000}, 6);
    const MomentTable table(b.data);
    const auto full = CovariateSubset::full(2);
    for (Interval seg : {Interval{1, 30000}, Interval{30001, 60000}}) {
        SubsetSolve solve;
        REQUIRE(fit_subset(table.block(seg), full, solve));
        const auto beta = table.to_raw_beta(full, solve);
        CHECK(std::fabs(beta(0) - 0.2) < 0.02);
        CHECK(std::fabs(beta(1) - 0.3) < 0.01);
    }
    CHECK_THROWS_AS(example_generator("example2", {10, 10}, 1), InputError);
    CHECK_THROWS_AS(example_generator("nope", {10}, 1), InputError);
}

TEST_CASE("schedule json round trip") {
    for (const auto* name : {"exp1", "exp3", "detection:0.3", "exp2:0.7"}) {
        const auto s = builtin_schedule(name, 777);
        nlohmann::json j = s;
        const auto back = j.get<ScmSchedule>();
        CHECK(back.name == s.name);
        CHECK(back.n == s.n);
        CHECK(back.breakpoints == s.breakpoints);
        CHECK(back.segments == s.segments);
        CHECK(nlohmann::json(back).dump() == j.dump());
    }
    const auto partial = nlohmann::json::parse(R"({"b15": 2.5})").get<ScmSegmentParams>();
    CHECK(partial.b15 == 2.5);
    CHECK(partial.mu1 == 1.0);
    CHECK(parse_label("CCP") == ChangeLabel::Ccp);
    CHECK(to_string(ChangeLabel::Nccp) == "NCCP");
    CHECK_THROWS_AS(parse_label("ccp?"), InputError);

    const auto truth = truth_json(builtin_schedule("exp1", 1000), 7);
    CHECK(truth["schema"] == "ccp-truth/1");
    CHECK(truth["breakpoints"].size() == 3);
    CHECK(truth["seed"] == 7);
}

TEST_CASE("random streams") {
    rng::Stream a(5, 10);
    rng::Stream b(5, 10);
    rng::Stream c(5, 11);
    for (int i = 0; i < 100; ++i) {
        const double u = a.uniform();
        CHECK(u > 0.0);
        CHECK(u < 1.0);
        CHECK(u == b.uniform());
    }
    CHECK(a.next_u64() != c.next_u64());
    CHECK(rng::derive_seed(1, 2, 3) != rng::derive_seed(1, 3, 2));

    rng::Stream z(42, 0);
    std::vector<double> draws(20000);
    for (auto& d : draws) {
        d = z.normal();
    }
    const double p = testing::ks_pvalue(draws, [](double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); });
    CHECK(p > 0.001);
}
