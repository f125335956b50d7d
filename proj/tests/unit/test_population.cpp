#include "ccp/error.hpp"
#include "ccp/population.hpp"
#include "ccp/simulator.hpp"

#include <catch_amalgamated.hpp>

#include <algorithm>
#include <array>
#include <cmath>

using namespace ccp;

namespace {

constexpr double kTol = 1e-9;

CovariateSubset one_based(std::vector<std::size_t> idx, std::size_t d) {
    return CovariateSubset::from_one_based(idx, d);
}

} // namespace

TEST_CASE("reduced-form moments of the hidden-confounder example") {
    const auto segs = example_segments("example2");
    const auto sys = system_moments(segs[0]);
    REQUIRE(sys.d() == 1);
    CHECK(sys.second_moment(0, 0) == Catch::Approx(2.0).margin(kTol));
    CHECK(sys.second_moment(0, 2) == Catch::Approx(3.0).margin(kTol));
    CHECK(sys.second_moment(2, 2) == Catch::Approx(6.0).margin(kTol));
    CHECK(sys.second_moment(1, 1) == 1.0);
    CHECK(sys.mean(1) == 1.0);
}

TEST_CASE("independent noise gives a diagonal second moment") {
    LinearScmSegment seg;
    seg.b = Eigen::MatrixXd::Zero(3, 3);
    seg.mu = Eigen::VectorXd::Zero(3);
    seg.sigma2 = Eigen::Vector3d(2.0, 3.0, 5.0);
    seg.observed = {0, 1, 2};
    const auto sys = system_moments(seg);
    Eigen::MatrixXd expected = Eigen::MatrixXd::Zero(4, 4);
    expected(0, 0) = 2.0;
    expected(1, 1) = 3.0;
    expected(2, 2) = 1.0;
    expected(3, 3) = 5.0;
    CHECK((sys.second_moment - expected).cwiseAbs().maxCoeff() < 1e-15);
}

TEST_CASE("hidden-confounder example coefficients and residual variances") {
    const auto segs = example_segments("example2");
    const std::array<double, 3> coef{1.5, 5.0 / 3.0, 1.0};
    const std::array<double, 3> var{6.0, 10.0, 4.0};
    for (std::size_t r = 0; r < 3; ++r) {
        const auto sys = system_moments(segs[r]);
        CHECK(population_ols(sys, CovariateSubset::full(1))(0) == Catch::Approx(coef[r]).margin(kTol));
        CHECK(population_residual_variance(sys, CovariateSubset::intercept_only(1)) ==
              Catch::Approx(var[r]).margin(kTol));
    }
    CHECK(is_ccp(segs[0], segs[1]));
    CHECK(is_ccp(segs[1], segs[2]));
    CHECK_FALSE(is_invariant_set(std::span(segs.data(), 2), CovariateSubset::full(1)));
}

TEST_CASE("first example full-set coefficients") {
    const auto segs = example_segments("example1");
    const double expected[3][4] = {{0.5, 0.5, 0.5, 0.0}, {0.8, 0.8, 0.2, 0.0}, {-0.2, 0.8, 0.2, 0.0}};
    for (std::size_t r = 0; r < 3; ++r) {
        const auto beta = population_ols(system_moments(segs[r]), CovariateSubset::full(3));
        for (int j = 0; j < 4; ++j) {
            CHECK(beta(j) == Catch::Approx(expected[r][j]).margin(kTol));
        }
    }
    CHECK_FALSE(is_ccp(segs[0], segs[1]));
    CHECK(is_ccp(segs[1], segs[2]));
    const std::vector<LinearScmSegment> first_two{segs[0], segs[1]};
    CHECK(is_invariant_set(first_two, one_based({1, 2}, 3)));
}

TEST_CASE("appendixB example segments share coefficients but not residual variance") {
    const auto segs = example_segments("appendixB");
    const auto s1 = system_moments(segs[0]);
    // Observed order is (X1, X2, intercept, Y).
    CHECK(s1.second_moment(1, 1) == Catch::Approx(46.0).margin(kTol));
    CHECK(s1.second_moment(0, 1) == Catch::Approx(6.0).margin(kTol));
    CHECK(s1.second_moment(1, 3) == Catch::Approx(15.0).margin(kTol));

    const auto full = CovariateSubset::full(2);
    for (const auto& seg : segs) {
        const auto beta = population_ols(system_moments(seg), full);
        CHECK(beta(0) == Catch::Approx(0.2).margin(kTol));
        CHECK(beta(1) == Catch::Approx(0.3).margin(kTol));
        CHECK(beta(2) == Catch::Approx(0.0).margin(kTol));
    }
    // Var(Y) - c' beta: 5 - 4.9 and 2.125 - 1.9.
    CHECK(population_residual_variance(s1, full) == Catch::Approx(0.1).margin(kTol));
    CHECK(population_residual_variance(system_moments(segs[1]), full) ==
          Catch::Approx(0.225).margin(kTol));
    CHECK_FALSE(is_invariant_set(segs, full));
    CHECK(is_ccp(segs[0], segs[1]));
}

TEST_CASE("is_ccp is irreflexive") {
    for (const auto* name : {"example1", "example2", "appendixB"}) {
        for (const auto& seg : example_segments(name)) {
            CHECK_FALSE(is_ccp(seg, seg));
        }
    }
    CHECK_FALSE(is_ccp(ScmSegmentParams{}.to_scm(), ScmSegmentParams{}.to_scm()));
}

TEST_CASE("residual variance decreases weakly as the subset grows") {
    ScmSegmentParams p;
    p.a12 = 0.7;
    p.b15 = -1.3;
    p.sigmaY = 0.4;
    p.mu3 = 2.0;
    const auto sys = system_moments(p.to_scm());
    const auto all = enumerate_subsets(4);
    for (const auto& a : all) {
        for (const auto& b : all) {
            bool nested = true;
            for (auto c : a.columns()) {
                nested = nested && b.contains(c);
            }
            if (nested) {
                CHECK(population_residual_variance(sys, b) <=
                      population_residual_variance(sys, a) + 1e-12);
            }
        }
    }
}

TEST_CASE("exact linear response leaves no residual") {
    ScmSegmentParams p;
    p.sigmaY = 0.0;
    p.muY = 0.0;
    const auto sys = system_moments(p.to_scm());
    CHECK(population_residual_variance(sys, one_based({1, 2}, 4)) == Catch::Approx(0.0).margin(1e-12));
    CHECK(population_residual_variance(sys, CovariateSubset::full(4)) == Catch::Approx(0.0).margin(1e-12));
}

TEST_CASE("parent-set regression recovers the causal coefficients") {
    ScmSegmentParams p;
    p.b15 = 1.7;
    p.b25 = -0.6;
    p.muY = 2.5;
    p.mu1 = -1.0;
    p.a12 = 0.9;
    p.a53 = 1.4;
    const auto beta = population_ols(system_moments(p.to_scm()), one_based({1, 2}, 4));
    CHECK(beta(0) == Catch::Approx(1.7).margin(kTol));
    CHECK(beta(1) == Catch::Approx(-0.6).margin(kTol));
    CHECK(beta(2) == 0.0);
    CHECK(beta(3) == 0.0);
    CHECK(beta(4) == Catch::Approx(2.5).margin(kTol));
}

TEST_CASE("pooled OLS over an invariant family equals the per-segment value") {
    const auto segs = example_segments("example1");
    const PiecewiseScm scm(300, {1, 101, 201}, segs);
    const auto parents = one_based({1, 2}, 3);
    const auto pooled_beta = population_ols(scm.interval_moments({30, 180}), parents);
    const auto seg_beta = population_ols(system_moments(segs[0]), parents);
    CHECK((pooled_beta - seg_beta).cwiseAbs().maxCoeff() < 1e-12);

    ScmSegmentParams a;
    ScmSegmentParams b;
    b.a53 = 3.0;
    b.mu4 = -2.0;
    b.sigma1 = 2.0;
    const std::vector<LinearScmSegment> fam{a.to_scm(), b.to_scm()};
    const auto s = one_based({1, 2}, 4);
    REQUIRE(is_invariant_set(fam, s));
    const std::array<GaussianSystem, 2> systems{system_moments(fam[0]), system_moments(fam[1])};
    const std::array<double, 2> w{0.3, 0.7};
    CHECK((population_ols(pooled(systems, w), s) - population_ols(systems[0], s)).cwiseAbs().maxCoeff() <
          1e-12);
}

TEST_CASE("population_v evaluates a fit from elsewhere") {
    const auto segs = example_segments("example2");
    const auto s1 = system_moments(segs[0]);
    const auto s3 = system_moments(segs[2]);
    const auto full = CovariateSubset::full(1);
    CHECK(population_v(s1, s1, full) ==
          Catch::Approx(population_residual_variance(s1, full)).margin(kTol));
    // Fit 1.5 X on segment 1, evaluated where Y - 1.5 X = H - 0.5 e1 + eY.
    CHECK(population_v(s3, s1, full) == Catch::Approx(2.0 + 0.25 + 1.0).margin(kTol));
}

TEST_CASE("population instability and loss") {
    const auto subsets2 = enumerate_subsets(1);
    const auto ex2 = example_segments("example2");

    const PiecewiseScm single(400, {1}, {ex2[0]});
    CHECK(population_instability(single, {1, 400}, 50, subsets2).value == Catch::Approx(0.0).margin(1e-12));

    const auto ex1 = example_segments("example1");
    const PiecewiseScm nccp(400, {1, 201}, {ex1[0], ex1[1]});
    const auto subsets1 = enumerate_subsets(3);
    CHECK(population_instability(nccp, {1, 400}, 50, subsets1).value == Catch::Approx(0.0).margin(1e-12));
    CHECK(population_instability(nccp, {101, 333}, 40, subsets1).value == Catch::Approx(0.0).margin(1e-12));

    const PiecewiseScm ccp(400, {1, 201}, {ex2[0], ex2[1]});
    const auto straddle = population_instability(ccp, {1, 400}, 200, subsets2);
    CHECK(straddle.value > 1e-3);
    const auto straddle_off = population_instability(ccp, {1, 400}, 150, subsets2);
    CHECK(straddle_off.value > 1e-3);

    CHECK(population_stability_loss(ccp, {1, 400}, 201, 50, subsets2) == Catch::Approx(0.0).margin(1e-12));
    CHECK(population_stability_loss(ccp, {1, 400}, 151, 50, subsets2) > 1e-6);
    for (std::size_t i = 3; i <= 400; i += 37) {
        CHECK(population_stability_loss(single, {1, 400}, i, 50, subsets2) == Catch::Approx(0.0).margin(1e-12));
    }
    CHECK_THROWS_AS(population_stability_loss(ccp, {1, 400}, 1, 50, subsets2), IntervalError);
}

TEST_CASE("segment validation") {
    auto seg = example_segments("example2")[0];
    seg.sigma2(1) = -1.0;
    CHECK_THROWS_AS(seg.validate(), InputError);

    auto cyc = example_segments("example2")[0];
    cyc.b(0, 2) = 0.5;
    CHECK_THROWS_AS(cyc.validate(), InputError);
    CHECK_THROWS_AS(system_moments(cyc), InputError);

    auto diag = example_segments("example2")[0];
    diag.b(1, 1) = 0.5;
    CHECK_THROWS_AS(diag.validate(), InputError);

    const auto order = example_segments("example1")[2].topological_order();
    auto pos = [&](std::size_t v) { return std::find(order.begin(), order.end(), v) - order.begin(); };
    CHECK(pos(1) < pos(2));
    CHECK(pos(2) < pos(3));
    CHECK(pos(0) < pos(3));

    LinearScmSegment singular;
    singular.b = Eigen::MatrixXd::Zero(2, 2);
    singular.mu = Eigen::VectorXd::Zero(2);
    singular.sigma2 = Eigen::Vector2d(0.0, 1.0);
    singular.observed = {0, 1};
    CHECK_THROWS_AS(population_ols(system_moments(singular), CovariateSubset::full(1)), SingularFitError);
}
