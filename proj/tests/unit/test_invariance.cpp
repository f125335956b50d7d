#include "ccp/error.hpp"
#include "ccp/fdist.hpp"
#include "ccp/invariance.hpp"
#include "ccp/simulator.hpp"

#include "oracles.hpp"

#include <catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>

using namespace ccp;
using ccp::testing::random_regression;

TEST_CASE("chow routes agree with the textbook statistic") {
    const auto data = random_regression(200, 3, 21);
    const MomentTable table(data);
    for (const auto& s : enumerate_subsets(3)) {
        for (auto [i1, i2] : {std::pair{Interval{1, 100}, Interval{101, 200}},
                              {Interval{10, 40}, Interval{41, 75}},
                              {Interval{50, 70}, Interval{71, 71 + s.size() + 1}}}) {
            const double ref = testing::chow_textbook(data, i1, i2, s);
            const auto m = chow_statistic(table, i1, i2, s);
            const auto d = chow_statistic_direct(data, i1, i2, s);
            INFO(s.to_string() << " " << to_string(i1) << " " << to_string(i2));
            CHECK(m.form == ChowForm::Equal);
            CHECK(m.statistic == Catch::Approx(ref).epsilon(1e-8));
            CHECK(d.statistic == Catch::Approx(ref).epsilon(1e-8));
            CHECK(m.df_num == static_cast<double>(s.size()));
            CHECK(m.df_den == static_cast<double>(i1.length() + i2.length() - 2 * s.size()));
        }
    }
}

TEST_CASE("predictive chow form and its quadratic-form identity") {
    const auto data = random_regression(120, 3, 5);
    const MomentTable table(data);
    for (const auto& s : enumerate_subsets(3)) {
        for (std::size_t l2 = 1; l2 <= s.size(); ++l2) {
            const Interval i1{20, 80};
            const Interval i2{81, 80 + l2};
            const auto m = chow_statistic(table, i1, i2, s);
            const auto d = chow_statistic_direct(data, i1, i2, s);
            const double ref = testing::chow_textbook(data, i1, i2, s);
            const double q = chow_predictive_quadratic_form(data, i1, i2, s);
            INFO(s.to_string() << " l2 = " << l2);
            CHECK(m.form == ChowForm::Predictive);
            CHECK(m.df_num == static_cast<double>(l2));
            CHECK(m.df_den == static_cast<double>(i1.length() - s.size()));
            CHECK(m.statistic == Catch::Approx(ref).epsilon(1e-8));
            CHECK(d.statistic == Catch::Approx(ref).epsilon(1e-8));
            CHECK(q == Catch::Approx(ref).epsilon(1e-8));
        }
    }
}

TEST_CASE("chow with |I2| = |S| + 1 computed both ways") {
    const auto data = random_regression(90, 4, 77);
    const auto s = CovariateSubset::full(4);
    const Interval i1{1, 60};
    const Interval i2{61, 61 + s.size()};
    REQUIRE(i2.length() == s.size() + 1);
    const MomentTable table(data);
    const double rss_pooled = testing::rss(data, testing::normal_equations_fit(data, {1, i2.end}, s), {1, i2.end});
    const double rss1 = testing::rss(data, testing::normal_equations_fit(data, i1, s), i1);
    const double predictive = ((rss_pooled - rss1) / static_cast<double>(i2.length())) /
                              (rss1 / static_cast<double>(i1.length() - s.size()));
    CHECK(chow_predictive_quadratic_form(data, i1, i2, s) == Catch::Approx(predictive).epsilon(1e-8));
    CHECK(chow_statistic(table, i1, i2, s).statistic ==
          Catch::Approx(testing::chow_textbook(data, i1, i2, s)).epsilon(1e-8));
}

TEST_CASE("chow statistic argument checks") {
    const auto data = random_regression(50, 2, 3);
    const MomentTable table(data);
    const auto s = CovariateSubset::full(2);
    CHECK_THROWS_AS(chow_statistic(table, {1, 3}, {4, 20}, s), IntervalError);
    CHECK_THROWS_AS(chow_statistic(table, {1, 10}, {12, 20}, s), IntervalError);
    CHECK_THROWS_AS(chow_statistic(table, {1, 3}, {4, 5}, s), IntervalError);
}

TEST_CASE("no-break limit gives a statistic near zero") {
    Eigen::MatrixXd x(40, 2);
    Eigen::VectorXd y(40);
    for (int i = 0; i < 40; ++i) {
        x(i, 0) = std::sin(0.7 * i);
        x(i, 1) = 1.0;
        y(i) = 2.0 * x(i, 0) + 1.0 + 1e-6 * std::cos(3.1 * i);
    }
    const Dataset data(x, y);
    const MomentTable table(data);
    const auto c = chow_statistic(table, {1, 20}, {21, 40}, CovariateSubset::full(1));
    CHECK(c.statistic < 5.0);
    const auto big = [&] {
        Eigen::VectorXd y2 = y;
        y2.tail(20).array() += 1.0;
        return Dataset(x, y2);
    }();
    CHECK(chow_statistic(MomentTable(big), {1, 20}, {21, 40}, CovariateSubset::full(1)).statistic > 1e6);
}

TEST_CASE("testability threshold") {
    const auto s = CovariateSubset::from_one_based({1, 2}, 4);
    CHECK(s.size() == 3);
    CHECK_FALSE(is_testable({1, 9}, s));
    CHECK(is_testable({1, 10}, s));
    const auto all = enumerate_subsets(4);
    CHECK(min_testable_length(all) == 14);

    const auto data = random_regression(30, 4, 2);
    const MomentTable table(data);
    CHECK_THROWS_AS(test_subset_invariance(table, {1, 9}, s, 0.05), IntervalError);
    CHECK_THROWS_AS(test_subset_invariance(table, {1, 30}, s, 1.0), InputError);
    CHECK_THROWS_AS(test_subset_invariance(table, {1, 30}, s, 0.0), InputError);
}

TEST_CASE("midpoint split puts floor(|I|/2) points first") {
    const auto data = random_regression(41, 1, 8);
    const MomentTable table(data);
    const auto s = CovariateSubset::full(1);
    const auto out = test_subset_invariance(table, {1, 41}, s, 0.05);
    const auto c = chow_statistic(table, {1, 20}, {21, 41}, s);
    CHECK(out.statistic == c.statistic);
    CHECK(out.p_value == Catch::Approx(f_sf(c.statistic, c.df_num, c.df_den)).epsilon(1e-14));
    CHECK(out.reject == (out.p_value <= 0.05));
}

TEST_CASE("degenerate fits never reject") {
    Eigen::MatrixXd x(20, 3);
    for (int i = 0; i < 20; ++i) {
        x(i, 0) = i;
        x(i, 1) = 3.0 * i;
        x(i, 2) = 1.0;
    }
    const Dataset collinear(x, Eigen::VectorXd::LinSpaced(20, -1, 4).array().square());
    const auto out = test_subset_invariance(MomentTable(collinear), {1, 20}, CovariateSubset::full(2), 0.5);
    CHECK(out.degenerate);
    CHECK(out.p_value == 1.0);
    CHECK_FALSE(out.reject);

    // An exact fit leaves no pooled residual.
    const Dataset exact(x, x.col(0) * 2.0);
    const auto e = test_subset_invariance(MomentTable(exact), {1, 20},
                                          CovariateSubset::from_one_based({1}, 2), 0.5);
    CHECK(e.degenerate);
    CHECK_FALSE(e.reject);

    const auto det = detect_ccp(MomentTable(collinear), {1, 20}, 0.5, enumerate_subsets(2));
    CHECK_FALSE(det.detect);
    CHECK(det.combined_p_value == 1.0);
}

TEST_CASE("variance test adds a bonferroni-combined ratio test") {
    const auto data = random_regression(400, 2, 13);
    Eigen::VectorXd y = data.y();
    y.tail(200) = data.x().bottomRows(200) * Eigen::Vector3d(0.75, 1.0, 1.0) +
                  (y.tail(200) - data.x().bottomRows(200) * Eigen::Vector3d(0.5, 0.75, 1.0)) * 4.0;
    const Dataset shifted(data.x(), y);
    const MomentTable table(shifted);
    const auto s = CovariateSubset::full(2);
    const auto plain = test_subset_invariance(table, {1, 400}, s, 0.05);
    const auto both = test_subset_invariance(table, {1, 400}, s, 0.05, {true});
    REQUIRE(both.variance_p_value.has_value());
    CHECK_FALSE(plain.variance_p_value.has_value());
    CHECK(both.chow_p_value == plain.chow_p_value);
    CHECK(both.p_value == Catch::Approx(std::min(1.0, 2.0 * std::min(plain.chow_p_value, *both.variance_p_value))));
    CHECK(*both.variance_p_value < 1e-10);

    const auto c = chow_statistic(table, {1, 200}, {201, 400}, s);
    const double ratio = (c.rss1 / 197.0) / (c.rss2 / 197.0);
    CHECK(*both.variance_p_value ==
          Catch::Approx(std::min(1.0, 2.0 * std::min(f_cdf(ratio, 197, 197), f_sf(ratio, 197, 197)))));
}

TEST_CASE("detection combines subsets by max p-value and all-reject") {
    const auto sched = builtin_schedule("detection:0.5", 1000);
    const auto data = generate(sched, 3);
    const MomentTable table(data);
    const auto subsets = enumerate_subsets(4);
    const auto r = detect_ccp(table, {1, 1000}, 0.05, subsets);
    REQUIRE(r.per_subset.size() == 16);
    double mx = 0.0;
    bool all = true;
    for (const auto& o : r.per_subset) {
        mx = std::max(mx, o.p_value);
        all = all && o.reject;
    }
    CHECK(r.combined_p_value == mx);
    CHECK(r.detect == all);
    CHECK(r.detect == (r.combined_p_value <= 0.05));
    CHECK_THROWS_AS(detect_ccp(table, {1, 1000}, 0.05, std::span<const CovariateSubset>{}), InputError);
}

TEST_CASE("adding subsets never turns a non-detection into a detection") {
    const auto all = enumerate_subsets(4);
    for (std::uint64_t seed = 1; seed <= 30; ++seed) {
        const auto data = generate(builtin_schedule("detection:0.4", 400), seed);
        const MomentTable table(data);
        bool previous = true;
        for (std::size_t take = 1; take <= all.size(); ++take) {
            const auto r = detect_ccp(table, {1, 400}, 0.05,
                                      std::span<const CovariateSubset>(all.data(), take));
            if (!previous) {
                CHECK_FALSE(r.detect);
            }
            previous = r.detect;
        }
    }
}

TEST_CASE("the invariant parent set blocks detection across a non-causal change") {
    int detections = 0;
    int parent_rejections = 0;
    const auto parents = CovariateSubset::from_one_based({1, 2}, 3);
    for (std::uint64_t seed = 1; seed <= 200; ++seed) {
        const auto ex = example_generator("example1", {150, 150, 1}, seed);
        const MomentTable table(ex.data);
        const auto r = detect_ccp(table, {1, 300}, 0.05, enumerate_subsets(3));
        detections += r.detect ? 1 : 0;
        parent_rejections += test_subset_invariance(table, {1, 300}, parents, 0.05).reject ? 1 : 0;
    }
    // 10 expected at level 0.05; three binomial standard errors is about 9.
    CHECK(detections <= 19);
    CHECK(parent_rejections <= 19);
}
