#include "ccp/error.hpp"
#include "ccp/simulator.hpp"
#include "ccp/stability.hpp"

#include "oracles.hpp"

#include <catch_amalgamated.hpp>

#include <cmath>

using namespace ccp;
using ccp::testing::naive_instability;
using ccp::testing::naive_loss;
using ccp::testing::random_regression;

TEST_CASE("partition examples") {
    auto sizes = [](Interval i, std::size_t s) {
        std::vector<std::size_t> out;
        for (const auto& b : partition(i, s).blocks) {
            out.push_back(b.length());
        }
        return out;
    };
    CHECK(sizes({1, 10}, 3) == std::vector<std::size_t>{3, 3, 4});
    CHECK(sizes({1, 5}, 3) == std::vector<std::size_t>{5});
    CHECK(sizes({1, 6}, 3) == std::vector<std::size_t>{3, 3});
    CHECK(partition({4, 13}, 3).blocks.front() == Interval{4, 6});
    CHECK_THROWS_AS(partition({1, 10}, 1), InputError);
}

TEST_CASE("partition sweep against the longhand rule") {
    for (std::size_t len = 2; len <= 120; ++len) {
        for (std::size_t s = 2; s <= 40; ++s) {
            const Interval i{7, 7 + len - 1};
            const auto p = partition(i, s);
            const auto ref = testing::naive_partition(i, s);
            REQUIRE(p.blocks == ref);
            const std::size_t m = len >= 2 * s ? len / s : 1;
            CHECK(p.m() == m);
            std::size_t next = i.start;
            for (std::size_t r = 0; r < p.m(); ++r) {
                CHECK(p.blocks[r].start == next);
                if (r + 1 < p.m()) {
                    CHECK(p.blocks[r].length() == s);
                }
                next = p.blocks[r].end + 1;
            }
            CHECK(next == i.end + 1);
            if (m > 1) {
                CHECK(p.blocks.back().length() == len - (m - 1) * s);
                CHECK(p.blocks.back().length() < 2 * s);
            }
        }
    }
}

TEST_CASE("instability and loss match the refit-per-block oracle") {
    const auto data = random_regression(240, 3, 31);
    const MomentTable table(data);
    const auto subsets = enumerate_subsets(3);
    for (auto [i, s] : {std::pair{Interval{1, 240}, std::size_t{40}},
                        {Interval{13, 200}, std::size_t{25}},
                        {Interval{50, 99}, std::size_t{12}},
                        {Interval{1, 30}, std::size_t{20}}}) {
        const double ref = naive_instability(data, i, s, subsets);
        CHECK(instability(table, i, s, subsets).value == Catch::Approx(ref).epsilon(1e-7).margin(1e-14));
    }
    for (std::size_t split : {3u, 60u, 121u, 239u}) {
        CHECK(stability_loss(table, {1, 240}, split, 30, subsets) ==
              Catch::Approx(naive_loss(data, {1, 240}, split, 30, subsets)).epsilon(1e-7).margin(1e-14));
    }
}

TEST_CASE("instability is the minimum over subsets") {
    const auto data = generate(builtin_schedule("detection:0.5", 600), 4);
    const MomentTable table(data);
    const auto subsets = enumerate_subsets(4);
    const auto best = instability(table, {1, 600}, 60, subsets);
    CHECK(best.value >= 0.0);
    bool attained = false;
    for (const auto& s : subsets) {
        const auto one = instability(table, {1, 600}, 60, std::span(&s, 1));
        CHECK(best.value <= one.value);
        attained = attained || (one.value == best.value && one.subset == best.subset);
    }
    CHECK(attained);
}

TEST_CASE("rank-deficient blocks skip the subset") {
    const auto data = random_regression(40, 4, 1);
    const MomentTable table(data);
    const auto small = CovariateSubset::intercept_only(4);
    const auto big = CovariateSubset::full(4);
    const std::vector<CovariateSubset> both{big, small};
    // Blocks of 4 rows cannot fit five columns.
    CHECK(instability(table, {1, 40}, 4, both).subset == small);
    CHECK_THROWS_AS(instability(table, {1, 40}, 4, std::span(&big, 1)), SingularFitError);
}

TEST_CASE("noiseless linear data has zero instability") {
    const auto data = random_regression(300, 3, 2, 0.0);
    const MomentTable table(data);
    const auto full = CovariateSubset::full(3);
    CHECK(instability(table, {1, 300}, 30, std::span(&full, 1)).value < 1e-20);
}

TEST_CASE("scaling Y by c scales the loss by c^4") {
    const auto data = generate(builtin_schedule("exp1", 400), 5);
    const auto subsets = enumerate_subsets(4);
    for (double c : {0.5, 3.0}) {
        const auto scaled = testing::scale_response(data, c);
        const MomentTable a(data);
        const MomentTable b(scaled);
        CHECK(instability(b, {1, 400}, 40, subsets).value ==
              Catch::Approx(std::pow(c, 4) * instability(a, {1, 400}, 40, subsets).value).epsilon(1e-8));
        GridSpec grid;
        grid.step = 10;
        const auto ca = loss_curve(a, {1, 400}, 40, grid, subsets);
        const auto cb = loss_curve(b, {1, 400}, 40, grid, subsets);
        REQUIRE(ca.values.size() == cb.values.size());
        for (std::size_t j = 0; j < ca.values.size(); ++j) {
            CHECK(cb.values[j] == Catch::Approx(std::pow(c, 4) * ca.values[j]).epsilon(1e-7));
        }
        CHECK(localize_single(a, {1, 400}, 40, grid, subsets).point ==
              localize_single(b, {1, 400}, 40, grid, subsets).point);
    }
}

TEST_CASE("time reversal mirrors the loss curve") {
    const std::size_t n = 600;
    const std::size_t s = 50;
    const auto data = generate(builtin_schedule("exp1", n), 6);
    const MomentTable fwd(data);
    const MomentTable rev(data.reversed());
    const auto subsets = enumerate_subsets(4);
    // Splits where both sides are whole multiples of s, so the partitions mirror.
    for (std::size_t i = s + 1; i + s <= n + 1; i += s) {
        const double a = stability_loss(fwd, {1, n}, i, s, subsets);
        const double b = stability_loss(rev, {1, n}, n + 2 - i, s, subsets);
        CHECK(b == Catch::Approx(a).epsilon(1e-7).margin(1e-13));
    }
}

TEST_CASE("default tuning helpers") {
    CHECK(default_block_length(4000, 4) == 400);
    CHECK(default_block_length(100, 4) == 14);
    CHECK(default_block_length(101, 1) == 11);
    CHECK(default_grid_step(4000) == 40);
    CHECK(default_grid_step(50) == 1);
    CHECK(default_trim(4000) == 400);
    CHECK(default_trim(30) == 10);
}

TEST_CASE("grid construction") {
    GridSpec explicit_grid;
    explicit_grid.points = {1, 2, 3, 50, 50, 99, 100, 7};
    CHECK(grid_points({1, 100}, 100, explicit_grid) == std::vector<std::size_t>{3, 7, 50, 99});

    GridSpec stepped;
    stepped.step = 5;
    stepped.trim = 10;
    const auto pts = grid_points({1, 100}, 100, stepped);
    REQUIRE_FALSE(pts.empty());
    CHECK(pts.front() == 11);
    CHECK(pts.back() == 86);
    for (std::size_t j = 1; j < pts.size(); ++j) {
        CHECK(pts[j] - pts[j - 1] == 5);
    }

    GridSpec dflt;
    const auto d = grid_points({1, 1000}, 1000, dflt);
    CHECK(d.front() == 101);
    CHECK(d[1] - d[0] == 10);
    CHECK(d.back() + 100 <= 1000);

    const auto data = random_regression(30, 1, 3);
    CHECK_THROWS_AS(loss_curve(MomentTable(data), {1, 20}, 4, dflt, enumerate_subsets(1)), IntervalError);
    CHECK_THROWS_AS(stability_loss(MomentTable(data), {1, 20}, 2, 4, enumerate_subsets(1)), IntervalError);
    CHECK_THROWS_AS(stability_loss(MomentTable(data), {1, 20}, 20, 4, enumerate_subsets(1)), IntervalError);
}

TEST_CASE("a flat zero curve resolves to the first grid point") {
    auto base = random_regression(200, 2, 4);
    const Dataset flat(base.x(), Eigen::VectorXd::Ones(200));
    const MomentTable table(flat);
    GridSpec grid;
    grid.step = 7;
    const auto est = localize_single(table, {1, 200}, 20, grid, enumerate_subsets(2));
    for (double v : est.curve.values) {
        CHECK(v < 1e-12);
    }
    CHECK(est.point == est.curve.grid_points.front());
}

TEST_CASE("large single change is recovered on the grid") {
    ScmSegmentParams before;
    ScmSegmentParams after;
    after.b15 = 6.0;
    after.b25 = 6.0;
    const std::size_t n = 1000;
    ScmSchedule sched{"strong", n, {{501, ChangeLabel::Ccp}}, {before, after}};
    sched.validate();
    GridSpec grid;
    for (int j = 1; j <= 19; ++j) {
        grid.points.push_back(static_cast<std::size_t>(std::ceil(0.05 * j * n)) + 1);
    }
    const auto subsets = enumerate_subsets(4);
    int exact = 0;
    for (std::uint64_t seed = 1; seed <= 50; ++seed) {
        const MomentTable table(generate(sched, seed));
        exact += localize_single(table, {1, n}, 100, grid, subsets).point == 501 ? 1 : 0;
    }
    CHECK(exact >= 45);
}

TEST_CASE("empirical loss on the first experiment is smallest near the middle") {
    const std::size_t n = 2000;
    const auto data = generate(builtin_schedule("exp1", n), 12);
    GridSpec grid;
    grid.step = 20;
    const auto est = localize_single(MomentTable(data), {1, n}, 200, grid, enumerate_subsets(4));
    CHECK(std::llabs(static_cast<long long>(est.point) - 1001) <= 100);
}
