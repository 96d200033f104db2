#include "test_util.hpp"

#include "deltak/lloyd.hpp"
#include "deltak/rng.hpp"

#include <doctest.h>

#include <cmath>
#include <random>

using namespace deltak;
using namespace testutil;

namespace {

/// Plain-double reimplementation of the iteration for fully defined data,
/// sharing only the seeding routine.  Tie and repair rules mirror the library:
/// nearest center with the smallest index wins, an empty cluster steals the
/// point farthest from its own center from any cluster of size >= 2.
LloydResult plain_lloyd(const Instance& inst, int k, const LloydConfig& cfg) {
    Rng rng = make_rng(cfg.seed, 0);
    std::vector<Center> centers = seed_centers(inst, k, cfg.init, rng);
    const std::size_t n = static_cast<std::size_t>(inst.size());
    LloydResult res;
    std::vector<int> assign(n, 0);
    double prev = std::numeric_limits<double>::infinity();
    for (int iter = 1; iter <= cfg.max_iters; ++iter) {
        std::vector<int> sizes(static_cast<std::size_t>(k), 0);
        for (std::size_t i = 0; i < n; ++i) {
            int best = 0;
            double best_d = std::numeric_limits<double>::infinity();
            for (int c = 0; c < k; ++c) {
                double d2 = 0.0;
                for (Eigen::Index j = 0; j < inst.d; ++j) {
                    const double dv =
                        inst.points[i].values[j] - centers[static_cast<std::size_t>(c)].values[j];
                    d2 += dv * dv;
                }
                if (d2 < best_d) {
                    best_d = d2;
                    best = c;
                }
            }
            assign[i] = best;
            ++sizes[static_cast<std::size_t>(best)];
        }
        for (int c = 0; c < k; ++c) {
            if (sizes[static_cast<std::size_t>(c)] > 0) continue;
            std::size_t steal = n;
            double far_d = -1.0;
            for (std::size_t i = 0; i < n; ++i) {
                if (sizes[static_cast<std::size_t>(assign[i])] < 2) continue;
                double d2 = 0.0;
                for (Eigen::Index j = 0; j < inst.d; ++j) {
                    const double dv =
                        inst.points[i].values[j] -
                        centers[static_cast<std::size_t>(assign[i])].values[j];
                    d2 += dv * dv;
                }
                if (d2 > far_d) {
                    far_d = d2;
                    steal = i;
                }
            }
            REQUIRE(steal != n);
            --sizes[static_cast<std::size_t>(assign[steal])];
            assign[steal] = c;
            ++sizes[static_cast<std::size_t>(c)];
        }
        std::vector<std::vector<const DeltaPoint*>> parts(static_cast<std::size_t>(k));
        for (std::size_t i = 0; i < n; ++i)
            parts[static_cast<std::size_t>(assign[i])].push_back(&inst.points[i]);
        double cost = 0.0;
        for (int c = 0; c < k; ++c) {
            centers[static_cast<std::size_t>(c)] =
                ref_mean(parts[static_cast<std::size_t>(c)], IndexSet::all(inst.d));
            cost += ref_cost(parts[static_cast<std::size_t>(c)],
                             centers[static_cast<std::size_t>(c)], IndexSet::all(inst.d));
        }
        res.cost_history.push_back(cost);
        res.iterations = iter;
        const bool first = !std::isfinite(prev);
        const bool stop = !first && (prev - cost) <= cfg.tol * std::max(prev, 1e-300);
        prev = cost;
        if (stop || cost == 0.0) break;
    }
    res.solution.assignment = assign;
    res.solution.centers = centers;
    res.solution.cost = prev;
    return res;
}

}  // namespace

TEST_CASE("one cluster converges to the masked mean") {
    std::mt19937_64 rng(3);
    for (int trial = 0; trial < 30; ++trial) {
        const Eigen::Index d = 1 + static_cast<Eigen::Index>(rng() % 4);
        const Instance inst =
            random_instance(rng, 2 + static_cast<int>(rng() % 10), d,
                            static_cast<int>(rng() % static_cast<std::uint64_t>(d)));
        LloydConfig cfg;
        cfg.seed = trial;
        const LloydResult r = lloyd(inst, 1, cfg);
        const auto pts = all_points(inst);
        const IndexSet full = IndexSet::all(d);
        const Center m = ref_mean(pts, full);
        REQUIRE((r.solution.centers[0].defined == m.defined).all());
        for (Eigen::Index j = 0; j < d; ++j)
            if (m.defined_at(j))
                CHECK(r.solution.centers[0].values[j] == doctest::Approx(m.values[j]).epsilon(1e-12));
        CHECK(r.solution.cost == doctest::Approx(ref_cost(pts, m, full)).epsilon(1e-12));
    }
}

TEST_CASE("cost history never increases") {
    std::mt19937_64 rng(41);
    for (int trial = 0; trial < 100; ++trial) {
        const Eigen::Index d = 1 + static_cast<Eigen::Index>(rng() % 4);
        const int n = 4 + static_cast<int>(rng() % 20);
        const Instance inst =
            random_instance(rng, n, d, static_cast<int>(rng() % static_cast<std::uint64_t>(d)));
        const int k = 1 + static_cast<int>(rng() % 4);
        LloydConfig cfg;
        cfg.seed = 1000 + trial;
        cfg.init = (trial % 2 == 0) ? SeedMode::random_points : SeedMode::spread;
        const LloydResult r = lloyd(inst, std::min<int>(k, n), cfg);
        REQUIRE(!r.cost_history.empty());
        for (std::size_t i = 1; i < r.cost_history.size(); ++i)
            CHECK(r.cost_history[i] <= r.cost_history[i - 1]);
        CHECK(r.solution.cost == r.cost_history.back());
        CHECK_NOTHROW(validate_solution(inst, r.solution));
    }
}

TEST_CASE("on fully defined data the trajectory matches a plain reimplementation") {
    std::mt19937_64 rng(77);
    for (int trial = 0; trial < 50; ++trial) {
        const Eigen::Index d = 1 + static_cast<Eigen::Index>(rng() % 3);
        const int n = 4 + static_cast<int>(rng() % 12);
        const Instance inst = random_instance(rng, n, d, 0);
        const int k = 1 + static_cast<int>(rng() % 3);
        LloydConfig cfg;
        cfg.seed = 5000 + trial;
        cfg.init = (trial % 2 == 0) ? SeedMode::random_points : SeedMode::spread;
        const LloydResult got = lloyd(inst, std::min<int>(k, n), cfg);
        const LloydResult want = plain_lloyd(inst, std::min<int>(k, n), cfg);
        REQUIRE(got.iterations == want.iterations);
        REQUIRE(got.cost_history.size() == want.cost_history.size());
        for (std::size_t i = 0; i < got.cost_history.size(); ++i)
            CHECK(got.cost_history[i] ==
                  doctest::Approx(want.cost_history[i]).epsilon(1e-9));
        CHECK(got.solution.assignment == want.solution.assignment);
    }
}

TEST_CASE("random seeding picks k distinct input points") {
    std::mt19937_64 mrng(9);
    const Instance inst = random_instance(mrng, 10, 3, 1);
    Rng rng = make_rng(42, 0);
    const auto centers = seed_centers(inst, 4, SeedMode::random_points, rng);
    REQUIRE(centers.size() == 4);
    std::vector<int> matched;
    for (const Center& c : centers) {
        int hit = -1;
        for (const DeltaPoint& p : inst.points)
            if (static_cast<const MaskedVector&>(p) == c) hit = p.id;
        REQUIRE(hit >= 0);
        matched.push_back(hit);
    }
    std::sort(matched.begin(), matched.end());
    CHECK(std::adjacent_find(matched.begin(), matched.end()) == matched.end());
}

TEST_CASE("spread seeding takes the farthest point next") {
    const Instance inst = inst1d({0.0, 1.0, 9.0});
    for (std::uint64_t seed = 0; seed < 8; ++seed) {
        Rng probe = make_rng(seed, 0);
        const std::size_t first = uniform_index(probe, 3);
        Rng rng = make_rng(seed, 0);
        const auto centers = seed_centers(inst, 2, SeedMode::spread, rng);
        CHECK(centers[0] == static_cast<const MaskedVector&>(inst.points[first]));
        // 9 is farthest from 0 and 1; 0 is farthest from 9
        const double expect_second = (inst.points[first].values[0] == 9.0) ? 0.0 : 9.0;
        CHECK(centers[1].values[0] == expect_second);
    }
}

TEST_CASE("an empty cluster steals a far point and iteration recovers") {
    const Instance inst = inst1d({5.0, 5.0, 100.0});
    bool exercised = false;
    for (std::uint64_t seed = 0; seed < 30 && !exercised; ++seed) {
        Rng probe = make_rng(seed, 0);
        const auto init = seed_centers(inst, 2, SeedMode::random_points, probe);
        if (!(init[0].values[0] == 5.0 && init[1].values[0] == 5.0)) continue;
        exercised = true;  // both centers coincide, so one cluster starts empty
        LloydConfig cfg;
        cfg.seed = seed;
        const LloydResult r = lloyd(inst, 2, cfg);
        CHECK(r.solution.cost == 0.0);
        std::vector<int> sizes(2, 0);
        for (int a : r.solution.assignment) ++sizes[static_cast<std::size_t>(a)];
        CHECK(sizes[0] > 0);
        CHECK(sizes[1] > 0);
    }
    REQUIRE(exercised);
}

TEST_CASE("iteration cap is honored") {
    std::mt19937_64 rng(123);
    const Instance inst = random_instance(rng, 20, 2, 1);
    LloydConfig cfg;
    cfg.max_iters = 1;
    cfg.seed = 7;
    const LloydResult r = lloyd(inst, 3, cfg);
    CHECK(r.iterations == 1);
    CHECK(r.cost_history.size() == 1);
}

TEST_CASE("k outside [1, n] is rejected") {
    const Instance inst = inst1d({1.0, 2.0});
    LloydConfig cfg;
    CHECK_THROWS_AS(lloyd(inst, 0, cfg), std::invalid_argument);
    CHECK_THROWS_AS(lloyd(inst, 3, cfg), std::invalid_argument);
}
