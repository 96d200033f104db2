#include "test_util.hpp"

#include "deltak/generator.hpp"
#include "deltak/io.hpp"

#include <doctest.h>

#include <sstream>

using namespace deltak;
using namespace testutil;

TEST_CASE("generator spec parsing") {
    const GeneratorSpec s =
        parse_generator_spec("k=3,n=24,d=4,sigma=0.01,miss=0.2,delta=2,sep=0.5,seed=7");
    CHECK(s.k_true == 3);
    CHECK(s.n == 24);
    CHECK(s.d == 4);
    CHECK(s.sigma == 0.01);
    CHECK(s.miss_prob == 0.2);
    CHECK(s.delta == 2);
    CHECK(s.separation == 0.5);
    CHECK(s.seed == 7);

    const GeneratorSpec defaults = parse_generator_spec("n=5");
    CHECK(defaults.n == 5);
    CHECK(defaults.k_true == 2);  // untouched fields keep their defaults
    CHECK(defaults.sigma == 0.05);

    CHECK_THROWS_AS(parse_generator_spec("banana=1"), std::invalid_argument);
    CHECK_THROWS_AS(parse_generator_spec("n"), std::invalid_argument);
    CHECK_THROWS_AS(parse_generator_spec("n=abc"), std::invalid_argument);
}

TEST_CASE("generated instances respect their spec") {
    GeneratorSpec gs;
    gs.k_true = 3;
    gs.n = 20;
    gs.d = 4;
    gs.delta = 2;
    gs.sigma = 0.05;
    gs.miss_prob = 0.3;
    gs.separation = 0.4;
    gs.seed = 42;
    const GeneratedInstance gen = generate(gs);

    CHECK(gen.instance.size() == 20);
    CHECK(gen.instance.d == 4);
    CHECK(gen.instance.delta <= 2);
    REQUIRE(gen.true_centers.size() == 3);
    REQUIRE(gen.planted.size() == 20);

    for (const DeltaPoint& p : gen.instance.points) {
        CHECK(p.missing_count() <= 2);
        CHECK(p.defined_count() >= 1);
    }
    // planted labels cycle through the clusters, so sizes differ by at most one
    std::vector<int> sizes(3, 0);
    for (int c : gen.planted) {
        REQUIRE(c >= 0);
        REQUIRE(c < 3);
        ++sizes[static_cast<std::size_t>(c)];
    }
    CHECK(*std::max_element(sizes.begin(), sizes.end()) -
              *std::min_element(sizes.begin(), sizes.end()) <=
          1);
    // pairwise center separation
    for (std::size_t a = 0; a < 3; ++a)
        for (std::size_t b = a + 1; b < 3; ++b)
            CHECK((gen.true_centers[a].values - gen.true_centers[b].values).square().sum() >=
                  0.4 * 0.4);
}

TEST_CASE("zero noise reproduces the planted centers exactly") {
    GeneratorSpec gs;
    gs.k_true = 2;
    gs.n = 10;
    gs.d = 3;
    gs.delta = 1;
    gs.sigma = 0.0;
    gs.miss_prob = 0.2;
    gs.separation = 0.5;
    gs.seed = 5;
    const GeneratedInstance gen = generate(gs);
    for (Eigen::Index i = 0; i < gen.instance.size(); ++i) {
        const DeltaPoint& p = gen.instance.points[static_cast<std::size_t>(i)];
        const Center& c = gen.true_centers[static_cast<std::size_t>(
            gen.planted[static_cast<std::size_t>(i)])];
        for (Eigen::Index j = 0; j < gs.d; ++j)
            if (p.defined_at(j)) CHECK(p.values[j] == c.values[j]);
    }
}

TEST_CASE("generation is deterministic under the seed") {
    GeneratorSpec gs = parse_generator_spec("k=2,n=12,d=3,sigma=0.1,miss=0.25,delta=2,seed=77");
    const GeneratedInstance a = generate(gs);
    const GeneratedInstance b = generate(gs);
    REQUIRE(a.instance.size() == b.instance.size());
    for (Eigen::Index i = 0; i < a.instance.size(); ++i)
        CHECK(static_cast<const MaskedVector&>(a.instance.points[static_cast<std::size_t>(i)]) ==
              static_cast<const MaskedVector&>(b.instance.points[static_cast<std::size_t>(i)]));
    CHECK(a.planted == b.planted);

    gs.seed = 78;
    const GeneratedInstance c = generate(gs);
    bool any_diff = false;
    for (Eigen::Index i = 0; i < a.instance.size() && !any_diff; ++i)
        any_diff = !(static_cast<const MaskedVector&>(
                         a.instance.points[static_cast<std::size_t>(i)]) ==
                     static_cast<const MaskedVector&>(
                         c.instance.points[static_cast<std::size_t>(i)]));
    CHECK(any_diff);
}

TEST_CASE("no masking probability gives fully defined points") {
    GeneratorSpec gs;
    gs.miss_prob = 0.0;
    gs.delta = 1;
    gs.n = 8;
    const GeneratedInstance gen = generate(gs);
    CHECK(gen.instance.delta == 0);
    for (const DeltaPoint& p : gen.instance.points) CHECK(p.missing_count() == 0);
}

TEST_CASE("generator input validation") {
    GeneratorSpec gs;
    gs.n = 0;
    CHECK_THROWS_AS(generate(gs), std::invalid_argument);
    gs = GeneratorSpec{};
    gs.delta = 2;  // d defaults to 2
    CHECK_THROWS_AS(generate(gs), std::invalid_argument);
    gs = GeneratorSpec{};
    gs.miss_prob = 1.0;
    CHECK_THROWS_AS(generate(gs), std::invalid_argument);
    gs = GeneratorSpec{};
    gs.sigma = -0.1;
    CHECK_THROWS_AS(generate(gs), std::invalid_argument);
    gs = GeneratorSpec{};
    gs.separation = 10.0;  // impossible inside the unit cube
    CHECK_THROWS_AS(generate(gs), std::runtime_error);
}

TEST_CASE("csv loading handles headers, missing fields, and blank lines") {
    std::istringstream in(
        "x,y,z\n"
        "\n"
        "1.5,?,3\n"
        "  2 , 4 ,\n"
        "+0.5,-1,2e1\n");
    const Instance inst = load_csv(in);
    REQUIRE(inst.size() == 3);
    CHECK(inst.d == 3);
    CHECK(inst.delta == 1);
    CHECK(inst.points[0].id == 0);
    CHECK(inst.points[0].values[0] == 1.5);
    CHECK(!inst.points[0].defined_at(1));
    CHECK(inst.points[0].values[2] == 3.0);
    CHECK(inst.points[1].values[1] == 4.0);
    CHECK(!inst.points[1].defined_at(2));  // trailing empty field
    CHECK(inst.points[2].values[0] == 0.5);
    CHECK(inst.points[2].values[2] == 20.0);
}

TEST_CASE("csv without a header is read from the first line") {
    std::istringstream in("1,2\n3,4\n");
    const Instance inst = load_csv(in);
    CHECK(inst.size() == 2);
    CHECK(inst.points[0].values[0] == 1.0);
}

TEST_CASE("csv errors carry the offending line number") {
    {
        std::istringstream in("1,2\n3\n");
        CHECK_THROWS_WITH_AS(load_csv(in), doctest::Contains("line 2"), std::invalid_argument);
    }
    {
        std::istringstream in("1,2\nx,4\n");
        CHECK_THROWS_WITH_AS(load_csv(in), doctest::Contains("line 2"), std::invalid_argument);
    }
    {
        std::istringstream in("1,2\n?,\n");
        CHECK_THROWS_WITH_AS(load_csv(in), doctest::Contains("row 1"), std::invalid_argument);
    }
    {
        std::istringstream in("x,y\n");
        CHECK_THROWS_AS(load_csv(in), std::invalid_argument);  // header only
    }
    CHECK_THROWS_AS(load_csv_file("/nonexistent/file.csv"), std::invalid_argument);
}

namespace {

RunReport sample_report(const Instance& inst) {
    RunReport rep;
    rep.n = inst.size();
    rep.d = inst.d;
    rep.delta = inst.delta;
    rep.config = Json{{"command", "cluster"}, {"k", 2}};
    AlgoResult r;
    r.algorithm = "exact";
    r.solution.assignment = {0, 0, 1};
    r.solution.centers = {mv({1.0, missing}), mv({10.0, 4.0})};
    r.solution.cost = solution_cost(inst, r.solution.assignment, r.solution.centers);
    r.repetitions = 4;
    r.wall_ms = 1.25;
    rep.results.push_back(std::move(r));
    return rep;
}

}  // namespace

TEST_CASE("report json round trip preserves every field") {
    const Instance inst =
        make_inst({mv({0.0, missing}), mv({2.0, missing}), mv({10.0, 4.0})});
    const RunReport rep = sample_report(inst);
    const Json j = report_to_json(rep);

    // key order is part of the format
    auto it = j.begin();
    CHECK(it.key() == "version");
    ++it;
    CHECK(it.key() == "instance");
    ++it;
    CHECK(it.key() == "config");
    ++it;
    CHECK(it.key() == "results");
    CHECK(j["results"][0]["centers"][0][1].is_null());  // missing coordinate

    const RunReport back = report_from_json(j);
    CHECK(back.version == rep.version);
    CHECK(back.n == rep.n);
    CHECK(back.d == rep.d);
    CHECK(back.delta == rep.delta);
    REQUIRE(back.results.size() == 1);
    const AlgoResult& a = back.results[0];
    const AlgoResult& b = rep.results[0];
    CHECK(a.algorithm == b.algorithm);
    CHECK(a.solution.assignment == b.solution.assignment);
    CHECK(a.solution.cost == b.solution.cost);
    CHECK(a.repetitions == b.repetitions);
    CHECK(a.failures == b.failures);
    CHECK(a.fallback == b.fallback);
    CHECK(a.wall_ms == b.wall_ms);
    REQUIRE(a.solution.centers.size() == 2);
    CHECK(a.solution.centers[0] == b.solution.centers[0]);
    CHECK(a.solution.centers[1] == b.solution.centers[1]);

    // serialization is deterministic
    CHECK(report_to_json(back).dump() == j.dump());
}

TEST_CASE("report csv carries one row per algorithm") {
    const Instance inst =
        make_inst({mv({0.0, missing}), mv({2.0, missing}), mv({10.0, 4.0})});
    const std::string csv = report_to_csv(sample_report(inst));
    std::istringstream lines(csv);
    std::string header, row, extra;
    REQUIRE(std::getline(lines, header));
    CHECK(header == "version,n,d,delta,algorithm,cost,repetitions,failures,fallback,wall_ms");
    REQUIRE(std::getline(lines, row));
    CHECK(row.find("exact") != std::string::npos);
    CHECK(!std::getline(lines, extra));
}

TEST_CASE("malformed report json is rejected") {
    const Instance inst =
        make_inst({mv({0.0, missing}), mv({2.0, missing}), mv({10.0, 4.0})});
    const Json good = report_to_json(sample_report(inst));

    Json bad = good;
    bad.erase("version");
    CHECK_THROWS_AS(report_from_json(bad), std::invalid_argument);
    bad = good;
    bad["results"][0].erase("cost");
    CHECK_THROWS_AS(report_from_json(bad), std::invalid_argument);
    bad = good;
    bad["results"][0]["assignment"] = "oops";
    CHECK_THROWS_AS(report_from_json(bad), std::invalid_argument);
    bad = good;
    bad["instance"]["n"] = -3;
    CHECK_THROWS_AS(report_from_json(bad), std::invalid_argument);
    bad = good;
    bad["results"][0]["algorithm"] = "quantum";
    CHECK_THROWS_AS(report_from_json(bad), std::invalid_argument);
}

TEST_CASE("report checking recomputes every cost") {
    const Instance inst =
        make_inst({mv({0.0, missing}), mv({2.0, missing}), mv({10.0, 4.0})});
    RunReport rep = sample_report(inst);
    CHECK_NOTHROW(check_report(inst, rep));
    rep.results[0].solution.cost += 0.5;
    CHECK_THROWS_AS(check_report(inst, rep), InvariantViolation);
}
