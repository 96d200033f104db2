// Command line front end: cluster one instance, sweep a benchmark grid, or
// verify invariants on an instance / re-validate an emitted report.
//
// Exit codes: 0 success, 1 input error, 2 internal invariant violation.

#include "deltak/generator.hpp"
#include "deltak/io.hpp"
#include "deltak/lloyd.hpp"
#include "deltak/oracle.hpp"
#include "deltak/ptas.hpp"

#include <CLI11.hpp>

#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <thread>
#include <vector>

namespace {

using namespace deltak;

constexpr int kExitOk = 0;
constexpr int kExitInput = 1;
constexpr int kExitInvariant = 2;

double elapsed_ms(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
}

struct ClusterOptions {
    std::string input;
    std::string generate;
    int k = 2;
    std::string algorithm = "ptas";
    double epsilon = 0.5;
    long long repetitions = -1;  // <0: derived default
    std::uint64_t seed = 0;
    int threads = 1;
    std::string lloyd_init = "random";
    std::string output;
    std::string format = "json";
};

Instance load_instance(const std::string& input, const std::string& generate) {
    if (input.empty() == generate.empty())
        throw std::invalid_argument("exactly one of --input and --generate is required");
    if (!input.empty()) return load_csv_file(input);
    return deltak::generate(parse_generator_spec(generate)).instance;
}

SeedMode parse_seed_mode(const std::string& s) {
    if (s == "random") return SeedMode::random_points;
    if (s == "spread") return SeedMode::spread;
    throw std::invalid_argument("--lloyd-init must be 'random' or 'spread'");
}

AlgoResult run_ptas(const Instance& inst, const ClusterOptions& opt) {
    PtasConfig cfg;
    cfg.epsilon = opt.epsilon;
    if (opt.repetitions >= 0) cfg.repetitions = opt.repetitions;
    cfg.master_seed = opt.seed;
    cfg.threads = opt.threads;
    const auto t0 = std::chrono::steady_clock::now();
    PtasResult r = run(inst, opt.k, cfg);
    AlgoResult out;
    out.algorithm = "ptas";
    out.solution = std::move(r.solution);
    out.repetitions = r.repetitions;
    out.failures = r.failures;
    out.fallback = r.fallback;
    out.wall_ms = elapsed_ms(t0);
    return out;
}

AlgoResult run_lloyd(const Instance& inst, const ClusterOptions& opt) {
    LloydConfig cfg;
    cfg.seed = opt.seed;
    cfg.init = parse_seed_mode(opt.lloyd_init);
    const auto t0 = std::chrono::steady_clock::now();
    LloydResult r = lloyd(inst, opt.k, cfg);
    AlgoResult out;
    out.algorithm = "lloyd";
    out.solution = std::move(r.solution);
    out.repetitions = r.iterations;
    out.wall_ms = elapsed_ms(t0);
    return out;
}

AlgoResult run_exact(const Instance& inst, const ClusterOptions& opt) {
    const auto t0 = std::chrono::steady_clock::now();
    long long labelings = 0;
    AlgoResult out;
    out.algorithm = "exact";
    out.solution = exact_kmeans(inst, opt.k, OracleLimit{}, &labelings);
    out.repetitions = labelings;
    out.wall_ms = elapsed_ms(t0);
    return out;
}

/// Builds the report for one instance, recomputing every cost before emission
/// and, when the exact search ran, checking it lower-bounds the others.
RunReport build_report(const Instance& inst, const ClusterOptions& opt, Json config) {
    RunReport rep;
    rep.n = inst.size();
    rep.d = inst.d;
    rep.delta = inst.delta;
    rep.config = std::move(config);

    const bool all = opt.algorithm == "all";
    if (all || opt.algorithm == "ptas") rep.results.push_back(run_ptas(inst, opt));
    if (all || opt.algorithm == "lloyd") rep.results.push_back(run_lloyd(inst, opt));
    if (opt.algorithm == "exact") {
        rep.results.push_back(run_exact(inst, opt));
    } else if (all) {
        const OracleLimit lim;
        if (inst.size() <= lim.max_points && opt.k <= lim.max_k)
            rep.results.push_back(run_exact(inst, opt));
        else
            std::cerr << "note: skipping exact search (instance beyond brute-force limits)\n";
    }

    check_report(inst, rep);
    for (const AlgoResult& r : rep.results) {
        if (r.algorithm != "exact") continue;
        for (const AlgoResult& o : rep.results)
            if (o.algorithm != "exact" && r.solution.cost > o.solution.cost)
                throw InvariantViolation("exact cost exceeds " + o.algorithm + " cost");
    }
    return rep;
}

Json cluster_config_echo(const ClusterOptions& opt) {
    Json c;
    c["command"] = "cluster";
    c["input"] = opt.input.empty() ? Json(nullptr) : Json(opt.input);
    c["generate"] = opt.generate.empty() ? Json(nullptr) : Json(opt.generate);
    c["k"] = opt.k;
    c["algorithm"] = opt.algorithm;
    c["epsilon"] = opt.epsilon;
    c["repetitions"] = opt.repetitions;
    c["seed"] = opt.seed;
    c["threads"] = opt.threads;
    c["lloyd_init"] = opt.lloyd_init;
    c["format"] = opt.format;
    return c;
}

void write_output(const std::string& text, const std::string& path) {
    if (path.empty()) {
        std::cout << text;
        return;
    }
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::invalid_argument("cannot open output file: " + path);
    f << text;
}

int cmd_cluster(const ClusterOptions& opt) {
    if (opt.format != "json" && opt.format != "csv")
        throw std::invalid_argument("--format must be json or csv");
    const Instance inst = load_instance(opt.input, opt.generate);
    if (opt.k < 1 || static_cast<Eigen::Index>(opt.k) > inst.size())
        throw std::invalid_argument("--k must satisfy 1 <= k <= n");
    if (opt.algorithm != "ptas" && opt.algorithm != "lloyd" && opt.algorithm != "exact" &&
        opt.algorithm != "all")
        throw std::invalid_argument("--algorithm must be ptas, lloyd, exact, or all");
    const RunReport rep = build_report(inst, opt, cluster_config_echo(opt));
    if (opt.format == "json")
        write_output(report_to_json(rep).dump(2) + "\n", opt.output);
    else
        write_output(report_to_csv(rep), opt.output);
    return kExitOk;
}

// ---- bench ---------------------------------------------------------------

struct BenchOptions {
    std::string grid;
    std::string algorithms = "ptas,lloyd,exact";
    double epsilon = 0.5;
    long long repetitions = -1;
    std::uint64_t seed = 0;
    int threads = 1;
    std::string output;
    std::string format = "json";
};

std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> out;
    std::size_t pos = 0;
    for (;;) {
        const std::size_t q = s.find(sep, pos);
        if (q == std::string::npos) {
            out.push_back(s.substr(pos));
            return out;
        }
        out.push_back(s.substr(pos, q - pos));
        pos = q + 1;
    }
}

/// Expands "n=6,8;k=2,3;sigma=0.01" into the cartesian product of generator
/// specs, in grid order (later keys vary fastest).
std::vector<std::string> expand_grid(const std::string& grid) {
    std::vector<std::pair<std::string, std::vector<std::string>>> axes;
    for (const std::string& axis : split(grid, ';')) {
        if (axis.empty()) continue;
        const std::size_t eq = axis.find('=');
        if (eq == std::string::npos)
            throw std::invalid_argument("grid axis without '=': " + axis);
        axes.emplace_back(axis.substr(0, eq), split(axis.substr(eq + 1), ','));
    }
    if (axes.empty()) throw std::invalid_argument("--grid must name at least one axis");
    std::vector<std::string> specs{""};
    for (const auto& [key, vals] : axes) {
        std::vector<std::string> next;
        for (const std::string& prefix : specs)
            for (const std::string& v : vals)
                next.push_back(prefix.empty() ? key + "=" + v : prefix + "," + key + "=" + v);
        specs = std::move(next);
    }
    return specs;
}

int cmd_bench(const BenchOptions& opt) {
    if (opt.format != "json" && opt.format != "csv")
        throw std::invalid_argument("--format must be json or csv");
    const std::vector<std::string> cells = expand_grid(opt.grid);
    std::vector<std::string> algos = split(opt.algorithms, ',');
    for (const std::string& a : algos)
        if (a != "ptas" && a != "lloyd" && a != "exact")
            throw std::invalid_argument("--algorithms entries must be ptas, lloyd, or exact");

    std::vector<RunReport> reports(cells.size());
    std::vector<std::exception_ptr> errors(cells.size());
    std::atomic<std::size_t> next{0};
    auto work = [&]() {
        for (;;) {
            const std::size_t cell = next.fetch_add(1);
            if (cell >= cells.size()) break;
            try {
                GeneratorSpec gs = parse_generator_spec(cells[cell]);
                gs.seed = derive_seed(opt.seed, 2 * cell);
                const GeneratedInstance gen = deltak::generate(gs);
                ClusterOptions copt;
                copt.k = gs.k_true;
                copt.epsilon = opt.epsilon;
                copt.repetitions = opt.repetitions;
                copt.seed = derive_seed(opt.seed, 2 * cell + 1);
                copt.threads = 1;
                const OracleLimit lim;
                RunReport& rep = reports[cell];
                rep.n = gen.instance.size();
                rep.d = gen.instance.d;
                rep.delta = gen.instance.delta;
                for (const std::string& a : algos) {
                    if (a == "ptas") rep.results.push_back(run_ptas(gen.instance, copt));
                    if (a == "lloyd") rep.results.push_back(run_lloyd(gen.instance, copt));
                    if (a == "exact") {
                        if (gen.instance.size() > lim.max_points || copt.k > lim.max_k) continue;
                        rep.results.push_back(run_exact(gen.instance, copt));
                    }
                }
                Json c;
                c["command"] = "bench";
                c["cell"] = cell;
                c["generate"] = cells[cell] + ",seed=" + std::to_string(gs.seed);
                c["k"] = copt.k;
                c["algorithm"] = opt.algorithms;
                c["epsilon"] = copt.epsilon;
                c["repetitions"] = copt.repetitions;
                c["seed"] = copt.seed;
                rep.config = std::move(c);
                check_report(gen.instance, rep);
            } catch (...) {
                errors[cell] = std::current_exception();
            }
        }
    };
    const int nthreads = std::max(1, std::min<int>(opt.threads, static_cast<int>(cells.size())));
    if (nthreads == 1) {
        work();
    } else {
        std::vector<std::thread> pool;
        for (int i = 0; i < nthreads; ++i) pool.emplace_back(work);
        for (auto& t : pool) t.join();
    }
    for (const auto& e : errors)
        if (e) std::rethrow_exception(e);

    if (opt.format == "json") {
        Json arr = Json::array();
        for (const RunReport& r : reports) arr.push_back(report_to_json(r));
        write_output(arr.dump(2) + "\n", opt.output);
    } else {
        std::string text;
        for (std::size_t i = 0; i < reports.size(); ++i) {
            std::string block = report_to_csv(reports[i]);
            if (i > 0) block.erase(0, block.find('\n') + 1);  // keep one header
            text += block;
        }
        write_output(text, opt.output);
    }
    return kExitOk;
}

// ---- verify --------------------------------------------------------------

struct VerifyOptions {
    std::string input;
    std::string generate;
    std::string report;
    std::uint64_t seed = 0;
};

struct CheckFailure : std::logic_error {
    using std::logic_error::logic_error;
};

void check(bool ok, const std::string& what) {
    if (!ok) throw CheckFailure(what);
    std::cout << "[ok] " << what << "\n";
}

/// Randomized invariant battery on one instance; tolerances are fixed here.
void verify_instance(const Instance& inst, std::uint64_t seed) {
    constexpr double kRelTol = 1e-9;
    const IndexSet full = IndexSet::all(inst.d);
    const auto pts = all_points(inst);
    Rng rng = make_rng(seed, 0);

    double lo = inst.points[0].values.minCoeff(), hi = inst.points[0].values.maxCoeff();
    for (const DeltaPoint& p : inst.points) {
        lo = std::min(lo, p.values.minCoeff());
        hi = std::max(hi, p.values.maxCoeff());
    }
    const double span = std::max(hi - lo, 1.0);

    auto random_subset = [&](Rng& r) {
        IndexSet I = IndexSet::none(inst.d);
        for (Eigen::Index j = 0; j < inst.d; ++j)
            if (uniform_real(r) < 0.5) I.insert(j);
        return I;
    };
    auto random_probe = [&](Rng& r) {
        Eigen::ArrayXd v(inst.d);
        for (Eigen::Index j = 0; j < inst.d; ++j) v[j] = lo + (hi - lo) * uniform_real(r);
        return MaskedVector::full(std::move(v));
    };

    {  // cost against a probe decomposes through the masked mean
        bool ok = true;
        for (int trial = 0; trial < 200 && ok; ++trial) {
            const IndexSet I = random_subset(rng);
            const MaskedVector y = random_probe(rng);
            const Center m = mean_on(pts, full);
            double shift = 0.0;
            for (Eigen::Index j : I.indices()) {
                if (!m.defined_at(j)) continue;
                const auto cover = pd(pts, IndexSet::of(inst.d, {j}));
                const double dv = y.values[j] - m.values[j];
                shift += static_cast<double>(cover.size()) * dv * dv;
            }
            const double lhs = cost_on(pts, y, I);
            const double rhs = cost_on(pts, m, I) + shift;
            ok = std::abs(lhs - rhs) <= kRelTol * std::max({lhs, rhs, 1.0});
        }
        check(ok, "cost decomposition through the masked mean");
    }
    {  // masked mean minimizes the restricted cost
        bool ok = true;
        for (int trial = 0; trial < 200 && ok; ++trial) {
            const IndexSet I = random_subset(rng);
            const Center m = mean_on(pts, I);
            ok = cost_on(pts, m, I) <= cost_on(pts, random_probe(rng), I) * (1.0 + kRelTol);
        }
        check(ok, "masked mean minimizes the restricted cost");
    }
    {  // restricted cost is monotone and additive over coordinate sets
        bool ok = true;
        for (int trial = 0; trial < 200 && ok; ++trial) {
            const IndexSet I = random_subset(rng);
            const IndexSet Jset = random_subset(rng);
            const MaskedVector y = random_probe(rng);
            const double u = cost_on(pts, y, I | Jset);
            const double a = cost_on(pts, y, I - Jset);
            const double b = cost_on(pts, y, Jset);
            ok = u + 1e-12 * span * span >= cost_on(pts, y, I) &&
                 std::abs(u - (a + b)) <= 1e-12 * std::max({u, 1.0});
        }
        check(ok, "restricted cost is monotone and splits over disjoint coordinate sets");
    }
    {  // search trials respect the step budget and the state validator
        const int k = static_cast<int>(std::min<Eigen::Index>(2, inst.size()));
        const SearchConstants sc = derive_constants(k, inst.delta, 0.5);
        int completed = 0;
        bool ok = true;
        for (int trial = 0; trial < 50; ++trial) {
            Rng trng = make_rng(seed, 1000 + static_cast<std::uint64_t>(trial));
            const TrialOutcome t = run_once(inst, k, sc, trng);
            ok = ok && t.steps <= k * (inst.delta + 1);
            if (t.solution) {
                ++completed;
                validate_solution(inst, *t.solution);
            }
        }
        check(ok, "randomized trials stay within the step budget (" + std::to_string(completed) +
                      "/50 completed)");
    }
    {  // lloyd cost is non-increasing (asserted internally) and recomputable
        LloydConfig cfg;
        cfg.seed = seed;
        const int k = static_cast<int>(std::min<Eigen::Index>(2, inst.size()));
        const LloydResult r = lloyd(inst, k, cfg);
        validate_solution(inst, r.solution);
        bool mono = true;
        for (std::size_t i = 1; i < r.cost_history.size(); ++i)
            mono = mono && r.cost_history[i] <= r.cost_history[i - 1];
        check(mono, "lloyd cost history is non-increasing");
    }
}

int cmd_verify(const VerifyOptions& opt) {
    const int sources = (!opt.input.empty()) + (!opt.generate.empty()) + (!opt.report.empty());
    if (sources != 1)
        throw std::invalid_argument("verify needs exactly one of --input, --generate, --report");
    if (!opt.report.empty()) {
        std::ifstream f(opt.report);
        if (!f) throw std::invalid_argument("cannot open report file: " + opt.report);
        Json j = Json::parse(f, nullptr, true);
        const auto one = [&](const Json& rj) {
            const RunReport rep = report_from_json(rj);
            std::cout << "[ok] report schema (" << rep.results.size() << " results)\n";
            std::optional<Instance> inst;
            if (rep.config.contains("generate") && rep.config["generate"].is_string())
                inst = deltak::generate(
                               parse_generator_spec(rep.config["generate"].get<std::string>()))
                           .instance;
            else if (rep.config.contains("input") && rep.config["input"].is_string())
                inst = load_csv_file(rep.config["input"].get<std::string>());
            if (inst) {
                check_report(*inst, rep);
                std::cout << "[ok] all costs match their assignments and centers\n";
            } else {
                std::cout << "[--] no instance source in config; schema check only\n";
            }
        };
        if (j.is_array())
            for (const Json& rj : j) one(rj);
        else
            one(j);
        return kExitOk;
    }
    const Instance inst = load_instance(opt.input, opt.generate);
    verify_instance(inst, opt.seed);
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"k-means clustering for points with missing coordinates"};
    app.require_subcommand(1);

    ClusterOptions copt;
    CLI::App* cluster = app.add_subcommand("cluster", "cluster one instance and emit a report");
    cluster->add_option("--input", copt.input, "CSV instance file ('?' or empty field = missing)");
    cluster->add_option("--generate", copt.generate,
                        "generator spec, e.g. k=2,n=16,d=2,sigma=0.05,miss=0.2,delta=1,seed=7");
    cluster->add_option("--k", copt.k, "number of clusters")->required();
    cluster->add_option("--algorithm", copt.algorithm, "ptas|lloyd|exact|all (default ptas)");
    cluster->add_option("--epsilon", copt.epsilon, "approximation slack for ptas (default 0.5)");
    cluster->add_option("--repetitions", copt.repetitions,
                        "ptas trials (default scales with n and k)");
    cluster->add_option("--seed", copt.seed, "master seed for all algorithm randomness");
    cluster->add_option("--threads", copt.threads, "worker threads for ptas trials");
    cluster->add_option("--lloyd-init", copt.lloyd_init, "lloyd seeding: random|spread");
    cluster->add_option("--output", copt.output, "write the report here instead of stdout");
    cluster->add_option("--format", copt.format, "json|csv (default json)");

    BenchOptions bopt;
    CLI::App* bench = app.add_subcommand("bench", "sweep a generator grid, one report per cell");
    bench->add_option("--grid", bopt.grid, "semicolon-separated axes, e.g. n=8,12;k=2;sigma=0.01")
        ->required();
    bench->add_option("--algorithms", bopt.algorithms, "comma list of ptas,lloyd,exact");
    bench->add_option("--epsilon", bopt.epsilon, "approximation slack for ptas");
    bench->add_option("--repetitions", bopt.repetitions, "ptas trials per cell");
    bench->add_option("--seed", bopt.seed, "master seed; per-cell seeds derive from it");
    bench->add_option("--threads", bopt.threads, "cells processed concurrently");
    bench->add_option("--output", bopt.output, "write reports here instead of stdout");
    bench->add_option("--format", bopt.format, "json|csv (default json)");

    VerifyOptions vopt;
    CLI::App* verify = app.add_subcommand("verify", "check invariants or re-validate a report");
    verify->add_option("--input", vopt.input, "CSV instance to check");
    verify->add_option("--generate", vopt.generate, "generator spec to check");
    verify->add_option("--report", vopt.report, "previously emitted JSON report to re-validate");
    verify->add_option("--seed", vopt.seed, "seed for the randomized checks");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitInput;
    }

    try {
        if (cluster->parsed()) return cmd_cluster(copt);
        if (bench->parsed()) return cmd_bench(bopt);
        if (verify->parsed()) return cmd_verify(vopt);
    } catch (const InvariantViolation& e) {
        std::cerr << "invariant violation: " << e.what() << "\n";
        return kExitInvariant;
    } catch (const CheckFailure& e) {
        std::cerr << "check failed: " << e.what() << "\n";
        return kExitInvariant;
    } catch (const Json::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitInput;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitInput;
    }
    return kExitOk;
}
