#pragma once

#include "deltak/geometry.hpp"
#include "deltak/lloyd.hpp"
#include "deltak/partial.hpp"
#include "deltak/points.hpp"
#include "deltak/rng.hpp"

#include <algorithm>
#include <atomic>
#include <bit>
#include <cmath>
#include <cstdint>
#include <exception>
#include <iterator>
#include <limits>
#include <mutex>
#include <optional>
#include <random>
#include <stdexcept>
#include <thread>
#include <utility>
#include <vector>

namespace deltak {

struct PtasConfig {
    double epsilon = 0.5;
    /// Independent randomized trials; unset means 10 * ceil((log2 n)^k),
    /// capped at 100000.
    std::optional<long long> repetitions;
    std::uint64_t master_seed = 0;
    /// Trials may run concurrently; the result is identical for any thread count.
    int threads = 1;
    // Test hooks replacing individual derived constants.
    std::optional<double> q_override;
    std::optional<double> delta_small_override;
    std::optional<long long> t_override;
    std::optional<long long> t_prime_override;
};

/// Sampling parameters governing one trial, derived from (k, delta, epsilon).
struct SearchConstants {
    double alpha = 0.0;        // per-step slack so that (1+alpha)^(k(delta+1)) <= 1+epsilon
    double q = 0.0;            // sampling density floor
    double delta_small = 0.0;  // coordinate coverage floor
    long long t = 0;           // draws when seeding a fresh center
    long long t_prime = 0;     // draws when fixing one more coordinate
};

namespace detail {
inline long long ceil_to_ll(double x, const char* what) {
    const double c = std::ceil(x);
    if (!(c >= 1.0) || c > 1e15)
        throw std::invalid_argument(std::string(what) + " out of range (epsilon too small?)");
    return static_cast<long long>(c);
}
}  // namespace detail

inline SearchConstants derive_constants(int k, int delta, double epsilon) {
    if (k < 1) throw std::invalid_argument("k must be >= 1");
    if (delta < 0) throw std::invalid_argument("delta must be >= 0");
    if (!(epsilon > 0.0)) throw std::invalid_argument("epsilon must be positive");
    const double budget = static_cast<double>(k) * (delta + 1);
    const double dg = std::max(delta, 1);  // delta = 0 uses the delta = 1 constants
    SearchConstants sc;
    sc.alpha = std::pow(1.0 + epsilon, 1.0 / budget) - 1.0;
    sc.q = std::min(sc.alpha / 3.0, 1.0 / (128.0 * dg * dg * dg));
    sc.delta_small = 1.0 / (2.0 * dg);
    sc.t = detail::ceil_to_ll(8.0 / (sc.q * sc.delta_small), "sample size t");
    sc.t_prime = detail::ceil_to_ll(2.0 / sc.q, "sample size t_prime");
    return sc;
}

/// Overrides replace the matching constant; t and t_prime are re-derived from
/// an overridden q or delta_small unless they are themselves overridden.
inline SearchConstants derive_constants(int k, int delta, const PtasConfig& cfg) {
    SearchConstants sc = derive_constants(k, delta, cfg.epsilon);
    if (cfg.q_override) {
        if (!(*cfg.q_override > 0.0)) throw std::invalid_argument("q override must be positive");
        sc.q = *cfg.q_override;
    }
    if (cfg.delta_small_override) {
        if (!(*cfg.delta_small_override > 0.0))
            throw std::invalid_argument("delta_small override must be positive");
        sc.delta_small = *cfg.delta_small_override;
    }
    if (cfg.q_override || cfg.delta_small_override) {
        sc.t = detail::ceil_to_ll(8.0 / (sc.q * sc.delta_small), "sample size t");
        sc.t_prime = detail::ceil_to_ll(2.0 / sc.q, "sample size t_prime");
    }
    if (cfg.t_override) {
        if (*cfg.t_override < 1) throw std::invalid_argument("t override must be >= 1");
        sc.t = *cfg.t_override;
    }
    if (cfg.t_prime_override) {
        if (*cfg.t_prime_override < 1) throw std::invalid_argument("t_prime override must be >= 1");
        sc.t_prime = *cfg.t_prime_override;
    }
    return sc;
}

/// Per-trial success floor of the analysis; only tests look at it.
inline double q_prime(double q, int k, int delta) {
    return q / (32.0 * std::pow(6.0, static_cast<double>(delta + 1) * k));
}

inline long long default_repetitions(Eigen::Index n, int k) {
    const double l = std::log2(static_cast<double>(std::max<Eigen::Index>(n, 1)));
    const double raw = 10.0 * std::ceil(std::pow(l, k));
    const double capped = std::min(raw, 100000.0);
    return std::max<long long>(1, static_cast<long long>(capped));
}

/// Candidate pool pruned around cluster i's current center.
///
/// Among the free points fully determined on the cluster's fixed coordinates,
/// the ceil(n / 2^(r-1)) farthest from the center (larger id wins distance
/// ties) are dropped; the near remainder is the exclusion set.  Rank r = 1
/// excludes nothing.  Deterministic given r.
inline std::vector<int> guess_exclusion_set(const PartialClustering& pc, int i, int r) {
    if (r < 1) throw std::invalid_argument("radius rank must be >= 1");
    const Instance& inst = pc.instance();
    const ClusterState& c = pc.cluster(i);
    const std::vector<int> pool = pc.pool_ids();
    const auto pool_ptrs = collect(inst, pool);
    std::vector<const DeltaPoint*> F = fd(pool_ptrs, c.fixed_coords);
    if (F.empty()) return {};

    const long long den = 1LL << std::min(r - 1, 62);
    const long long n = static_cast<long long>(inst.size());
    const long long keep_far = std::min<long long>((n + den - 1) / den, static_cast<long long>(F.size()));

    const IndexSet full = IndexSet::all(inst.d);
    std::vector<std::pair<double, int>> ranked;  // (distance, id)
    ranked.reserve(F.size());
    for (const DeltaPoint* p : F) ranked.emplace_back(dist_sq(*p, c.center, full), p->id);
    std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
        if (a.first != b.first) return a.first > b.first;
        return a.second > b.second;
    });

    std::vector<int> excl;
    for (std::size_t j = static_cast<std::size_t>(keep_far); j < ranked.size(); ++j)
        excl.push_back(ranked[j].second);
    std::sort(excl.begin(), excl.end());
    return excl;
}

/// Multiplicities of t independent uniform draws (with replacement) from a pool
/// of size m.  Realized directly for small t and through sequential binomial
/// splits otherwise; both give exactly the multinomial(t, uniform) law, the
/// split form in O(m) instead of O(t).
inline std::vector<long long> draw_counts(std::size_t m, long long t, Rng& rng) {
    std::vector<long long> counts(m, 0);
    if (t <= static_cast<long long>(4 * m)) {
        for (long long i = 0; i < t; ++i) ++counts[uniform_index(rng, m)];
        return counts;
    }
    long long remaining = t;
    for (std::size_t i = 0; i + 1 < m && remaining > 0; ++i) {
        std::binomial_distribution<long long> bin(remaining, 1.0 / static_cast<double>(m - i));
        const long long c = bin(rng);
        counts[i] = c;
        remaining -= c;
    }
    counts[m - 1] += remaining;
    return counts;
}

struct StepTrace {
    enum class Kind { copy_center, copy_coordinate, sample_new, sample_extend };
    Kind kind = Kind::sample_new;
    int src = -1;                    // copy branches: source cluster
    int dst = -1;                    // mutated cluster
    Eigen::Index coord = -1;         // copy_coordinate / sample_extend
    std::vector<int> radius_ranks;   // per cluster; 0 where no exclusion guess was made
    int seed_point = -1;             // sample_new: id of the domain-defining point
    std::vector<int> sampled_ids;    // ids drawn at least once in the main batch
    int moved = 0;                   // points absorbed by the closing assignment pass
    int total_steps_after = 0;
};

/// One guessing step.  Picks uniformly among the currently feasible branches:
/// clone a center onto a blank cluster, transfer one fixed coordinate, or
/// estimate from a random sample of the unpruned pool (seeding a blank target
/// or fixing one more coordinate of a touched one).  Ends with the forced
/// assignment pass.  Returns false when the sampling branch hits a dead end,
/// which aborts the enclosing trial; the total step count strictly grows on
/// success.
inline bool step(PartialClustering& pc, const SearchConstants& sc, Rng& rng,
                 StepTrace* out = nullptr) {
    const Instance& inst = pc.instance();
    const int k = pc.k();
    const int before = pc.total_steps();
    StepTrace tr;

    std::vector<std::pair<int, int>> clone_pairs;
    std::vector<std::pair<int, int>> transfer_pairs;
    for (int i = 0; i < k; ++i) {
        if (pc.cluster(i).fixed_coords.empty()) continue;
        for (int j = 0; j < k; ++j) {
            if (i == j) continue;
            const ClusterState& cj = pc.cluster(j);
            if (cj.fixed_coords.empty()) {
                clone_pairs.emplace_back(i, j);
            } else if (cj.steps <= inst.delta &&
                       !(pc.cluster(i).fixed_coords - cj.fixed_coords).empty()) {
                transfer_pairs.emplace_back(i, j);
            }
        }
    }

    std::vector<StepTrace::Kind> feasible;
    if (!clone_pairs.empty()) feasible.push_back(StepTrace::Kind::copy_center);
    if (!transfer_pairs.empty()) feasible.push_back(StepTrace::Kind::copy_coordinate);
    feasible.push_back(StepTrace::Kind::sample_new);  // sampling is always attemptable
    const StepTrace::Kind kind = feasible[uniform_index(rng, feasible.size())];

    if (kind == StepTrace::Kind::copy_center) {
        const auto [i, j] = clone_pairs[uniform_index(rng, clone_pairs.size())];
        pc.copy_center(i, j);
        tr.kind = StepTrace::Kind::copy_center;
        tr.src = i;
        tr.dst = j;
    } else if (kind == StepTrace::Kind::copy_coordinate) {
        const auto [i, j] = transfer_pairs[uniform_index(rng, transfer_pairs.size())];
        const auto cands = (pc.cluster(i).fixed_coords - pc.cluster(j).fixed_coords).indices();
        const Eigen::Index c = cands[uniform_index(rng, cands.size())];
        pc.copy_coordinate(i, j, c);
        tr.kind = StepTrace::Kind::copy_coordinate;
        tr.src = i;
        tr.dst = j;
        tr.coord = c;
    } else {
        // prune the pool with one exclusion guess per touched cluster
        tr.radius_ranks.assign(static_cast<std::size_t>(k), 0);
        const auto n = static_cast<unsigned long long>(inst.size());
        const int rmax = std::max(1, static_cast<int>(std::bit_width(n)) - 1);
        std::vector<int> excluded;
        for (int i = 0; i < k; ++i) {
            if (pc.cluster(i).fixed_coords.empty()) continue;
            const int r = 1 + static_cast<int>(uniform_index(rng, static_cast<std::size_t>(rmax)));
            tr.radius_ranks[static_cast<std::size_t>(i)] = r;
            const auto b = guess_exclusion_set(pc, i, r);
            excluded.insert(excluded.end(), b.begin(), b.end());
        }
        std::sort(excluded.begin(), excluded.end());
        excluded.erase(std::unique(excluded.begin(), excluded.end()), excluded.end());

        const std::vector<int> pool = pc.pool_ids();
        std::vector<int> sampleable;
        std::set_difference(pool.begin(), pool.end(), excluded.begin(), excluded.end(),
                            std::back_inserter(sampleable));
        if (sampleable.empty()) return false;
        const auto ptrs = collect(inst, sampleable);

        const int target = static_cast<int>(uniform_index(rng, static_cast<std::size_t>(k)));
        tr.dst = target;
        const ClusterState& tc = pc.cluster(target);

        if (tc.fixed_coords.empty()) {
            tr.kind = StepTrace::Kind::sample_new;
            const DeltaPoint& x = *ptrs[uniform_index(rng, ptrs.size())];
            tr.seed_point = x.id;
            const IndexSet J = dom(x);

            const auto counts = draw_counts(ptrs.size(), sc.t, rng);
            Mask covered = Mask::Constant(inst.d, false);
            for (std::size_t j = 0; j < ptrs.size(); ++j) {
                if (counts[j] > 0) {
                    covered = covered || ptrs[j]->defined;
                    tr.sampled_ids.push_back(ptrs[j]->id);
                }
            }
            const IndexSet J_hit = J & IndexSet::from_mask(covered);
            Center u = mean_weighted(ptrs, counts, J_hit);
            for (Eigen::Index a : (J - J_hit).indices()) {
                const auto fresh = draw_counts(ptrs.size(), sc.t, rng);
                DoubleDouble acc;
                long long total = 0;
                for (std::size_t j = 0; j < ptrs.size(); ++j) {
                    if (fresh[j] > 0 && ptrs[j]->defined_at(a)) {
                        acc.add_product(static_cast<double>(fresh[j]), ptrs[j]->values[a]);
                        total += fresh[j];
                    }
                }
                if (total == 0) return false;  // no draw was defined at a
                u.set(a, acc.divided_by(static_cast<double>(total)));
            }
            pc.seed_cluster(target, u);
        } else {
            tr.kind = StepTrace::Kind::sample_extend;
            const IndexSet open = tc.fixed_coords.complement();
            if (open.empty()) return false;  // center already fully fixed
            const auto open_idx = open.indices();
            const Eigen::Index j = open_idx[uniform_index(rng, open_idx.size())];
            tr.coord = j;

            const auto counts = draw_counts(ptrs.size(), sc.t_prime, rng);
            DoubleDouble acc;
            long long total = 0;
            for (std::size_t s = 0; s < ptrs.size(); ++s) {
                if (counts[s] > 0) {
                    tr.sampled_ids.push_back(ptrs[s]->id);
                    if (ptrs[s]->defined_at(j)) {
                        acc.add_product(static_cast<double>(counts[s]), ptrs[s]->values[j]);
                        total += counts[s];
                    }
                }
            }
            if (total == 0) return false;  // no draw was defined at j
            pc.extend_cluster(target, j, acc.divided_by(static_cast<double>(total)));
        }
    }

    tr.moved = pc.assign_fully_determined();
    tr.total_steps_after = pc.total_steps();
    if (tr.total_steps_after <= before)
        throw InvariantViolation("guessing step did not increase the total step count");
    if (out) *out = tr;
    return true;
}

struct TrialOutcome {
    std::optional<ClusteringSolution> solution;
    int steps = 0;
    std::vector<StepTrace> trace;
};

/// One randomized trial: blank state, guessing steps until complete or stuck,
/// then the center cleanup.  Completion takes at most k*(delta+1) steps; once
/// every per-cluster budget is spent, all centers are fully fixed and the
/// closing assignment pass absorbs the whole pool.
inline TrialOutcome run_once(const Instance& inst, int k, const SearchConstants& sc, Rng& rng,
                             bool keep_trace = false) {
    TrialOutcome out;
    PartialClustering pc(inst, k);
    pc.assign_fully_determined();
    const int budget = k * (inst.delta + 1);
    while (!pc.is_complete()) {
        if (out.steps >= budget)
            throw InvariantViolation("trial exceeded the step budget without completing");
        StepTrace tr;
        if (!step(pc, sc, rng, &tr)) return out;
        ++out.steps;
        if (keep_trace) out.trace.push_back(std::move(tr));
    }
    out.solution = finalize(pc);
    return out;
}

struct PtasResult {
    ClusteringSolution solution;
    SearchConstants constants;
    long long repetitions = 0;
    long long failures = 0;
    long long best_repetition = -1;  // -1 when every trial failed
    int max_steps = 0;               // largest step count any trial reached
    bool fallback = false;           // solution came from the Lloyd baseline
};

/// Full search: independent trials with per-trial seeds derived from the
/// master seed, keeping the cheapest completed solution (lowest trial index on
/// ties, so the result does not depend on scheduling).  If every trial fails,
/// the Lloyd baseline supplies the solution and the result is flagged.
inline PtasResult run(const Instance& inst, int k, const PtasConfig& cfg) {
    if (k < 1 || static_cast<Eigen::Index>(k) > inst.size())
        throw std::invalid_argument("k must satisfy 1 <= k <= n");
    PtasResult res;
    res.constants = derive_constants(k, inst.delta, cfg);
    const long long reps = cfg.repetitions.value_or(default_repetitions(inst.size(), k));
    if (reps < 1) throw std::invalid_argument("repetitions must be >= 1");
    res.repetitions = reps;

    struct Local {
        double cost = std::numeric_limits<double>::infinity();
        long long rep = -1;
        ClusteringSolution sol;
        long long failures = 0;
        int max_steps = 0;
    };
    const int nthreads = static_cast<int>(
        std::clamp<long long>(cfg.threads, 1, std::min<long long>(reps, 256)));
    std::vector<Local> locals(static_cast<std::size_t>(nthreads));
    std::atomic<long long> next{0};
    std::exception_ptr first_error;
    std::mutex error_mu;

    auto work = [&](int slot) {
        Local& loc = locals[static_cast<std::size_t>(slot)];
        try {
            for (;;) {
                const long long rep = next.fetch_add(1);
                if (rep >= reps) break;
                Rng rng = make_rng(cfg.master_seed, static_cast<std::uint64_t>(rep));
                TrialOutcome t = run_once(inst, k, res.constants, rng);
                loc.max_steps = std::max(loc.max_steps, t.steps);
                if (!t.solution) {
                    ++loc.failures;
                    continue;
                }
                const double c = t.solution->cost;
                if (c < loc.cost || (c == loc.cost && rep < loc.rep)) {
                    loc.cost = c;
                    loc.rep = rep;
                    loc.sol = std::move(*t.solution);
                }
            }
        } catch (...) {
            std::scoped_lock lk(error_mu);
            if (!first_error) first_error = std::current_exception();
        }
    };

    if (nthreads == 1) {
        work(0);
    } else {
        std::vector<std::thread> threads;
        threads.reserve(static_cast<std::size_t>(nthreads));
        for (int s = 0; s < nthreads; ++s) threads.emplace_back(work, s);
        for (auto& th : threads) th.join();
    }
    if (first_error) std::rethrow_exception(first_error);

    Local best;
    for (Local& loc : locals) {
        res.failures += loc.failures;
        res.max_steps = std::max(res.max_steps, loc.max_steps);
        if (loc.rep < 0) continue;
        if (loc.cost < best.cost || (loc.cost == best.cost && loc.rep < best.rep)) {
            best.cost = loc.cost;
            best.rep = loc.rep;
            best.sol = std::move(loc.sol);
        }
    }
    if (best.rep >= 0) {
        res.solution = std::move(best.sol);
        res.best_repetition = best.rep;
    } else {
        LloydConfig lcfg;
        lcfg.init = SeedMode::spread;
        lcfg.seed = derive_seed(cfg.master_seed, 0xFA11BACCULL);
        res.solution = lloyd(inst, k, lcfg).solution;
        res.fallback = true;
    }
    return res;
}

}  // namespace deltak
