#pragma once

#include "deltak/geometry.hpp"
#include "deltak/partial.hpp"
#include "deltak/points.hpp"
#include "deltak/rng.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

namespace deltak {

enum class SeedMode { random_points, spread };

struct LloydConfig {
    int max_iters = 100;
    double tol = 1e-9;  // relative cost improvement below which iteration stops
    SeedMode init = SeedMode::random_points;
    std::uint64_t seed = 0;
};

/// Initial centers are always input points promoted to centers, so missing
/// coordinates stay missing.  random_points draws k distinct points; spread
/// starts random and then repeatedly takes the point maximizing the minimum
/// restricted distance to the centers chosen so far (smallest id on ties).
inline std::vector<Center> seed_centers(const Instance& inst, int k, SeedMode mode, Rng& rng) {
    const auto n = static_cast<std::size_t>(inst.size());
    if (k < 1 || static_cast<std::size_t>(k) > n)
        throw std::invalid_argument("k must satisfy 1 <= k <= n");
    std::vector<Center> centers;
    centers.reserve(static_cast<std::size_t>(k));
    std::vector<bool> used(n, false);
    if (mode == SeedMode::random_points) {
        for (int c = 0; c < k; ++c) {
            std::size_t pick = uniform_index(rng, n - static_cast<std::size_t>(c));
            for (std::size_t i = 0; i < n; ++i) {
                if (used[i]) continue;
                if (pick == 0) {
                    used[i] = true;
                    centers.push_back(inst.points[i]);
                    break;
                }
                --pick;
            }
        }
    } else {
        const std::size_t first = uniform_index(rng, n);
        used[first] = true;
        centers.push_back(inst.points[first]);
        while (centers.size() < static_cast<std::size_t>(k)) {
            std::size_t best = n;
            double best_d = -1.0;
            for (std::size_t i = 0; i < n; ++i) {
                if (used[i]) continue;
                double mind = std::numeric_limits<double>::infinity();
                for (const Center& c : centers) mind = std::min(mind, dist_sq(inst.points[i], c));
                if (mind > best_d) {
                    best_d = mind;
                    best = i;
                }
            }
            used[best] = true;
            centers.push_back(inst.points[best]);
        }
    }
    return centers;
}

struct LloydResult {
    ClusteringSolution solution;
    int iterations = 0;
    std::vector<double> cost_history;
};

/// Alternating assignment / mean update with missing-data distances throughout.
/// Assignment measures against fully defined working centers: a cluster
/// coordinate with no defined member is backed by the instance-wide mean of
/// that coordinate (0 when the whole column is missing).  Without this a
/// center stays blind on such coordinates, points join on partial distances,
/// and the following mean update can raise the cost.  Ties in the assignment
/// go to the smallest cluster index.  A cluster left empty after assignment
/// steals the point farthest from its own working center (smallest index on
/// ties) before means are recomputed; alone in its new cluster, that point
/// costs nothing after the update.  The reported centers are the plain member
/// means, so backed coordinates never enter the cost.  The cost after each
/// full iteration never increases; this is asserted every iteration.
inline LloydResult lloyd(const Instance& inst, int k, const LloydConfig& cfg) {
    const auto n = static_cast<std::size_t>(inst.size());
    Rng rng = make_rng(cfg.seed, 0);
    std::vector<Center> centers = seed_centers(inst, k, cfg.init, rng);
    const IndexSet full = IndexSet::all(inst.d);

    const Center global = mean_on(all_points(inst), full);
    const auto backed = [&](const Center& c) {
        Center w = c;
        for (Eigen::Index j = 0; j < inst.d; ++j)
            if (!w.defined_at(j)) w.set(j, global.defined_at(j) ? global.values[j] : 0.0);
        return w;
    };

    LloydResult res;
    std::vector<int> assign(n, 0);
    double prev_cost = std::numeric_limits<double>::infinity();

    for (int iter = 1; iter <= cfg.max_iters; ++iter) {
        std::vector<Center> working;
        working.reserve(static_cast<std::size_t>(k));
        for (const Center& c : centers) working.push_back(backed(c));

        std::vector<std::size_t> sizes(static_cast<std::size_t>(k), 0);
        for (std::size_t i = 0; i < n; ++i) {
            int best = 0;
            double best_d = std::numeric_limits<double>::infinity();
            for (int c = 0; c < k; ++c) {
                const double d2 = dist_sq(inst.points[i], working[static_cast<std::size_t>(c)], full);
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
            // steal the point farthest from its current center, from a donor
            // cluster that can spare one
            std::size_t steal = n;
            double far_d = -1.0;
            for (std::size_t i = 0; i < n; ++i) {
                const auto owner = static_cast<std::size_t>(assign[i]);
                if (sizes[owner] < 2) continue;
                const double d2 = dist_sq(inst.points[i], working[owner], full);
                if (d2 > far_d) {
                    far_d = d2;
                    steal = i;
                }
            }
            if (steal == n) throw InvariantViolation("no donor point for an empty cluster");
            --sizes[static_cast<std::size_t>(assign[steal])];
            assign[steal] = c;
            ++sizes[static_cast<std::size_t>(c)];
        }

        std::vector<std::vector<const DeltaPoint*>> parts(static_cast<std::size_t>(k));
        for (std::size_t i = 0; i < n; ++i)
            parts[static_cast<std::size_t>(assign[i])].push_back(&inst.points[i]);
        for (int c = 0; c < k; ++c)
            centers[static_cast<std::size_t>(c)] = mean_on(parts[static_cast<std::size_t>(c)], full);

        const double cost = clustering_value(parts, centers);
        if (cost > prev_cost)
            throw InvariantViolation("lloyd cost increased across an iteration");
        res.cost_history.push_back(cost);
        res.iterations = iter;
        const bool first = !std::isfinite(prev_cost);
        const bool stop = !first && (prev_cost - cost) <= cfg.tol * std::max(prev_cost, 1e-300);
        prev_cost = cost;
        if (stop || cost == 0.0) break;
    }

    res.solution.assignment = assign;
    res.solution.centers = centers;
    res.solution.cost = prev_cost;
    return res;
}

}  // namespace deltak
