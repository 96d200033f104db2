#pragma once

#include "deltak/geometry.hpp"
#include "deltak/partial.hpp"
#include "deltak/points.hpp"

#include <algorithm>
#include <limits>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

namespace deltak {

/// Hard bounds on the brute-force search; anything larger is refused up front.
struct OracleLimit {
    int max_points = 12;
    int max_k = 4;
};

namespace detail {

inline void check_oracle_limit(const Instance& inst, int k, const OracleLimit& limit) {
    if (k < 1) throw std::invalid_argument("k must be >= 1");
    if (inst.size() > limit.max_points)
        throw std::invalid_argument("exact search limited to " + std::to_string(limit.max_points) +
                                    " points, instance has " + std::to_string(inst.size()));
    if (k > limit.max_k)
        throw std::invalid_argument("exact search limited to k <= " + std::to_string(limit.max_k));
}

/// Scores one labeling: per-label mean centers and the total cost.
inline ClusteringSolution score_assignment(const Instance& inst, const std::vector<int>& labels,
                                           int k) {
    const IndexSet full = IndexSet::all(inst.d);
    std::vector<std::vector<const DeltaPoint*>> parts(static_cast<std::size_t>(k));
    for (std::size_t i = 0; i < labels.size(); ++i)
        parts[static_cast<std::size_t>(labels[i])].push_back(&inst.points[i]);
    ClusteringSolution sol;
    sol.assignment = labels;
    for (int c = 0; c < k; ++c)
        sol.centers.push_back(mean_on(parts[static_cast<std::size_t>(c)], full));
    sol.cost = clustering_value(parts, sol.centers);
    return sol;
}

}  // namespace detail

/// Globally optimal k-clustering by exhaustive search.
///
/// Labelings are enumerated in restricted-growth form (a label may exceed the
/// previous maximum by at most one), which visits every partition into at most
/// k parts exactly once instead of all k^n label vectors.  Enumeration order is
/// lexicographic, and only strictly better costs replace the incumbent, so ties
/// resolve to the lexicographically smallest canonical labeling.
inline ClusteringSolution exact_kmeans(const Instance& inst, int k, const OracleLimit& limit = {},
                                       long long* labelings_out = nullptr) {
    detail::check_oracle_limit(inst, k, limit);
    const std::size_t n = static_cast<std::size_t>(inst.size());
    std::vector<int> labels(n, 0);
    ClusteringSolution best;
    best.cost = std::numeric_limits<double>::infinity();
    long long visited = 0;

    // Iterative restricted-growth enumeration; max_before[i] = max label of the prefix.
    std::vector<int> max_before(n + 1, -1);
    std::size_t pos = 0;
    labels[0] = 0;
    while (true) {
        if (pos + 1 == n) {
            ++visited;
            ClusteringSolution cand = detail::score_assignment(inst, labels, k);
            if (cand.cost < best.cost) best = std::move(cand);
        }
        if (pos + 1 < n) {
            max_before[pos + 1] = std::max(max_before[pos], labels[pos]);
            ++pos;
            labels[pos] = 0;
            continue;
        }
        // backtrack to the deepest position that can still grow
        while (true) {
            const int cap = std::min(k - 1, max_before[pos] + 1);
            if (labels[pos] < cap) {
                ++labels[pos];
                break;
            }
            if (pos == 0) {
                if (labelings_out) *labelings_out = visited;
                return best;
            }
            --pos;
        }
    }
}

/// Minimum cost over all completions of a partially fixed labeling (free
/// points range over all k labels; centers are the per-part means).  With no
/// fixed labels this equals the exact_kmeans cost.
inline double best_partition_value(const Instance& inst, int k, const std::map<int, int>& fixed,
                                   const OracleLimit& limit = {}) {
    detail::check_oracle_limit(inst, k, limit);
    const std::size_t n = static_cast<std::size_t>(inst.size());
    std::vector<int> labels(n, 0);
    std::vector<bool> is_fixed(n, false);
    std::vector<std::size_t> free_idx;
    for (const auto& [id, label] : fixed) {
        if (label < 0 || label >= k)
            throw std::invalid_argument("fixed label out of range for point " + std::to_string(id));
        const auto idx = static_cast<std::size_t>(inst.index_of(id));
        labels[idx] = label;
        is_fixed[idx] = true;
    }
    for (std::size_t i = 0; i < n; ++i)
        if (!is_fixed[i]) free_idx.push_back(i);

    double best = std::numeric_limits<double>::infinity();
    while (true) {
        best = std::min(best, detail::score_assignment(inst, labels, k).cost);
        std::size_t j = 0;
        for (; j < free_idx.size(); ++j) {
            if (++labels[free_idx[j]] < k) break;
            labels[free_idx[j]] = 0;
        }
        if (j == free_idx.size()) return best;
    }
}

/// Minimum extension value of a partial clustering: free points range over all
/// clusters, pinned members stay put, centers are the associated centers.
inline double opt_partial(const PartialClustering& pc, const OracleLimit& limit = {}) {
    const Instance& inst = pc.instance();
    detail::check_oracle_limit(inst, pc.k(), limit);
    const std::vector<int> pool = pc.pool_ids();
    std::vector<int> choice(pool.size(), 0);
    double best = std::numeric_limits<double>::infinity();
    while (true) {
        Extension ext;
        ext.parts.resize(static_cast<std::size_t>(pc.k()));
        for (int i = 0; i < pc.k(); ++i)
            ext.parts[static_cast<std::size_t>(i)] = pc.cluster(i).members;
        for (std::size_t j = 0; j < pool.size(); ++j) {
            auto& part = ext.parts[static_cast<std::size_t>(choice[j])];
            part.insert(std::upper_bound(part.begin(), part.end(), pool[j]), pool[j]);
        }
        best = std::min(best, extension_value(pc, ext));
        std::size_t j = 0;
        for (; j < choice.size(); ++j) {
            if (++choice[j] < pc.k()) break;
            choice[j] = 0;
        }
        if (j == choice.size()) return best;
    }
}

}  // namespace deltak
