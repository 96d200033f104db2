#pragma once

#include "deltak/geometry.hpp"
#include "deltak/points.hpp"

#include <algorithm>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace deltak {

/// Completed clustering: one cluster label per point (by instance position),
/// k centers, and the total cost of that pairing.
struct ClusteringSolution {
    std::vector<int> assignment;
    std::vector<Center> centers;
    double cost = 0.0;
};

inline double solution_cost(const Instance& inst, std::span<const int> assignment,
                            std::span<const Center> centers) {
    if (static_cast<Eigen::Index>(assignment.size()) != inst.size())
        throw std::invalid_argument("assignment length does not match instance size");
    std::vector<std::vector<const DeltaPoint*>> parts(centers.size());
    for (std::size_t i = 0; i < assignment.size(); ++i) {
        const int c = assignment[i];
        if (c < 0 || c >= static_cast<int>(centers.size()))
            throw std::invalid_argument("assignment label out of range");
        parts[static_cast<std::size_t>(c)].push_back(&inst.points[i]);
    }
    return clustering_value(parts, centers);
}

inline void validate_solution(const Instance& inst, const ClusteringSolution& sol,
                              double rel_tol = 1e-9) {
    const double recomputed = solution_cost(inst, sol.assignment, sol.centers);
    const double scale = std::max({std::abs(recomputed), std::abs(sol.cost), 1e-300});
    if (std::abs(recomputed - sol.cost) > rel_tol * scale)
        throw InvariantViolation("solution cost " + std::to_string(sol.cost) +
                                 " does not match recomputation " + std::to_string(recomputed));
}

/// Per-cluster guessing state.
///   steps         number of guessing steps spent on this cluster so far
///   members       ids of the points already pinned to this cluster
///   fixed_coords  coordinates of the center already fixed
///   center        the partially built center; defined exactly on fixed_coords
struct ClusterState {
    int steps = 0;
    std::vector<int> members;
    IndexSet fixed_coords;
    Center center;
};

/// State machine the search operates on.  For every cluster, steps stays in
/// [0, delta+1]; a cluster touched at least once has at least d-delta+(steps-1)
/// fixed coordinates; untouched clusters are completely blank; member sets are
/// pairwise disjoint.  With DELTAK_VALIDATE defined, the full validator runs
/// after every mutation.
class PartialClustering {
public:
    PartialClustering(const Instance& inst, int k) : inst_(&inst), k_(k) {
        if (k < 1 || static_cast<Eigen::Index>(k) > inst.size())
            throw std::invalid_argument("k must satisfy 1 <= k <= n");
        clusters_.resize(static_cast<std::size_t>(k));
        for (auto& c : clusters_) {
            c.fixed_coords = IndexSet::none(inst.d);
            c.center = Center::all_missing(inst.d);
        }
        assigned_.assign(static_cast<std::size_t>(inst.size()), -1);
        maybe_validate();
    }

    const Instance& instance() const { return *inst_; }
    int k() const { return k_; }
    const ClusterState& cluster(int i) const { return clusters_[static_cast<std::size_t>(i)]; }
    const std::vector<ClusterState>& clusters() const { return clusters_; }

    /// Cluster the point currently belongs to, or -1 while it is still free.
    int assigned_cluster_of_index(int idx) const { return assigned_[static_cast<std::size_t>(idx)]; }

    /// Ids of the still-unassigned points, ascending.
    std::vector<int> pool_ids() const {
        std::vector<int> out;
        for (std::size_t i = 0; i < assigned_.size(); ++i)
            if (assigned_[i] < 0) out.push_back(inst_->points[i].id);
        std::sort(out.begin(), out.end());
        return out;
    }

    int total_steps() const {
        int s = 0;
        for (const auto& c : clusters_) s += c.steps;
        return s;
    }

    bool is_complete() const {
        for (int a : assigned_)
            if (a < 0) return false;
        return true;
    }

    // ---- mutations used by the guessing steps ----------------------------

    /// Clone cluster src's center state onto a blank cluster dst.
    void copy_center(int src, int dst) {
        ClusterState& s = clusters_[static_cast<std::size_t>(src)];
        ClusterState& t = clusters_[static_cast<std::size_t>(dst)];
        if (s.fixed_coords.empty() || !t.fixed_coords.empty())
            throw InvariantViolation("copy_center requires a touched source and a blank target");
        t.fixed_coords = s.fixed_coords;
        t.center = s.center;
        t.steps = s.steps;
        maybe_validate();
    }

    /// Transfer one fixed coordinate value from src to dst.
    void copy_coordinate(int src, int dst, Eigen::Index coord) {
        ClusterState& s = clusters_[static_cast<std::size_t>(src)];
        ClusterState& t = clusters_[static_cast<std::size_t>(dst)];
        if (s.fixed_coords.empty() || t.fixed_coords.empty())
            throw InvariantViolation("copy_coordinate requires both clusters touched");
        if (!s.fixed_coords.contains(coord) || t.fixed_coords.contains(coord))
            throw InvariantViolation("copy_coordinate needs a coordinate fixed in src only");
        if (t.steps > inst_->delta)
            throw InvariantViolation("copy_coordinate would exceed the per-cluster step budget");
        t.center.set(coord, s.center.values[coord]);
        t.fixed_coords.insert(coord);
        t.steps += 1;
        maybe_validate();
    }

    /// First touch of a blank cluster: install a center estimate.
    void seed_cluster(int i, const Center& u) {
        ClusterState& c = clusters_[static_cast<std::size_t>(i)];
        if (!c.fixed_coords.empty() || c.steps != 0)
            throw InvariantViolation("seed_cluster requires a blank cluster");
        c.center = u;
        c.fixed_coords = dom(u);
        c.steps = 1;
        maybe_validate();
    }

    /// Fix one more center coordinate of an already touched cluster.
    void extend_cluster(int i, Eigen::Index coord, double value) {
        ClusterState& c = clusters_[static_cast<std::size_t>(i)];
        if (c.fixed_coords.empty())
            throw InvariantViolation("extend_cluster requires a touched cluster");
        if (c.fixed_coords.contains(coord))
            throw InvariantViolation("extend_cluster: coordinate already fixed");
        c.center.set(coord, value);
        c.fixed_coords.insert(coord);
        c.steps += 1;
        maybe_validate();
    }

    /// Move every free point whose domain is contained in the fixed coordinate
    /// set of every cluster to the cluster with the nearest center (smallest
    /// index on ties).  For such points the restricted distance to each center
    /// already equals the final cost contribution, so the move is forced.
    /// Returns the number of points moved; a second application moves none.
    int assign_fully_determined() {
        const IndexSet full = IndexSet::all(inst_->d);
        int moved = 0;
        for (std::size_t idx = 0; idx < assigned_.size(); ++idx) {
            if (assigned_[idx] >= 0) continue;
            const DeltaPoint& x = inst_->points[idx];
            bool eligible = true;
            for (const auto& c : clusters_) {
                if ((x.defined && !c.fixed_coords.mask()).any()) {
                    eligible = false;
                    break;
                }
            }
            if (!eligible) continue;
            int best = 0;
            double best_d = std::numeric_limits<double>::infinity();
            for (int i = 0; i < k_; ++i) {
                const double d2 = dist_sq(x, clusters_[static_cast<std::size_t>(i)].center, full);
                if (d2 < best_d) {
                    best_d = d2;
                    best = i;
                }
            }
            place(static_cast<int>(idx), best);
            ++moved;
        }
        maybe_validate();
        return moved;
    }

    bool operator==(const PartialClustering& o) const {
        if (inst_ != o.inst_ || k_ != o.k_ || assigned_ != o.assigned_) return false;
        for (std::size_t i = 0; i < clusters_.size(); ++i) {
            const auto& a = clusters_[i];
            const auto& b = o.clusters_[i];
            if (a.steps != b.steps || a.members != b.members ||
                !(a.fixed_coords == b.fixed_coords) || !(a.center == b.center))
                return false;
        }
        return true;
    }

    void validate() const {
        const int delta = inst_->delta;
        const Eigen::Index d = inst_->d;
        std::vector<int> seen(assigned_.size(), -1);
        for (int i = 0; i < k_; ++i) {
            const ClusterState& c = clusters_[static_cast<std::size_t>(i)];
            if (c.steps < 0 || c.steps > delta + 1)
                fail("cluster " + std::to_string(i) + ": steps out of [0, delta+1]");
            if (c.steps == 0 && (!c.fixed_coords.empty() || !c.members.empty()))
                fail("cluster " + std::to_string(i) + ": untouched cluster not blank");
            if (c.steps > 0 && c.fixed_coords.count() < d - delta + (c.steps - 1))
                fail("cluster " + std::to_string(i) + ": too few fixed coordinates for its steps");
            if (!(dom(c.center) == c.fixed_coords))
                fail("cluster " + std::to_string(i) + ": center domain != fixed coordinate set");
            if (!std::is_sorted(c.members.begin(), c.members.end()))
                fail("cluster " + std::to_string(i) + ": member ids not sorted");
            for (int id : c.members) {
                const int idx = inst_->index_of(id);
                if (seen[static_cast<std::size_t>(idx)] >= 0)
                    fail("point " + std::to_string(id) + " appears in two clusters");
                seen[static_cast<std::size_t>(idx)] = i;
                if (assigned_[static_cast<std::size_t>(idx)] != i)
                    fail("membership/assignment tables disagree for point " + std::to_string(id));
            }
        }
        for (std::size_t idx = 0; idx < assigned_.size(); ++idx)
            if (assigned_[idx] != seen[idx])
                fail("assignment table lists a point no cluster owns");
    }

private:
    void place(int idx, int cluster) {
        assigned_[static_cast<std::size_t>(idx)] = cluster;
        auto& m = clusters_[static_cast<std::size_t>(cluster)].members;
        const int id = inst_->points[static_cast<std::size_t>(idx)].id;
        m.insert(std::upper_bound(m.begin(), m.end(), id), id);
    }

    void maybe_validate() const {
#ifdef DELTAK_VALIDATE
        validate();
#endif
    }

    [[noreturn]] static void fail(const std::string& msg) { throw InvariantViolation(msg); }

    const Instance* inst_;
    int k_;
    std::vector<ClusterState> clusters_;
    std::vector<int> assigned_;
};

/// Full partition of the instance refining the pinned member sets of a partial
/// clustering; parts are listed per cluster as sorted id vectors.
struct Extension {
    std::vector<std::vector<int>> parts;
};

inline void validate_extension(const PartialClustering& pc, const Extension& ext) {
    const Instance& inst = pc.instance();
    if (static_cast<int>(ext.parts.size()) != pc.k())
        throw std::invalid_argument("extension must have exactly k parts");
    std::vector<int> owner(static_cast<std::size_t>(inst.size()), -1);
    for (int i = 0; i < pc.k(); ++i) {
        for (int id : ext.parts[static_cast<std::size_t>(i)]) {
            const int idx = inst.index_of(id);
            if (owner[static_cast<std::size_t>(idx)] >= 0)
                throw std::invalid_argument("extension assigns point " + std::to_string(id) +
                                            " twice");
            owner[static_cast<std::size_t>(idx)] = i;
        }
        for (int id : pc.cluster(i).members) {
            if (owner[static_cast<std::size_t>(inst.index_of(id))] != i)
                throw std::invalid_argument("extension must keep pinned member " +
                                            std::to_string(id) + " in its cluster");
        }
    }
    for (std::size_t idx = 0; idx < owner.size(); ++idx)
        if (owner[idx] < 0)
            throw std::invalid_argument("extension leaves point " +
                                        std::to_string(inst.points[idx].id) + " unassigned");
}

/// Centers induced by an extension: fixed coordinates come from the partial
/// centers, the rest are the per-coordinate means of the extended parts.
inline std::vector<Center> associated_centers(const PartialClustering& pc, const Extension& ext) {
    validate_extension(pc, ext);
    const Instance& inst = pc.instance();
    std::vector<Center> out;
    out.reserve(static_cast<std::size_t>(pc.k()));
    for (int i = 0; i < pc.k(); ++i) {
        const ClusterState& c = pc.cluster(i);
        const auto ptrs = collect(inst, ext.parts[static_cast<std::size_t>(i)]);
        Center ctr = mean_on(ptrs, c.fixed_coords.complement());
        for (Eigen::Index j : c.fixed_coords.indices()) ctr.set(j, c.center.values[j]);
        out.push_back(std::move(ctr));
    }
    return out;
}

inline double extension_value(const PartialClustering& pc, const Extension& ext) {
    const Instance& inst = pc.instance();
    const auto centers = associated_centers(pc, ext);
    std::vector<std::vector<const DeltaPoint*>> parts;
    parts.reserve(ext.parts.size());
    for (const auto& ids : ext.parts) parts.push_back(collect(inst, ids));
    return clustering_value(parts, centers);
}

/// Turn a complete state into a solution.  Each cluster keeps the guessed
/// center only when it beats the plain mean of its members; this never costs
/// more than keeping the guessed centers everywhere.
inline ClusteringSolution finalize(const PartialClustering& pc) {
    if (!pc.is_complete())
        throw InvariantViolation("finalize requires a complete partial clustering");
    const Instance& inst = pc.instance();
    const IndexSet full = IndexSet::all(inst.d);
    ClusteringSolution sol;
    sol.assignment.resize(static_cast<std::size_t>(inst.size()));
    std::vector<std::vector<const DeltaPoint*>> parts(static_cast<std::size_t>(pc.k()));
    for (int i = 0; i < pc.k(); ++i) {
        const ClusterState& c = pc.cluster(i);
        auto ptrs = collect(inst, c.members);
        const Center m = mean_on(ptrs, full);
        const double cost_guess = cost_on(ptrs, c.center, full);
        const double cost_mean = cost_on(ptrs, m, full);
        sol.centers.push_back(cost_guess < cost_mean ? c.center : m);
        for (int id : c.members) sol.assignment[static_cast<std::size_t>(inst.index_of(id))] = i;
        parts[static_cast<std::size_t>(i)] = std::move(ptrs);
    }
    sol.cost = clustering_value(parts, sol.centers);
    return sol;
}

}  // namespace deltak
