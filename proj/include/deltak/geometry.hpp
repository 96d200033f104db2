#pragma once

#include "deltak/numeric.hpp"
#include "deltak/points.hpp"

#include <span>
#include <stdexcept>
#include <vector>

namespace deltak {

/// Domain of a vector: the coordinates where it is defined.
inline IndexSet dom(const MaskedVector& x) { return IndexSet::from_mask(x.defined); }

/// Points fully determined on I, i.e. dom(x) is contained in I.
inline std::vector<const DeltaPoint*> fd(std::span<const DeltaPoint* const> pts,
                                         const IndexSet& I) {
    std::vector<const DeltaPoint*> out;
    for (const DeltaPoint* p : pts)
        if (!(p->defined && !I.mask()).any()) out.push_back(p);
    return out;
}

/// Points partially determined on I, i.e. dom(x) meets I.
inline std::vector<const DeltaPoint*> pd(std::span<const DeltaPoint* const> pts,
                                         const IndexSet& I) {
    std::vector<const DeltaPoint*> out;
    for (const DeltaPoint* p : pts)
        if ((p->defined && I.mask()).any()) out.push_back(p);
    return out;
}

/// Squared distance restricted to I; a coordinate contributes only when both
/// operands are defined there.  This is the primitive every cost is built on;
/// square roots never appear in the library.
inline double dist_sq(const MaskedVector& x, const MaskedVector& y, const IndexSet& I) {
    const Mask active = x.defined && y.defined && I.mask();
    return active.select((x.values - y.values).square(), 0.0).sum();
}

inline double dist_sq(const MaskedVector& x, const MaskedVector& y) {
    const Mask active = x.defined && y.defined;
    return active.select((x.values - y.values).square(), 0.0).sum();
}

/// Per-coordinate mean over the points defined at that coordinate, restricted
/// to I.  Coordinates with no defined point (and all coordinates outside I)
/// stay missing.  Sums run through the double-double accumulator, so the mean
/// of identical values is bit-exact.
inline Center mean_on(std::span<const DeltaPoint* const> pts, const IndexSet& I) {
    Center c = Center::all_missing(I.dim());
    for (Eigen::Index i : I.indices()) {
        DoubleDouble acc;
        long long cnt = 0;
        for (const DeltaPoint* p : pts) {
            if (p->defined_at(i)) {
                acc.add(p->values[i]);
                ++cnt;
            }
        }
        if (cnt > 0) c.set(i, acc.divided_by(static_cast<double>(cnt)));
    }
    return c;
}

/// Mean of a multiset given as (point, multiplicity) pairs; used by the
/// sampling steps, where draws with replacement are kept as counts.
inline Center mean_weighted(std::span<const DeltaPoint* const> pts,
                            std::span<const long long> counts, const IndexSet& I) {
    if (pts.size() != counts.size())
        throw std::invalid_argument("mean_weighted: points/counts size mismatch");
    Center c = Center::all_missing(I.dim());
    for (Eigen::Index i : I.indices()) {
        DoubleDouble acc;
        long long total = 0;
        for (std::size_t j = 0; j < pts.size(); ++j) {
            if (counts[j] > 0 && pts[j]->defined_at(i)) {
                acc.add_product(static_cast<double>(counts[j]), pts[j]->values[i]);
                total += counts[j];
            }
        }
        if (total > 0) c.set(i, acc.divided_by(static_cast<double>(total)));
    }
    return c;
}

/// Total squared cost of assigning every point of X to y, restricted to I.
inline double cost_on(std::span<const DeltaPoint* const> X, const MaskedVector& y,
                      const IndexSet& I) {
    DoubleDouble acc;
    for (const DeltaPoint* p : X) acc.add(dist_sq(*p, y, I));
    return acc.value();
}

/// Objective value of a full partition with one center per part.
inline double clustering_value(std::span<const std::vector<const DeltaPoint*>> parts,
                               std::span<const Center> centers) {
    if (parts.size() != centers.size())
        throw std::invalid_argument("clustering_value: parts/centers size mismatch");
    DoubleDouble acc;
    for (std::size_t i = 0; i < parts.size(); ++i) {
        const IndexSet full = IndexSet::all(centers[i].size());
        acc.add(cost_on(parts[i], centers[i], full));
    }
    return acc.value();
}

}  // namespace deltak
