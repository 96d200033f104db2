#pragma once

#include <Eigen/Core>

#include <initializer_list>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

namespace deltak {

using Mask = Eigen::Array<bool, Eigen::Dynamic, 1>;

/// Thrown when an internal structural invariant is observed broken.  The CLI
/// maps it to a distinct exit code; tests treat any occurrence as failure.
struct InvariantViolation : std::logic_error {
    using std::logic_error::logic_error;
};

inline constexpr std::nullopt_t missing = std::nullopt;

/// Vector in [R u {missing}]^d: coordinate values plus a defined-mask.
/// A missing coordinate never participates in arithmetic; the stored value
/// under a missing entry is canonically 0 so whole objects compare bitwise.
struct MaskedVector {
    Eigen::ArrayXd values;
    Mask defined;

    MaskedVector() = default;

    explicit MaskedVector(Eigen::Index d)
        : values(Eigen::ArrayXd::Zero(d)), defined(Mask::Constant(d, false)) {}

    MaskedVector(std::initializer_list<std::optional<double>> entries)
        : MaskedVector(static_cast<Eigen::Index>(entries.size())) {
        Eigen::Index i = 0;
        for (const auto& e : entries) {
            if (e.has_value()) set(i, *e);
            ++i;
        }
    }

    static MaskedVector all_missing(Eigen::Index d) { return MaskedVector(d); }

    static MaskedVector full(Eigen::ArrayXd vals) {
        MaskedVector v(vals.size());
        v.values = std::move(vals);
        v.defined.setConstant(true);
        return v;
    }

    Eigen::Index size() const { return values.size(); }
    bool defined_at(Eigen::Index i) const { return defined[i]; }
    Eigen::Index defined_count() const { return defined.count(); }
    Eigen::Index missing_count() const { return size() - defined.count(); }

    std::optional<double> get(Eigen::Index i) const {
        if (!defined[i]) return std::nullopt;
        return values[i];
    }

    void set(Eigen::Index i, double v) {
        values[i] = v;
        defined[i] = true;
    }

    void clear(Eigen::Index i) {
        values[i] = 0.0;
        defined[i] = false;
    }

    bool operator==(const MaskedVector& o) const {
        return values.size() == o.values.size() && (defined == o.defined).all() &&
               (values == o.values).all();
    }
};

using Center = MaskedVector;

/// Subset of coordinate axes {0,...,d-1}, carried as a boolean mask so set
/// algebra stays coefficient-wise.
class IndexSet {
public:
    IndexSet() = default;
    explicit IndexSet(Eigen::Index d) : m_(Mask::Constant(d, false)) {}

    static IndexSet none(Eigen::Index d) { return IndexSet(d); }

    static IndexSet all(Eigen::Index d) {
        IndexSet s(d);
        s.m_.setConstant(true);
        return s;
    }

    static IndexSet of(Eigen::Index d, std::initializer_list<Eigen::Index> idx) {
        IndexSet s(d);
        for (Eigen::Index i : idx) s.insert(i);
        return s;
    }

    static IndexSet from_mask(Mask m) {
        IndexSet s;
        s.m_ = std::move(m);
        return s;
    }

    Eigen::Index dim() const { return m_.size(); }
    Eigen::Index count() const { return m_.count(); }
    bool empty() const { return !m_.any(); }
    bool is_all() const { return m_.all(); }
    bool contains(Eigen::Index i) const { return m_[i]; }
    void insert(Eigen::Index i) { m_[i] = true; }
    void erase(Eigen::Index i) { m_[i] = false; }
    const Mask& mask() const { return m_; }

    IndexSet operator|(const IndexSet& o) const { return from_mask(m_ || o.m_); }
    IndexSet operator&(const IndexSet& o) const { return from_mask(m_ && o.m_); }
    IndexSet operator-(const IndexSet& o) const { return from_mask(m_ && !o.m_); }
    IndexSet complement() const { return from_mask(!m_); }

    bool subset_of(const IndexSet& o) const { return !(m_ && !o.m_).any(); }
    bool intersects(const IndexSet& o) const { return (m_ && o.m_).any(); }
    bool operator==(const IndexSet& o) const {
        return m_.size() == o.m_.size() && (m_ == o.m_).all();
    }

    std::vector<Eigen::Index> indices() const {
        std::vector<Eigen::Index> out;
        out.reserve(static_cast<std::size_t>(count()));
        for (Eigen::Index i = 0; i < m_.size(); ++i)
            if (m_[i]) out.push_back(i);
        return out;
    }

private:
    Mask m_;
};

/// Input point: masked vector with a stable id and a nonempty domain.
struct DeltaPoint : MaskedVector {
    int id = -1;

    DeltaPoint() = default;
    DeltaPoint(int id_, MaskedVector v) : MaskedVector(std::move(v)), id(id_) {}
};

/// A finite multiset of points sharing a dimension; delta is the maximum
/// number of missing coordinates over all points (always < d).
struct Instance {
    std::vector<DeltaPoint> points;
    Eigen::Index d = 0;
    int delta = 0;

    Eigen::Index size() const { return static_cast<Eigen::Index>(points.size()); }

    int index_of(int id) const {
        auto it = index_by_id_.find(id);
        if (it == index_by_id_.end())
            throw std::invalid_argument("unknown point id " + std::to_string(id));
        return it->second;
    }

    const DeltaPoint& by_id(int id) const { return points[static_cast<std::size_t>(index_of(id))]; }

    friend Instance make_instance(std::vector<DeltaPoint> pts, Eigen::Index d);

private:
    std::unordered_map<int, int> index_by_id_;
};

inline Instance make_instance(std::vector<DeltaPoint> pts, Eigen::Index d) {
    if (d < 1) throw std::invalid_argument("instance dimension must be >= 1");
    if (pts.empty()) throw std::invalid_argument("instance must contain at least one point");
    Instance inst;
    inst.d = d;
    int delta = 0;
    for (std::size_t i = 0; i < pts.size(); ++i) {
        const DeltaPoint& p = pts[i];
        if (p.size() != d)
            throw std::invalid_argument("point " + std::to_string(p.id) + " has dimension " +
                                        std::to_string(p.size()) + ", expected " + std::to_string(d));
        const Eigen::Index miss = p.missing_count();
        if (miss == d)
            throw std::invalid_argument("point " + std::to_string(p.id) +
                                        " has an empty domain (all coordinates missing)");
        delta = std::max(delta, static_cast<int>(miss));
        auto [it, fresh] = inst.index_by_id_.emplace(p.id, static_cast<int>(i));
        if (!fresh)
            throw std::invalid_argument("duplicate point id " + std::to_string(p.id));
    }
    inst.delta = delta;
    inst.points = std::move(pts);
    return inst;
}

/// Non-owning views used by the set-level geometry operations.
inline std::vector<const DeltaPoint*> as_ptrs(std::span<const DeltaPoint> pts) {
    std::vector<const DeltaPoint*> out;
    out.reserve(pts.size());
    for (const DeltaPoint& p : pts) out.push_back(&p);
    return out;
}

inline std::vector<const DeltaPoint*> all_points(const Instance& inst) {
    return as_ptrs(inst.points);
}

inline std::vector<const DeltaPoint*> collect(const Instance& inst, std::span<const int> ids) {
    std::vector<const DeltaPoint*> out;
    out.reserve(ids.size());
    for (int id : ids) out.push_back(&inst.by_id(id));
    return out;
}

}  // namespace deltak
