#pragma once

#include <cmath>
#include <cstdint>

namespace deltak {

/// Double-double accumulator (~106 significant bits).
///
/// Sums of squared distances and per-coordinate means are the primitives every
/// cost in this library is built from; accumulating them in plain doubles makes
/// totals depend on summation order in the last ulp, which breaks exact
/// cross-checks between independently computed costs.  The accumulator keeps
/// the running sum as an unevaluated pair hi+lo so that totals are correctly
/// rounded, and means of identical values come out bit-exact.
struct DoubleDouble {
    double hi = 0.0;
    double lo = 0.0;

    // Knuth two-sum: branch-free, exact error term.
    void add(double x) {
        const double s = hi + x;
        const double bb = s - hi;
        const double err = (hi - (s - bb)) + (x - bb);
        const double lo2 = lo + err;
        // renormalize so |lo| stays below ulp(hi)
        const double h = s + lo2;
        lo = lo2 - (h - s);
        hi = h;
    }

    // Adds the exact product a*b (error term recovered with fused multiply-add).
    void add_product(double a, double b) {
        const double p = a * b;
        const double e = std::fma(a, b, -p);
        add(p);
        add(e);
    }

    double value() const { return hi + lo; }

    /// Quotient (hi+lo)/den with one correction step.  If the exact quotient is
    /// representable (identical-value means, integer data) the result is exact.
    double divided_by(double den) const {
        const double q0 = hi / den;
        const double r = std::fma(-q0, den, hi) + lo;
        return q0 + r / den;
    }
};

}  // namespace deltak
