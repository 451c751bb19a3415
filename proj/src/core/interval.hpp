#pragma once

// Certified interval enclosures. Every primitive rounds outward by one ulp,
// so a computed Interval always contains the exact real result.

#include <memory>
#include <vector>

#include "common.hpp"

namespace mildatlas {

struct ExprNode;
using Expr = std::shared_ptr<const ExprNode>;

struct Interval {
    double lo = 0.0;
    double hi = 0.0;

    Interval() = default;
    Interval(double a, double b);
    static Interval point(double v) { return Interval(v, v); }
    static Interval hull(const Interval& a, const Interval& b);

    double width() const { return hi - lo; }
    double mid() const { return 0.5 * (lo + hi); }
    bool contains(double v) const { return lo <= v && v <= hi; }
    bool contains_zero() const { return lo <= 0.0 && 0.0 <= hi; }
    bool subset_of(const Interval& o, double slack = 0.0) const {
        return lo >= o.lo - slack && hi <= o.hi + slack;
    }
    double mag() const; // sup |x| over the interval
    double mig() const; // inf |x| over the interval (0 if it straddles 0)

    std::string to_string() const;
};

Interval iadd(const Interval& a, const Interval& b);
Interval isub(const Interval& a, const Interval& b);
Interval ineg(const Interval& a);
Interval imul(const Interval& a, const Interval& b);
Interval iscale(const Interval& a, double c);
Interval irecip(const Interval& a);          // errors when 0 in a
Interval iexp(const Interval& a);
Interval ilog1p(const Interval& a);          // errors when a touches -1
Interval ipow(const Interval& a, double mu); // errors when a touches 0 (mu not a natural)
Interval ipow_nat(const Interval& a, int n); // integer power, any sign base

struct Box {
    std::vector<Interval> dims;

    Box() = default;
    explicit Box(std::vector<Interval> d) : dims(std::move(d)) {}
    int arity() const { return static_cast<int>(dims.size()); }
    const Interval& operator[](int i) const { return dims[static_cast<size_t>(i)]; }
    Interval& operator[](int i) { return dims[static_cast<size_t>(i)]; }
    std::vector<double> midpoint() const;
};

// Natural interval extension of an expression over a box. The result
// contains {e(x) : x in b}; errors when a partial node's argument enclosure
// touches its singular set.
Interval enclose(const Expr& e, const Box& b);

// Certified non-vanishing: delta <= |e(x)| <= M on b with delta > 0.
// Bisects (splitting the widest coordinate) up to `depth` levels before
// giving up. Throws when the range cannot be separated from zero.
struct UnitBounds {
    double delta = 0.0;
    double sup = 0.0;
    bool positive = true; // sign of e on the box
};
UnitBounds certify_unit(const Expr& e, const Box& b, int depth = 8);

// Certified upper bound for sup |e| over b (may overestimate). Bisection
// tightens the bound. Throws if the enclosure hits a singular set everywhere.
double sup_abs(const Expr& e, const Box& b, int depth = 8);

// Certified bounds for the range of e over b, with bisection refinement.
Interval range_bounds(const Expr& e, const Box& b, int depth = 8);

} // namespace mildatlas
