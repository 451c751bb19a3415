#include "interval.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "expr.hpp"

namespace mildatlas {

namespace {

double down(double v) {
    if (!std::isfinite(v)) return v;
    return std::nextafter(v, -std::numeric_limits<double>::infinity());
}

double up(double v) {
    if (!std::isfinite(v)) return v;
    return std::nextafter(v, std::numeric_limits<double>::infinity());
}

} // namespace

Interval::Interval(double a, double b) : lo(a), hi(b) {
    if (std::isnan(a) || std::isnan(b) || a > b)
        fail_input("invalid interval [" + std::to_string(a) + ", " + std::to_string(b) + "]");
}

Interval Interval::hull(const Interval& a, const Interval& b) {
    return Interval(std::min(a.lo, b.lo), std::max(a.hi, b.hi));
}

double Interval::mag() const { return std::max(std::fabs(lo), std::fabs(hi)); }

double Interval::mig() const {
    if (contains_zero()) return 0.0;
    return std::min(std::fabs(lo), std::fabs(hi));
}

std::string Interval::to_string() const {
    std::ostringstream os;
    os << '[' << lo << ", " << hi << ']';
    return os.str();
}

Interval iadd(const Interval& a, const Interval& b) {
    return Interval(down(a.lo + b.lo), up(a.hi + b.hi));
}

Interval isub(const Interval& a, const Interval& b) {
    return Interval(down(a.lo - b.hi), up(a.hi - b.lo));
}

Interval ineg(const Interval& a) { return Interval(-a.hi, -a.lo); }

Interval imul(const Interval& a, const Interval& b) {
    const double c[4] = {a.lo * b.lo, a.lo * b.hi, a.hi * b.lo, a.hi * b.hi};
    double lo = c[0], hi = c[0];
    for (int i = 1; i < 4; ++i) {
        lo = std::min(lo, c[i]);
        hi = std::max(hi, c[i]);
    }
    return Interval(down(lo), up(hi));
}

Interval iscale(const Interval& a, double c) {
    return imul(a, Interval::point(c));
}

Interval irecip(const Interval& a) {
    if (a.contains_zero())
        fail_input("reciprocal of an interval containing zero");
    return Interval(down(1.0 / a.hi), up(1.0 / a.lo));
}

Interval iexp(const Interval& a) {
    return Interval(down(std::exp(a.lo)), up(std::exp(a.hi)));
}

Interval ilog1p(const Interval& a) {
    if (a.lo <= -1.0) fail_input("log1p of an interval reaching -1");
    return Interval(down(std::log1p(a.lo)), up(std::log1p(a.hi)));
}

Interval ipow(const Interval& a, double mu) {
    if (mu == 0.0) return Interval(1.0, 1.0);
    if (a.lo <= 0.0) fail_input("real power of an interval reaching 0");
    const double plo = std::pow(a.lo, mu);
    const double phi = std::pow(a.hi, mu);
    return Interval(down(std::min(plo, phi)), up(std::max(plo, phi)));
}

Interval ipow_nat(const Interval& a, int n) {
    if (n < 0) fail_input("ipow_nat needs a natural exponent");
    if (n == 0) return Interval(1.0, 1.0);
    Interval r = a;
    for (int i = 1; i < n; ++i) r = imul(r, a);
    if (n % 2 == 0 && a.contains_zero()) r = Interval(0.0, r.hi);
    return r;
}

std::vector<double> Box::midpoint() const {
    std::vector<double> m;
    m.reserve(dims.size());
    for (const auto& d : dims) m.push_back(d.mid());
    return m;
}

Interval enclose(const Expr& e, const Box& b) {
    if (!e) fail_internal("null expression");
    switch (e->kind) {
    case ExprKind::Const: return Interval::point(e->value);
    case ExprKind::Var:
        if (e->var >= b.arity())
            fail_input("box has too few coordinates for the expression");
        return b[e->var];
    case ExprKind::Add: return iadd(enclose(e->args[0], b), enclose(e->args[1], b));
    case ExprKind::Sub: return isub(enclose(e->args[0], b), enclose(e->args[1], b));
    case ExprKind::Neg: return ineg(enclose(e->args[0], b));
    case ExprKind::Mul: return imul(enclose(e->args[0], b), enclose(e->args[1], b));
    case ExprKind::Recip: return irecip(enclose(e->args[0], b));
    case ExprKind::Exp: return iexp(enclose(e->args[0], b));
    case ExprKind::Log1p: return ilog1p(enclose(e->args[0], b));
    case ExprKind::Pow: return ipow(enclose(e->args[0], b), e->exponent);
    case ExprKind::Compose: {
        std::vector<Interval> inner;
        for (size_t i = 1; i < e->args.size(); ++i)
            inner.push_back(enclose(e->args[i], b));
        return enclose(e->args[0], Box(std::move(inner)));
    }
    }
    fail_internal("unhandled expression kind");
}

namespace {

int widest_dim(const Box& b) {
    int best = 0;
    double w = b[0].width();
    for (int i = 1; i < b.arity(); ++i) {
        if (b[i].width() > w) {
            w = b[i].width();
            best = i;
        }
    }
    return best;
}

std::pair<Box, Box> split(const Box& b) {
    const int i = widest_dim(b);
    Box lo = b, hi = b;
    const double m = b[i].mid();
    lo[i] = Interval(b[i].lo, m);
    hi[i] = Interval(m, b[i].hi);
    return {lo, hi};
}

// Fold f over the leaves of a bisection tree of depth `depth`.
template <typename Fold>
void bisect(const Expr& e, const Box& b, int depth, Fold&& fold) {
    if (depth == 0 || b.arity() == 0) {
        fold(enclose(e, b));
        return;
    }
    auto [lo, hi] = split(b);
    bisect(e, lo, depth - 1, fold);
    bisect(e, hi, depth - 1, fold);
}

} // namespace

UnitBounds certify_unit(const Expr& e, const Box& b, int depth) {
    // Degenerate case: no variables.
    if (b.arity() == 0) {
        const Interval r = enclose(e, Box(std::vector<Interval>{}));
        if (r.contains_zero())
            fail_input("cannot certify non-vanishing: enclosure straddles zero");
        return UnitBounds{r.mig(), r.mag(), r.lo > 0.0};
    }
    // Quick pass without bisection, refine only when inconclusive or loose.
    Interval whole = enclose(e, b);
    if (!whole.contains_zero() && depth <= 0)
        return UnitBounds{whole.mig(), whole.mag(), whole.lo > 0.0};

    double delta = std::numeric_limits<double>::infinity();
    double sup = 0.0;
    bool any_pos = false, any_neg = false, straddle = false;
    bisect(e, b, std::min(depth, 10), [&](const Interval& r) {
        if (r.contains_zero()) straddle = true;
        if (r.hi > 0.0) any_pos = true;
        if (r.lo < 0.0) any_neg = true;
        delta = std::min(delta, r.mig());
        sup = std::max(sup, r.mag());
    });
    if (straddle || (any_pos && any_neg))
        fail_input("cannot certify non-vanishing: enclosure straddles zero");
    return UnitBounds{delta, sup, any_pos};
}

double sup_abs(const Expr& e, const Box& b, int depth) {
    if (b.arity() == 0) return enclose(e, Box(std::vector<Interval>{})).mag();
    double sup = 0.0;
    bisect(e, b, std::min(depth, 10), [&](const Interval& r) { sup = std::max(sup, r.mag()); });
    return sup;
}

Interval range_bounds(const Expr& e, const Box& b, int depth) {
    if (b.arity() == 0) return enclose(e, Box(std::vector<Interval>{}));
    bool first = true;
    Interval acc;
    bisect(e, b, std::min(depth, 10), [&](const Interval& r) {
        acc = first ? r : Interval::hull(acc, r);
        first = false;
    });
    return acc;
}

} // namespace mildatlas
