#include "certcalc.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "expr.hpp"
#include "interval.hpp"

namespace mildatlas {

namespace {

void record(Audit* audit, const char* op, std::vector<MildCert> inputs, const MildCert& out,
            std::string note = {}) {
    if (!audit) return;
    audit->entries.push_back(AuditEntry{op, std::move(inputs), out, std::move(note)});
}

void check_positive(double v, const char* what) {
    if (!(v > 0.0) || !std::isfinite(v)) fail_input(std::string(what) + " must be finite and > 0");
}

double order_factorial(int n) {
    double f = 1.0;
    for (int k = 2; k <= n; ++k) f *= k;
    return f;
}

} // namespace

std::string MildCert::to_string() const {
    std::ostringstream os;
    os << (weak ? "weak(" : "(") << "A=" << A << ", B=" << B << ", C=" << C << ", order=";
    if (order == kOrderInf)
        os << "inf";
    else
        os << order;
    os << ", d=" << arity << ", sup=" << value_bound << ')';
    return os.str();
}

MildCert make_cert(double A, double B, double C, Order order, bool weak, int arity) {
    return make_cert(A, B, C, order, weak, arity, std::pow(B, C + 1.0));
}

MildCert make_cert(double A, double B, double C, Order order, bool weak, int arity,
                   double value_bound) {
    check_positive(A, "certificate constant A");
    check_positive(B, "certificate constant B");
    if (C < 0.0 || !std::isfinite(C)) fail_input("certificate constant C must be >= 0");
    if (order != kOrderInf && order < 0) fail_input("certificate order must be >= 0");
    if (arity < 1) fail_input("certificate arity must be >= 1");
    if (!(value_bound >= 0.0) || !std::isfinite(value_bound))
        fail_input("certificate value bound must be finite and >= 0");
    MildCert c;
    c.A = A;
    c.B = B;
    c.C = C;
    c.order = order;
    c.weak = weak;
    c.arity = arity;
    c.value_bound = value_bound;
    return c;
}

double claimed_bound(const MildCert& c, int n) {
    if (n < 0) fail_input("derivative order must be >= 0");
    if (c.order != kOrderInf && n > c.order)
        fail_input("derivative order exceeds the certificate order");
    if (n == 0) return c.value_bound;
    return std::pow(c.B, c.C + 1.0) * std::pow(c.A, static_cast<double>(n)) *
           std::pow(order_factorial(n), c.C + 1.0);
}

GevreyCert to_gevrey(const MildCert& c) {
    if (c.weak) fail_input("class conversion does not apply to weak certificates");
    GevreyCert g;
    g.M = c.B;
    g.R = std::pow(c.A, -1.0 / (c.C + 1.0));
    g.alpha = c.C + 1.0;
    return g;
}

MildCert from_gevrey(const GevreyCert& g, int arity, Order order) {
    check_positive(g.M, "Gevrey constant M");
    check_positive(g.R, "Gevrey constant R");
    if (g.alpha < 1.0) fail_input("Gevrey class must be >= 1");
    return make_cert(std::pow(g.R, -g.alpha), g.M, g.alpha - 1.0, order, false, arity);
}

namespace {

MildCert compose_impl(const MildCert& f, const MildCert& g, bool want_weak_g, Audit* audit) {
    if (f.weak) fail_input("composition requires a non-weak outer certificate");
    if (want_weak_g && !g.weak)
        fail_input("weak composition requires a weak inner certificate");
    if (f.C != g.C)
        fail_input("composition requires equal C (lift the lower certificate first)");
    const double C = f.C;
    const double d = static_cast<double>(f.arity);
    double A, B;
    if (C == 0.0) {
        // A_f A_g (A_f^-1 + d B_g) written in its expanded exact form
        A = g.A * (d * f.A * g.B + 1.0);
        B = d * f.B * g.B / (1.0 / f.A + d * g.B);
    } else {
        const double t = std::pow(f.A, -1.0 / (C + 1.0));
        A = f.A * g.A * std::pow(t + d * g.B, C + 1.0);
        B = d * f.B * g.B / (t + d * g.B);
    }
    MildCert out = make_cert(A, B, C, min_order(f.order, g.order), g.weak, g.arity,
                             f.value_bound);
    record(audit, want_weak_g ? "compose_weak" : "compose", {f, g}, out);
    return out;
}

} // namespace

MildCert compose(const MildCert& f, const MildCert& g, Audit* audit) {
    return compose_impl(f, g, false, audit);
}

MildCert compose_weak(const MildCert& f, const MildCert& g, Audit* audit) {
    return compose_impl(f, g, true, audit);
}

namespace {

struct Unified {
    double A;
    double B;
    double C;
    Order order;
    bool weak;
    int arity;
};

Unified unify(const std::vector<MildCert>& certs, const char* op) {
    if (certs.empty()) fail_input(std::string(op) + " needs at least one certificate");
    Unified u{certs[0].A, certs[0].B, certs[0].C, certs[0].order, certs[0].weak,
              certs[0].arity};
    for (const auto& c : certs) {
        if (c.weak != u.weak) fail_input(std::string(op) + ": mixed weak and non-weak inputs");
        if (c.C != u.C) fail_input(std::string(op) + ": mixed C classes (lift first)");
        if (c.arity != u.arity) fail_input(std::string(op) + ": arity mismatch");
        u.A = std::max(u.A, c.A);
        u.B = std::max(u.B, c.B);
        u.order = min_order(u.order, c.order);
    }
    return u;
}

} // namespace

MildCert product(const std::vector<MildCert>& certs, Audit* audit) {
    const Unified u = unify(certs, "product");
    // Generalized Leibniz with the binomial coefficients paired against the
    // order factorials gives (sum A_i, prod beta_i, C) where beta_i also
    // dominates the factor's order-zero bound; for l identical factors this
    // is exactly (lA, B^l, C).
    double asum = 0.0, bpow = 1.0, vb = 1.0;
    for (const auto& c : certs) {
        asum += c.A;
        bpow *= std::max(c.value_bound, std::pow(c.B, u.C + 1.0));
        vb *= c.value_bound;
    }
    const double B = u.C == 0.0 ? bpow : std::pow(bpow, 1.0 / (u.C + 1.0));
    MildCert out = make_cert(asum, std::max(B, 1e-300), u.C, u.order, u.weak, u.arity, vb);
    record(audit, "product", certs, out);
    return out;
}

MildCert sum(const std::vector<MildCert>& certs, Audit* audit) {
    const Unified u = unify(certs, "sum");
    double bsum = 0.0, vb = 0.0, amax = 0.0;
    for (const auto& c : certs) {
        bsum += std::pow(c.B, u.C + 1.0);
        vb += c.value_bound;
        amax = std::max(amax, c.A);
    }
    const double B = u.C == 0.0 ? bsum : std::pow(bsum, 1.0 / (u.C + 1.0));
    MildCert out = make_cert(amax, B, u.C, u.order, u.weak, u.arity, vb);
    record(audit, "sum", certs, out);
    return out;
}

MildCert lift_C(const MildCert& c, double C2, Audit* audit) {
    if (C2 < c.C) fail_input("lift_C cannot lower the class");
    MildCert out = make_cert(c.A, std::max(c.B, 1.0), C2, c.order, c.weak, c.arity,
                             c.value_bound);
    record(audit, "lift_C", {c}, out);
    return out;
}

MildCert scale_cert(const MildCert& c, double factor, Audit* audit) {
    const double a = std::max(std::fabs(factor), 1e-300);
    MildCert out = make_cert(c.A, std::pow(a, 1.0 / (c.C + 1.0)) * c.B, c.C, c.order, c.weak,
                             c.arity, std::fabs(factor) * c.value_bound);
    record(audit, "scale_cert", {c}, out);
    return out;
}

MildCert derivative_cert(const MildCert& c, Audit* audit) {
    if (c.weak)
        fail_input("derivative certificates of weak functions need explicit sup bounds");
    // |f^(lambda + e_i)| <= B^(C+1) A^(|lambda|+1) (|lambda|+1)!^(C+1) and
    // (n+1)! <= 2^n n! gives the (2^(C+1) A, B A^(1/(C+1)), C) form.
    const Order ord = c.order == kOrderInf ? kOrderInf : std::max(0, c.order - 1);
    const double B0 = std::pow(c.B, c.C + 1.0) * c.A; // claimed bound at order one
    MildCert out = make_cert(std::pow(2.0, c.C + 1.0) * c.A,
                             c.B * std::pow(c.A, 1.0 / (c.C + 1.0)), c.C, ord, false,
                             c.arity, B0);
    record(audit, "derivative_cert", {c}, out);
    return out;
}

MildCert power_substitute(const MildCert& f, const std::vector<MildCert>& first_derivs,
                          const std::vector<int>& n, int r, Audit* audit) {
    if (!f.weak) fail_input("power substitution expects a weak certificate");
    if (r < 1) fail_input("power substitution needs r >= 1");
    const int d = f.arity;
    if (static_cast<int>(first_derivs.size()) != d)
        fail_input("power substitution: missing first-derivative certificates (" +
                   std::to_string(first_derivs.size()) + " of " + std::to_string(d) + ")");
    if (static_cast<int>(n.size()) != d) fail_input("power substitution: exponent arity mismatch");
    int N = 0;
    for (int ni : n) {
        if (ni < r)
            fail_input("power substitution: exponent " + std::to_string(ni) +
                       " below the target order " + std::to_string(r));
        N = std::max(N, ni);
    }
    double A = std::max(f.A, 1.0); // enlarging A to 1 is sound
    double B = f.B;
    Order ord = f.order;
    for (const auto& dc : first_derivs) {
        if (!dc.weak) fail_input("power substitution: derivative certificates must be weak");
        if (dc.C != f.C) fail_input("power substitution: mixed C classes");
        if (dc.arity != d) fail_input("power substitution: derivative arity mismatch");
        A = std::max(A, dc.A);
        // the derivative bound is consumed down to order zero, so B must
        // dominate the derivative's value bound as well
        B = std::max({B, dc.B, std::pow(dc.value_bound, 1.0 / (f.C + 1.0))});
        ord = min_order(ord, dc.order);
    }
    if (ord != kOrderInf && ord < r)
        fail_input("power substitution: input certificates valid only below order r");
    const double At = N * A * std::pow(d + 1.0, f.C + 1.0);
    MildCert out = make_cert(At, B, f.C, r, false, d, f.value_bound);
    std::vector<MildCert> ins{f};
    ins.insert(ins.end(), first_derivs.begin(), first_derivs.end());
    record(audit, "power_substitute", std::move(ins), out,
           "n_max=" + std::to_string(N) + " r=" + std::to_string(r));
    return out;
}

double rescale_step(const MildCert& c, int r) {
    if (c.weak) fail_input("rescale step applies to non-weak certificates");
    if (r < 1) fail_input("rescale step needs r >= 1");
    if (c.order != kOrderInf && c.order < r)
        fail_input("certificate order is below the requested r");
    if (c.B > 1.0) fail_input("rescale step needs B <= 1 (fold B into A first)");
    return 1.0 / (c.A * std::pow(static_cast<double>(r), c.C));
}

MildCert monomial_weak(const std::vector<double>& mu, double supB, Audit* audit) {
    if (mu.empty()) fail_input("monomial certificate needs arity >= 1");
    if (!(supB > 0.0) || !std::isfinite(supB))
        fail_input("monomial certificate needs a finite positive sup bound");
    double M = 1.0;
    for (double m : mu) M = std::max(M, std::fabs(m));
    MildCert out = make_cert(M, supB, 0.0, kOrderInf, true, static_cast<int>(mu.size()), supB);
    record(audit, "monomial_weak", {}, out);
    return out;
}

MildCert root_power(const std::vector<double>& mu, double sup_b,
                    const std::vector<double>& c1_bounds, const std::vector<int>& n, int r,
                    int l, Audit* audit) {
    const int d = static_cast<int>(mu.size());
    if (d < 1) fail_input("root_power needs arity >= 1");
    if (static_cast<int>(n.size()) != d) fail_input("root_power: exponent arity mismatch");
    if (l < 1 || r < 1) fail_input("root_power needs r >= 1 and l >= 1");
    double need = 1.0;
    for (int i = 0; i < l; ++i) need *= r;
    int N = 0;
    for (int ni : n) {
        if (static_cast<double>(ni) < need)
            fail_input("root_power: exponent " + std::to_string(ni) + " below r^l = " +
                       std::to_string(static_cast<long long>(need)));
        N = std::max(N, ni);
    }
    const double rho = need / r; // r^(l-1)
    if (!(sup_b >= 0.0) || !std::isfinite(sup_b))
        fail_input("root_power: sup bound must be finite");

    // Constant monomial: the root is the constant |a|^(1/rho).
    bool all_zero = true;
    for (double m : mu)
        if (m != 0.0) all_zero = false;
    if (all_zero) {
        const double v = std::pow(std::max(sup_b, 1e-300), 1.0 / rho);
        MildCert c = make_cert(1.0, std::max(1.0, v), 0.0, r, false, d, v);
        record(audit, "root_power", {}, c, "constant monomial");
        return c;
    }

    if (static_cast<int>(c1_bounds.size()) != d)
        fail_input("root_power: missing first-derivative bounds");
    double M = 1.0;
    for (double m : mu) M = std::max(M, std::fabs(m));
    double B_root = 1.0;
    for (int k = 0; k < d; ++k) {
        if (mu[static_cast<size_t>(k)] == 0.0) continue;
        const double c1 = c1_bounds[static_cast<size_t>(k)];
        if (!(c1 >= 0.0) || !std::isfinite(c1))
            fail_input("root_power: first-derivative bound unavailable for axis " +
                       std::to_string(k + 1));
        B_root = std::max(B_root, c1 / std::fabs(mu[static_cast<size_t>(k)]));
    }
    const double dM = d * M;
    const double A_out = N * (1.0 + dM);
    const double B_out = B_root * (dM / (1.0 + dM));
    const double vb = std::max(1.0, std::pow(sup_b, 1.0 / rho));
    MildCert out = make_cert(A_out, B_out, 0.0, r, false, d, vb);
    record(audit, "root_power", {}, out,
           "N=" + std::to_string(N) + " l=" + std::to_string(l));
    return out;
}

MildCert fold_to_unit_B(const MildCert& c, double certified_sup, Audit* audit) {
    if (c.weak) fail_input("fold_to_unit_B applies to non-weak certificates");
    if (!(certified_sup <= 1.0 + 1e-12))
        fail_input("fold_to_unit_B needs a certified sup <= 1, got " +
                   std::to_string(certified_sup));
    MildCert out = make_cert(c.A * std::pow(std::max(c.B, 1.0), c.C + 1.0), 1.0, c.C,
                             c.order, false, c.arity, std::min(certified_sup, 1.0));
    record(audit, "fold_to_unit_B", {c}, out);
    return out;
}

PreparedWeakResult prepared_weak(
    const MildCert& unit_cert, const std::vector<MildCert>& term_certs, int j, int x_arity,
    const std::vector<std::vector<std::optional<MildCert>>>& term_deriv_certs, Audit* audit) {
    if (term_certs.empty()) fail_input("prepared certificate needs at least one term");
    if (j < 0 || j >= static_cast<int>(term_certs.size()))
        fail_input("distinguished term index out of range");
    const int N = static_cast<int>(term_certs.size());
    if (unit_cert.arity != N)
        fail_input("unit certificate arity must equal the number of terms");
    for (const auto& tc : term_certs)
        if (!tc.weak || tc.arity != x_arity)
            fail_input("term certificates must be weak over the cell variables");

    PreparedWeakResult res;
    // The monomial map as one weak certificate (componentwise max constants).
    double mapA = 0.0, mapB = 0.0;
    Order map_ord = kOrderInf;
    for (const auto& tc : term_certs) {
        mapA = std::max(mapA, tc.A);
        mapB = std::max(mapB, tc.B);
        map_ord = min_order(map_ord, tc.order);
    }
    MildCert map_cert = make_cert(mapA, mapB, 0.0, map_ord, true, x_arity, mapB);
    MildCert unit_of_b = compose_weak(unit_cert, map_cert, audit);
    res.value = product({term_certs[static_cast<size_t>(j)], unit_of_b}, audit);

    if (static_cast<int>(term_deriv_certs.size()) != N) {
        res.failure = "first-derivative certificates not supplied";
        return res;
    }
    // d f / d x_l = (d b_j / d x_l) F(b) + sum_i b_j (d F / d y_i)(b) (d b_i / d x_l)
    MildCert dF = derivative_cert(unit_cert, audit);
    MildCert dF_of_b = compose_weak(dF, map_cert, audit);
    for (int l = 0; l < x_arity; ++l) {
        std::vector<MildCert> summands;
        const auto& dj = term_deriv_certs[static_cast<size_t>(j)];
        if (static_cast<int>(dj.size()) != x_arity || !dj[static_cast<size_t>(l)]) {
            res.derivs.clear();
            res.failure = "unbounded first derivative of term " + std::to_string(j + 1) +
                          " in direction " + std::to_string(l + 1);
            return res;
        }
        summands.push_back(product({*dj[static_cast<size_t>(l)], unit_of_b}, audit));
        for (int i = 0; i < N; ++i) {
            const auto& di = term_deriv_certs[static_cast<size_t>(i)];
            if (static_cast<int>(di.size()) != x_arity || !di[static_cast<size_t>(l)]) {
                res.derivs.clear();
                res.failure = "unbounded first derivative of term " + std::to_string(i + 1) +
                              " in direction " + std::to_string(l + 1);
                return res;
            }
            summands.push_back(product(
                {term_certs[static_cast<size_t>(j)], dF_of_b, *di[static_cast<size_t>(l)]},
                audit));
        }
        res.derivs.push_back(sum(summands, audit));
    }
    return res;
}

MildCert catalog_exp(double sup_arg) {
    return make_cert(1.0, std::exp(sup_arg), 0.0, kOrderInf, false, 1);
}

MildCert catalog_recip(double delta, double sup) {
    if (!(delta > 0.0)) fail_input("reciprocal certificate needs delta > 0");
    if (sup < delta) fail_input("reciprocal certificate needs sup >= delta");
    return make_cert(1.0 / delta, 1.0 / delta, 0.0, kOrderInf, false, 1);
}

MildCert catalog_pow(double mu, double lo, double hi) {
    if (!(lo > 0.0) || hi < lo) fail_input("power certificate needs 0 < lo <= hi");
    const double B = std::max(std::pow(hi, mu), std::pow(lo, mu));
    return make_cert(std::max(1.0, std::fabs(mu)) / lo, B, 0.0, kOrderInf, false, 1);
}

MildCert catalog_log1p(double lo, double hi) {
    if (!(lo > -1.0) || hi < lo) fail_input("log1p certificate needs -1 < lo <= hi");
    const double delta = 1.0 + lo;
    const double sup = std::max(std::fabs(std::log(delta)), std::fabs(std::log1p(hi)));
    return make_cert(1.0 / delta, std::max(sup, 1.0), 0.0, kOrderInf, false, 1,
                     sup);
}

MildCert catalog_const(double c, int arity) {
    const double a = std::max(std::fabs(c), 1e-300);
    return make_cert(1.0, a, 0.0, kOrderInf, false, arity, std::fabs(c));
}

MildCert catalog_coordinate(double sup, int arity) {
    return make_cert(1.0, std::max(1.0, sup), 0.0, kOrderInf, false, arity, sup);
}

MildCert unit_certificate(const Expr& e, const Box& b, Audit* audit) {
    if (!e) fail_internal("null expression");
    const int arity = std::max(1, b.arity());
    switch (e->kind) {
    case ExprKind::Const: return catalog_const(e->value, arity);
    case ExprKind::Var: {
        if (e->var >= b.arity()) fail_input("box has too few coordinates for the expression");
        return catalog_coordinate(b[e->var].mag(), arity);
    }
    case ExprKind::Add:
    case ExprKind::Sub:
        return sum({unit_certificate(e->args[0], b, audit),
                    unit_certificate(e->args[1], b, audit)},
                   audit);
    case ExprKind::Neg: return unit_certificate(e->args[0], b, audit);
    case ExprKind::Mul:
        return product({unit_certificate(e->args[0], b, audit),
                        unit_certificate(e->args[1], b, audit)},
                       audit);
    case ExprKind::Recip: {
        const auto ub = certify_unit(e->args[0], b);
        return compose(catalog_recip(ub.delta, ub.sup), unit_certificate(e->args[0], b, audit),
                       audit);
    }
    case ExprKind::Exp: {
        const Interval r = range_bounds(e->args[0], b);
        return compose(catalog_exp(r.hi), unit_certificate(e->args[0], b, audit), audit);
    }
    case ExprKind::Log1p: {
        const Interval r = range_bounds(e->args[0], b);
        if (r.lo <= -1.0) fail_input("log1p argument range reaches -1");
        return compose(catalog_log1p(r.lo, r.hi), unit_certificate(e->args[0], b, audit),
                       audit);
    }
    case ExprKind::Pow: {
        const Interval r = range_bounds(e->args[0], b);
        if (r.lo <= 0.0) fail_input("power argument range reaches 0");
        return compose(catalog_pow(e->exponent, r.lo, r.hi),
                       unit_certificate(e->args[0], b, audit), audit);
    }
    case ExprKind::Compose: {
        std::vector<Interval> inner_ranges;
        double A = 0.0, B = 0.0, vb = 0.0;
        Order ord = kOrderInf;
        for (size_t i = 1; i < e->args.size(); ++i) {
            MildCert ci = unit_certificate(e->args[i], b, audit);
            inner_ranges.push_back(range_bounds(e->args[i], b));
            A = std::max(A, ci.A);
            B = std::max(B, ci.B);
            vb = std::max(vb, ci.value_bound);
            ord = min_order(ord, ci.order);
        }
        MildCert map_cert = make_cert(A, B, 0.0, ord, false, arity, vb);
        MildCert outer = unit_certificate(e->args[0], Box(std::move(inner_ranges)), audit);
        return compose(outer, map_cert, audit);
    }
    }
    fail_internal("unhandled expression kind");
}

} // namespace mildatlas
