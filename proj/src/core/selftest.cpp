#include "selftest.hpp"

#include <cmath>
#include <functional>
#include <sstream>

#include "harness.hpp"
#include "sampling.hpp"

namespace mildatlas {

namespace {

struct CheckFailure : std::runtime_error {
    explicit CheckFailure(const std::string& msg) : std::runtime_error(msg) {}
};

void expect(bool cond, const std::string& what) {
    if (!cond) throw CheckFailure(what);
}

void expect_near(double got, double want, double tol, const std::string& what) {
    const double err = std::fabs(got - want);
    const double scale = std::max(1.0, std::fabs(want));
    if (!(err <= tol * scale))
        throw CheckFailure(what + ": got " + std::to_string(got) + ", want " +
                           std::to_string(want));
}

void expect_throws(const std::function<void()>& fn, const std::string& what) {
    try {
        fn();
    } catch (const Error&) {
        return;
    }
    throw CheckFailure(what + ": expected an error");
}

MultiIndex mi(std::initializer_list<int> e) { return MultiIndex(std::vector<int>(e)); }

Box box1(double lo, double hi) { return Box{std::vector<Interval>{Interval(lo, hi)}}; }

const char* kHyperbolaDoc = R"json({
  "k": 1, "m": 1, "n": 2,
  "T": [[0.1, 0.95]],
  "cell": { "walls": [
    {"which": "alpha", "var": 1, "kind": "param", "payload": "t1"},
    {"which": "beta",  "var": 1, "kind": "const", "payload": 1.0}
  ]},
  "components": [
    {"terms": [{"a": "t1 * t1", "mu": [-1]}], "unit": "1", "j": 1}
  ]
})json";

const char* kSqrtDoc = R"json({
  "k": 0, "m": 1, "n": 2,
  "T": [],
  "cell": { "walls": [
    {"which": "alpha", "var": 1, "kind": "const", "payload": 0.0},
    {"which": "beta",  "var": 1, "kind": "const", "payload": 1.0}
  ]},
  "components": [
    {"terms": [{"a": "1", "mu": ["1/2"]}], "unit": "1", "j": 1}
  ]
})json";

const char* kPointDoc = R"json({
  "k": 1, "m": 0, "n": 1,
  "T": [[0.1, 0.9]],
  "cell": { "walls": [] },
  "components": [
    {"terms": [{"a": "t1", "mu": []}], "unit": "1", "j": 1}
  ]
})json";

// jet-sampling check used by the certificate examples
void expect_cert_sound(const Expr& e, const MildCert& c, const Box& dom, int samples,
                       int max_order, const std::string& what) {
    const Order mo =
        c.order == kOrderInf ? max_order : std::min<Order>(max_order, c.order);
    auto verdict = verify_certificate(e, c, dom, samples, mo);
    expect(verdict.pass, what + " (worst ratio " + std::to_string(verdict.worst_ratio) +
                             " at nu=" + verdict.witness_nu + ")");
}

struct Check {
    const char* name;
    std::function<void()> fn;
};

std::vector<Check> make_checks() {
    std::vector<Check> checks;
    auto add = [&](const char* name, std::function<void()> fn) {
        checks.push_back(Check{name, std::move(fn)});
    };

    // ---- multi-index combinatorics
    add("multiindex.order_and_factorial", [] {
        expect(order_and_factorial(mi({0, 0, 0})) == std::make_pair(0, BigInt(1)), "zero index");
        expect(order_and_factorial(mi({2, 1})) == std::make_pair(3, BigInt(2)), "(2,1)");
        expect(order_and_factorial(mi({3, 3})) == std::make_pair(6, BigInt(36)), "(3,3)");
    });
    add("multiindex.precedes", [] {
        expect(!precedes(mi({2, 0}), mi({0, 1})), "higher order later");
        expect(precedes(mi({1, 0}), mi({0, 1})), "lex tie-break");
        expect(!precedes(mi({1, 1}), mi({1, 1})), "irreflexive");
    });
    add("multiindex.enumerate_up_to", [] {
        auto u1 = enumerate_up_to(1, 2);
        expect(u1.size() == 3 && u1[2] == mi({2}), "univariate grid");
        auto u2 = enumerate_up_to(2, 1);
        expect(u2[1] == mi({1, 0}) && u2[2] == mi({0, 1}), "bivariate order");
        expect(enumerate_up_to(2, 3).size() == 10, "count 10 = C(5,2)");
    });
    add("multiindex.decompositions", [] {
        auto d1 = decompositions(mi({1}), 2);
        expect(d1.size() == 2 && d1[0].weight == 1 && d1[1].weight == 1, "first-order rule");
        auto d2 = decompositions(mi({2}), 2);
        BigInt total = 0;
        for (auto& d : d2) total += d.weight;
        expect(d2.size() == 3 && total == 4, "binomial weights 1,2,1");
        BigInt t3 = 0;
        for (auto& d : decompositions(mi({2, 1}), 3)) t3 += d.weight;
        expect(t3 == 27, "weight sum 3^3");
    });
    add("multiindex.faa_partitions", [] {
        auto p1 = faa_partitions(mi({1}), mi({1}));
        expect(p1.size() == 1 && p1[0].s == 1 && p1[0].ls[0] == mi({1}), "chain rule");
        auto p21 = faa_partitions(mi({2}), mi({1}));
        expect(p21.size() == 1 && p21[0].ls[0] == mi({2}), "second order, lambda 1");
        auto p22 = faa_partitions(mi({2}), mi({2}));
        expect(p22.size() == 1 && p22[0].ks[0] == mi({2}) && p22[0].ls[0] == mi({1}),
               "second order, lambda 2");
        for (auto& p : p22) expect(p.s == 1, "no increasing pair sums to (2)");
        expect_throws([] { faa_partitions(mi({1}), mi({2})); }, "|lambda| > |nu|");
    });
    add("multiindex.weight_sum_identity", [] {
        for (int l = 1; l <= 3; ++l)
            for (auto& nu : enumerate_up_to(2, 4)) {
                BigInt total = 0, want = 1;
                for (auto& d : decompositions(nu, l)) total += d.weight;
                for (int i = 0; i < nu.order(); ++i) want *= l;
                expect(total == want, "sum of weights is l^|nu|");
            }
    });

    // ---- jets
    add("jet.eval_identity", [] {
        Jet j = eval_jet(ex_var(0), {0.3}, 2);
        expect_near(j.c[0], 0.3, 1e-15, "value");
        expect_near(j.c[1], 1.0, 1e-15, "slope");
        expect_near(j.c[2], 0.0, 1e-15, "curvature");
    });
    add("jet.eval_power_and_exp", [] {
        Jet p = eval_jet(parse_expr("x^6", {{"x", 0}}), {1.0}, 3);
        expect_near(p.c[1], 6.0, 1e-12, "binomial 6");
        expect_near(p.c[2], 15.0, 1e-12, "binomial 15");
        expect_near(p.c[3], 20.0, 1e-12, "binomial 20");
        Jet ex = eval_jet(ex_exp(ex_var(0)), {0.0}, 4);
        expect_near(ex.c[4], 1.0 / 24.0, 1e-12, "1/4!");
    });
    add("jet.multiply", [] {
        Jet x = jet_var<double>(1, 2, {0.0}, 0);
        Jet sq = multiply(x, x);
        expect_near(sq.c[2], 1.0, 1e-15, "x*x");
        Jet onep = jet_add(jet_const<double>(1, 2, {0.0}, 1.0), x);
        Jet onem = jet_sub(jet_const<double>(1, 2, {0.0}, 1.0), x);
        Jet pr = multiply(onep, onem);
        expect_near(pr.c[2], -1.0, 1e-15, "1 - x^2");
        Jet same = multiply(pr, jet_const<double>(1, 2, {0.0}, 1.0));
        expect_near(same.c[2], pr.c[2], 0.0, "unit element");
    });
    add("jet.compose_chain_rule", [] {
        Jet f = eval_jet(parse_expr("y^3", {{"y", 0}}), {1.0}, 3);
        Jet g = eval_jet(parse_expr("x^2", {{"x", 0}}), {1.0}, 3);
        Jet h = compose_faa(f, {g});
        expect_near(h.c[3], 20.0, 1e-12, "x^6 coefficients");
        Jet idf = eval_jet(ex_var(0), {g.value()}, 3);
        Jet same = compose_faa(idf, {g});
        for (size_t i = 0; i < same.c.size(); ++i)
            expect_near(same.c[i], g.c[i], 1e-15, "identity outer");
    });
    add("jet.compose_witness_values", [] {
        Jet g = eval_jet(parse_expr("1/(1-x)", {{"x", 0}}), {0.0}, 6);
        Jet f = eval_jet(parse_expr("1/(2-y)", {{"y", 0}}), {g.value()}, 6);
        Jet h = compose_faa(f, {g});
        double kf = 1.0;
        for (int k = 1; k <= 6; ++k) {
            kf *= k;
            expect_near(h.derivative(mi({k})), 0.5 * kf * std::pow(2.0, k), 1e-12,
                        "M |k|!/R^k with M = R = 1/2");
        }
    });
    add("jet.compose_series_agreement", [] {
        Jet g = eval_jet(parse_expr("x^2 - 0.25*x", {{"x", 0}}), {0.4}, 5);
        Jet f = eval_jet(parse_expr("y^3 + y", {{"y", 0}}), {g.value()}, 5);
        Jet a = compose_faa(f, {g});
        Jet b = compose_series(f, {g});
        for (size_t i = 0; i < a.c.size(); ++i) expect_near(a.c[i], b.c[i], 1e-9, "agreement");
        Jet cf = jet_const<double>(1, 5, {g.value()}, 7.0);
        Jet cc = compose_faa(cf, {g});
        expect(cc.c[0] == 7.0 && cc.c[3] == 0.0, "constant outer");
    });
    add("jet.compose_rational_exact", [] {
        std::vector<Rational> base{Rational(1, 3)};
        RatJet g = jet_const<Rational>(1, 4, base, Rational(1, 2));
        g.c[1] = Rational(2, 5);
        g.c[3] = Rational(-1, 7);
        RatJet f = jet_const<Rational>(1, 4, {g.value()}, Rational(3, 4));
        f.c[1] = Rational(1, 2);
        f.c[2] = Rational(5, 6);
        RatJet a = compose_faa(f, {g});
        RatJet b = compose_series(f, {g});
        for (size_t i = 0; i < a.c.size(); ++i) expect(a.c[i] == b.c[i], "exact equality");
    });
    add("jet.monomial", [] {
        Jet ident = monomial_jet({1.0}, {0.5}, 2);
        expect_near(ident.c[1], 1.0, 1e-15, "identity");
        Jet sq = monomial_jet({0.5}, {0.25}, 2);
        expect_near(sq.c[0], 0.5, 1e-15, "sqrt value");
        expect_near(sq.c[1], 1.0, 1e-15, "sqrt slope");
        expect_near(sq.derivative(mi({2})), -2.0, 1e-12, "sqrt second derivative");
        Jet inv = monomial_jet({-1.0}, {0.5}, 2);
        expect_near(inv.c[0], 2.0, 1e-15, "1/x value");
        expect_near(inv.c[1], -4.0, 1e-12, "1/x slope");
        expect_near(inv.c[2], 8.0, 1e-12, "1/x normalized second");
        expect_throws([] { monomial_jet({0.5}, {0.0}, 2); }, "boundary point");
    });
    add("jet.cr_norm", [] {
        expect_near(cr_norm(monomial_jet({1.0}, {0.37}, 3)), 1.0, 1e-12, "identity norm");
        expect_near(cr_norm(monomial_jet({1.5}, {0.01}, 3)), 62.5, 1e-9, "x^(3/2) at 0.01");
        expect(cr_norm(jet_const<double>(2, 3, {0.1, 0.2}, 0.0)) == 0.0, "zero jet");
    });
    add("jet.finite_difference_crosscheck", [] {
        std::map<std::string, int> v{{"x", 0}, {"y", 1}};
        expect(fd_crosscheck(parse_expr("x*x", {{"x", 0}}), {{0.5}}, 2), "x^2");
        expect(fd_crosscheck(parse_expr("x*x/y", v), {{0.5, 0.7}}, 2), "t^2/x shape");
        expect(fd_crosscheck(parse_expr("exp(x) * pow(x, 1/2)", {{"x", 0}}), {{0.3}}, 2),
               "exp * sqrt");
    });

    // ---- intervals
    add("interval.enclose", [] {
        std::map<std::string, int> v{{"x1", 0}, {"x2", 1}};
        Interval r = enclose(parse_expr("x1", v), box1(0.2, 0.8));
        expect(r.lo <= 0.2 && r.hi >= 0.8 && r.hi < 0.8 + 1e-9, "identity range");
        Box b2{std::vector<Interval>{Interval(0, 1), Interval(0, 1)}};
        Interval p = enclose(parse_expr("x1 * x2", v), b2);
        expect(p.lo <= 0.0 && p.hi >= 1.0 && p.hi <= 1.0 + 1e-9, "product range");
        expect_throws([&] { enclose(parse_expr("1/x1", v), box1(0.0, 1.0)); }, "singular");
    });
    add("interval.certify_unit", [] {
        std::map<std::string, int> v{{"x1", 0}};
        auto ub = certify_unit(parse_expr("2 + x1", v), box1(0, 1));
        expect(ub.delta >= 2 - 1e-9 && ub.sup <= 3 + 1e-9, "monotone range");
        expect_throws([&] { certify_unit(parse_expr("x1 - 0.5", v), box1(0, 1)); },
                      "sign change");
        auto ue = certify_unit(parse_expr("exp(x1)", v), box1(0, 1));
        expect(ue.delta >= 1 - 1e-9 && ue.sup <= std::exp(1.0) * (1 + 1e-12), "exp range");
    });
    add("interval.sup_abs", [] {
        const double s1 = sup_abs(parse_expr("pow(x1, 1/2)", {{"x1", 0}}), box1(0.01, 1.0));
        expect(s1 >= 1.0 && s1 <= 1.0 + 1e-6, "sqrt sup");
        std::map<std::string, int> v{{"x1", 0}, {"t", 1}};
        Box b{std::vector<Interval>{Interval(0.5, 1.0), Interval::point(0.5)}};
        const double s2 = sup_abs(parse_expr("t*t/x1", v), b);
        expect(s2 >= 0.5 && s2 <= 0.5 + 1e-6, "family sup at fixed parameter");
        expect_near(sup_abs(ex_const(-3.25), box1(0, 1)), 3.25, 1e-15, "constant");
    });

    // ---- certificate calculus
    add("certcalc.convert", [] {
        GevreyCert g = to_gevrey(make_cert(1, 1, 0, kOrderInf, false, 1));
        expect(g.M == 1 && g.R == 1 && g.alpha == 1, "unit constants");
        GevreyCert g2 = to_gevrey(make_cert(4, 2, 1, kOrderInf, false, 1));
        expect_near(g2.R, 0.5, 1e-15, "R = A^(-1/(C+1))");
        expect(g2.M == 2 && g2.alpha == 2, "M = B, alpha = C+1");
        GevreyCert g3{3.0, 0.2, 1.5};
        GevreyCert back = to_gevrey(from_gevrey(g3, 1));
        expect_near(back.R, 0.2, 1e-12, "round trip");
    });
    add("certcalc.compose_constants", [] {
        MildCert h = compose(make_cert(2, 1, 0, kOrderInf, false, 1),
                             make_cert(3, 1, 0, kOrderInf, false, 1));
        expect(h.A == 9.0, "A = A_g(d A_f + 1)");
        MildCert h1 = compose(make_cert(1, 1, 1, kOrderInf, false, 2),
                              make_cert(1, 1, 1, kOrderInf, false, 3));
        expect_near(h1.A, 9.0, 1e-15, "(1 + d)^ (C+1)");
        expect_near(h1.B, 2.0 / 3.0, 1e-15, "B formula");
        expect(h.B < 1.0, "B_out < B_f");
    });
    add("certcalc.compose_soundness", [] {
        MildCert cc = compose(catalog_exp(std::exp(0.25)), catalog_exp(0.25));
        expect_cert_sound(parse_expr("exp(exp(x))", {{"x", 0}}), cc, box1(0, 0.25), 120, 6,
                          "nested exponentials");
    });
    add("certcalc.compose_weak", [] {
        MildCert unit = unit_certificate(parse_expr("1/(2-y)", {{"y", 0}}), box1(0, 1));
        MildCert b = monomial_weak({0.5}, 1.0);
        MildCert c = compose_weak(unit, b);
        expect(c.weak, "weak flag");
        expect_cert_sound(parse_expr("1/(2 - pow(x, 1/2))", {{"x", 0}}), c, box1(1e-4, 1),
                          120, 5, "unit after sqrt");
        MildCert ident = make_cert(1, 1, 0, kOrderInf, false, 1);
        MildCert ci = compose_weak(ident, b);
        expect_near(ci.A, b.A * (1 * 1 * b.B + 1), 1e-15, "identity outer formula");
        MildCert hyp = compose_weak(ident, monomial_weak({-1.0}, 0.5));
        expect_cert_sound(parse_expr("0.25/x", {{"x", 0}}), hyp, box1(0.5, 1), 120, 5,
                          "family member at t = 1/2");
    });
    add("certcalc.product", [] {
        MildCert one = product({make_cert(5, 0.25, 2, 9, false, 3)});
        expect(one.A == 5 && one.B == 0.25, "single factor");
        MildCert two = product({make_cert(2, 3, 0, kOrderInf, false, 1),
                                make_cert(2, 3, 0, kOrderInf, false, 1)});
        expect(two.A == 4 && two.B == 9, "(lA, B^l)");
        MildCert sq = monomial_weak({0.5}, 1.0);
        expect_cert_sound(ex_var(0), product({sq, sq}), box1(1e-4, 1), 120, 4,
                          "sqrt * sqrt = x");
    });
    add("certcalc.sum", [] {
        MildCert s1 = sum({make_cert(7, 0.5, 1, kOrderInf, false, 2)});
        expect(s1.A == 7 && std::fabs(s1.B - 0.5) < 1e-15, "single summand");
        MildCert s2 = sum({make_cert(2, 0.7, 0, kOrderInf, false, 1),
                           make_cert(2, 0.7, 0, kOrderInf, false, 1)});
        expect_near(s2.B, 1.4, 1e-15, "doubling B");
        MildCert s = sum({catalog_exp(1.0), catalog_coordinate(1.0, 1)});
        expect_cert_sound(parse_expr("exp(x) + x", {{"x", 0}}), s, box1(0, 1), 120, 5,
                          "exp plus identity");
    });
    add("certcalc.lift", [] {
        MildCert same = lift_C(make_cert(3, 0.5, 1, kOrderInf, false, 1), 1);
        expect(same.A == 3 && same.B == 1.0, "B raised to max(B,1)");
        MildCert up = lift_C(make_cert(1, 0.5, 0, kOrderInf, false, 1), 1);
        expect(up.A == 1 && up.B == 1 && up.C == 1, "(1, 1, 1)");
        for (int nn = 1; nn <= 6; ++nn)
            expect(claimed_bound(up, nn) >=
                       claimed_bound(make_cert(1, 0.5, 0, kOrderInf, false, 1), nn),
                   "dominance");
        expect_cert_sound(parse_expr("x*x", {{"x", 0}}),
                          lift_C(catalog_pow(2.0, 1e-3, 1.0), 2), box1(1e-3, 1), 120, 4,
                          "x^2 lifted to C = 2");
    });
    add("certcalc.power_substitute", [] {
        MildCert f = monomial_weak({1.0}, 1.0);
        MildCert df = monomial_weak({0.0}, 1.0);
        MildCert out = power_substitute(f, {df}, {3}, 3);
        expect(out.A == 6.0 && !out.weak && out.order == 3, "A~ = N A (d+1)^(C+1) = 6");
        expect_throws([&] { power_substitute(f, {}, {3}, 3); }, "missing derivatives");
        expect_throws([&] { power_substitute(f, {df}, {2}, 3); }, "exponent below order");
        MildCert g = monomial_weak({1.5}, 1.0);
        MildCert dg = monomial_weak({0.5}, 1.5);
        expect_cert_sound(parse_expr("x^3", {{"x", 0}}), power_substitute(g, {dg}, {2}, 2),
                          box1(1e-4, 1), 120, 2, "x^(3/2) through x^2");
    });
    add("certcalc.rescale_step", [] {
        expect_near(rescale_step(make_cert(2, 1, 1, kOrderInf, false, 1), 3), 1.0 / 6.0, 1e-15,
                    "h = 1/(A r^C)");
        for (int r = 1; r <= 8; ++r)
            expect(rescale_step(make_cert(1, 1, 0, kOrderInf, false, 1), r) == 1.0,
                   "A = 1, C = 0");
        for (int i = 0; i < 100; ++i) {
            const double u = (i + 0.5) / 100.0;
            Jet aff = jet_const<double>(1, 4, {u}, 0.5 * u + 0.25);
            aff.c[1] = 0.5;
            expect(cr_norm(multiply(aff, aff)) <= 1.0 + 1e-9, "rescaled square");
        }
    });
    add("certcalc.monomial_weak", [] {
        MildCert c1 = monomial_weak({0.5}, 1.0);
        expect(c1.A == 1 && c1.B == 1 && c1.C == 0 && c1.weak, "(1, 1, 0)");
        MildCert c2 = monomial_weak({0.0, 0.0}, 0.75);
        expect(c2.A == 1 && c2.B == 0.75, "constant map");
        MildCert c3 = monomial_weak({-1.0}, 0.5);
        expect(c3.A == 1 && c3.B == 0.5, "A = max(1, |mu|)");
        expect_cert_sound(parse_expr("0.25/x", {{"x", 0}}), c3, box1(0.5, 1), 150, 6,
                          "hyperbola member bound");
    });
    add("certcalc.prepared_weak", [] {
        // unit F == 1: the value certificate is the monomial certificate
        MildCert term = monomial_weak({-1.0}, 0.5);
        MildCert deriv = monomial_weak({-2.0}, 1.0);
        auto res = prepared_weak(catalog_const(1.0, 1), {term}, 0, 1, {{deriv}});
        expect(res.derivs.size() == 1, "derivative certificates produced");
        expect_cert_sound(parse_expr("0.25/x", {{"x", 0}}), res.value, box1(0.5, 1), 120, 5,
                          "hyperbola value");
        expect_cert_sound(parse_expr("-(0.25/(x*x))", {{"x", 0}}), res.derivs[0],
                          box1(0.5, 1), 120, 5, "hyperbola derivative");
        // sqrt alone: the derivative certificate must fail
        auto bad = prepared_weak(catalog_const(1.0, 1), {monomial_weak({0.5}, 1.0)}, 0, 1,
                                 {{std::nullopt}});
        expect(bad.derivs.empty() && !bad.failure.empty(), "unbounded derivative detected");
    });
    add("certcalc.root_power", [] {
        MildCert c = root_power({1.0}, 1.0, {1.0}, {4}, 2, 2);
        expect(c.A == 8.0 && !c.weak, "N (1 + d M)");
        expect_cert_sound(parse_expr("x*x", {{"x", 0}}), c, box1(1e-4, 1), 120, 2,
                          "(x^4)^(1/2) = x^2");
        MildCert l1 = root_power({1.0}, 1.0, {1.0}, {2}, 2, 1);
        expect_cert_sound(parse_expr("x*x", {{"x", 0}}), l1, box1(1e-4, 1), 120, 2,
                          "l = 1 plain substitution");
        expect_throws(
            [] { root_power({0.5}, 1.0, {std::numeric_limits<double>::infinity()}, {4}, 2, 2); },
            "missing first-derivative bound");
    });

    // ---- prepared families
    add("prepared.parse_and_evaluate", [] {
        Family fam = parse_family(kHyperbolaDoc);
        auto res = evaluate(fam, {0.5}, {0.7});
        expect_near(res.values[0], 0.25 / 0.7, 1e-12, "t^2/x at (0.5, 0.7)");
        expect(res.member, "membership");
        expect(!evaluate(fam, {0.5}, {0.4}).member, "below the lower wall");
        for (const auto& x : sample_cell(fam, {0.5}, 200))
            expect(std::fabs(evaluate(fam, {0.5}, x).values[0]) <= 1.0 + 1e-9,
                   "values within [-1, 1]");
    });
    add("prepared.vanishing_unit_rejected", [] {
        std::string doc = kHyperbolaDoc;
        const auto pos = doc.find("\"unit\": \"1\"");
        doc.replace(pos, std::string("\"unit\": \"1\"").size(), "\"unit\": \"b1 - 0.5\"");
        expect_throws([&] { parse_family(doc); }, "straddling unit");
    });
    add("prepared.point_family", [] {
        Family fam = parse_family(kPointDoc);
        auto res = evaluate(fam, {0.37}, {});
        expect(res.member && std::fabs(res.values[0] - 0.37) < 1e-15, "degenerate evaluation");
    });
    add("prepared.roundtrip", [] {
        Family fam = parse_family(kHyperbolaDoc);
        const std::string s1 = serialize_family(fam);
        expect(serialize_family(parse_family(s1)) == s1, "parse-serialize fixpoint");
    });
    add("prepared.c1_bounds", [] {
        Family fam = parse_family(kHyperbolaDoc);
        auto c1 = check_c1_bounded(fam, 8);
        expect(c1.ok, "hyperbola family is C1-bounded");
        expect(c1.max_bound >= 1.0 - 1e-9 && c1.max_bound <= 1.5,
               "certified bound near 1");
        Family sq = parse_family(kSqrtDoc);
        auto bad = check_c1_bounded(sq, 4);
        expect(!bad.ok && bad.witness_x.size() == 1 && bad.witness_x[0] < 0.05,
               "sqrt blows up near 0");
        Family pt = parse_family(kPointDoc);
        expect(check_c1_bounded(pt, 4).max_bound == 0.0, "constant terms");
    });
    add("prepared.wall_diagnostics", [] {
        Family fam = parse_family(kHyperbolaDoc);
        auto diag = wall_prepared_check(fam);
        expect(diag.ok && diag.violations.empty(), "constant and parameter walls pass");
    });

    // ---- atlas pipeline
    add("atlas.power_substitution", [] {
        Family fam = parse_family(kHyperbolaDoc);
        Audit audit;
        PoweredCell pc = power_substitute_cell(fam, {0.5}, 3, AtlasMode::Standard, &audit);
        expect(pc.phi_exponents[0] == 3.0, "x -> x^3 for m = 1");
        expect_near(pc.lower[0].value, std::pow(0.5, 1.0 / 3.0), 1e-15, "pulled-back wall");
        expect(pc.wall_certs_lower[0].A == 1.0, "constant wall certificate");
        expect_cert_sound(parse_expr("0.25 * pow(v, -3)", {{"v", 0}}), pc.component_certs[0],
                          box1(std::pow(0.5, 1.0 / 3.0) + 1e-6, 1), 120, 3,
                          "f after the substitution");
    });
    add("atlas.straighten_affine", [] {
        const char* doc = R"json({
          "k": 0, "m": 1, "n": 2, "T": [],
          "cell": { "walls": [
            {"which": "alpha", "var": 1, "kind": "const", "payload": 0.25},
            {"which": "beta",  "var": 1, "kind": "const", "payload": 0.75}
          ]},
          "components": [{"terms": [{"a": "0.5", "mu": [1]}], "unit": "1", "j": 1}]
        })json";
        Family fam = parse_family(doc);
        Atlas atlas = build_atlas(fam, {}, 2);
        const double lo = std::sqrt(0.25), hi = std::sqrt(0.75);
        auto v = straightened_point(atlas.cells[0], {0.5});
        expect_near(v[0], lo + 0.5 * (hi - lo), 1e-15, "affine placement");
    });
    add("atlas.subdivide", [] {
        double base = 0.0;
        CubeGrid g = subdivide(make_cert(18, 1, 0, 5, false, 2, 1.0), 3, 2, &base);
        expect(g.side == 18 && std::fabs(base - 2.0) < 1e-12, "side 18, base 2");
        CubeGrid g1 = subdivide(make_cert(0.5, 1, 0, 5, false, 1, 1.0), 3, 0, nullptr);
        expect(g1.side == 1, "single chart when the step exceeds 1");
        for (int s = 0; s < 1000; ++s) {
            const double u = halton(static_cast<uint64_t>(s), 2);
            long long idx = std::min<long long>(static_cast<long long>(u * g.side), g.side - 1);
            expect(u >= idx * g.step - 1e-12 && u <= (idx + 1) * g.step + 1e-12, "covering");
        }
    });
    add("atlas.build_counts", [] {
        Family fam = parse_family(kHyperbolaDoc);
        long long prev = 0;
        for (int r = 2; r <= 8; ++r) {
            Atlas a = build_atlas(fam, {0.5}, r);
            expect(a.chart_count >= prev, "monotone counts");
            prev = a.chart_count;
        }
        expect(prev <= 8 * 40, "linear-in-r scale for m = 1");
        Family pt = parse_family(kPointDoc);
        expect(build_atlas(pt, {0.5}, 5).chart_count == 1, "single constant chart");
    });
    add("atlas.improved_normalization", [] {
        const char* doc = R"json({
          "k": 0, "m": 2, "n": 2, "T": [],
          "cell": { "walls": [
            {"which": "alpha", "var": 1, "kind": "const", "payload": 0.1},
            {"which": "beta",  "var": 1, "kind": "const", "payload": 0.9},
            {"which": "alpha", "var": 2, "kind": "prepared",
             "payload": {"terms": [{"a": "0.2", "mu": [1]}], "unit": "1", "j": 1}},
            {"which": "beta",  "var": 2, "kind": "prepared",
             "payload": {"terms": [{"a": "0.8", "mu": [1]}], "unit": "1", "j": 1}}
          ]},
          "components": []
        })json";
        ImprovedRewrite rw = improved_normalize(parse_family(doc), 3);
        expect(!rw.identity && rw.e1 == Rational(1), "equal exponents need no rounding");
        expect(rw.scale > 1.0, "scale from the certified unit range");
    });
    add("atlas.growth_fit", [] {
        Family fam = parse_family(kHyperbolaDoc);
        GrowthFit fit = growth_fit(fam, {0.5}, 2, 8);
        expect(fit.slope <= 1.3, "slope within m^3 + 0.3 for m = 1");
        Family pt = parse_family(kPointDoc);
        expect(std::fabs(growth_fit(pt, {0.5}, 2, 5).slope) < 1e-12, "constant family");
    });

    // ---- verification harness
    add("harness.identity_chart", [] {
        CellPipeline pipe;
        pipe.m = 1;
        pipe.n = 1;
        pipe.r = 3;
        pipe.phi_exponents = {1.0};
        NumWall lo, hi;
        lo.is_const = true;
        lo.value = 0.0;
        hi.is_const = true;
        hi.value = 1.0;
        pipe.lower = {lo};
        pipe.upper = {hi};
        NumPrepared ident;
        ident.terms.push_back(NumTerm{1.0, {1.0}});
        ident.unit = ex_const(1.0);
        ident.j = 0;
        pipe.components = {ident};
        pipe.grid.side = 1;
        pipe.grid.step = 1.0;
        Atlas atlas;
        atlas.m = atlas.n = 1;
        atlas.r = 3;
        atlas.chart_count = 1;
        atlas.cells.push_back(pipe);
        VerifyOptions opt;
        opt.samples = 100;
        auto vr = verify_chart_norms(atlas, opt);
        expect(vr.pass && std::fabs(vr.max_norm - 1.0) < 1e-9, "identity norm is 1");
    });
    add("harness.unmild_chart_fails", [] {
        CellPipeline pipe;
        pipe.m = 1;
        pipe.n = 1;
        pipe.r = 3;
        pipe.phi_exponents = {1.0};
        NumWall lo, hi;
        lo.is_const = true;
        lo.value = 0.0;
        hi.is_const = true;
        hi.value = 1.0;
        pipe.lower = {lo};
        pipe.upper = {hi};
        NumPrepared fake;
        fake.terms.push_back(NumTerm{1.0, {1.5}});
        fake.unit = ex_const(1.0);
        fake.j = 0;
        pipe.components = {fake};
        pipe.grid.side = 1;
        pipe.grid.step = 1.0;
        Atlas atlas;
        atlas.m = atlas.n = 1;
        atlas.r = 3;
        atlas.chart_count = 1;
        atlas.cells.push_back(pipe);
        VerifyOptions opt;
        opt.samples = 200;
        auto vr = verify_chart_norms(atlas, opt);
        expect(!vr.pass && vr.charts[0].witness_nu == "(3)", "third order blows up near 0");
    });
    add("harness.hyperbola_atlas_verifies", [] {
        Family fam = parse_family(kHyperbolaDoc);
        Atlas atlas = build_atlas(fam, {0.5}, 4);
        VerifyOptions opt;
        opt.samples = 60;
        auto vr = verify_chart_norms(atlas, opt);
        expect(vr.pass, "all charts within norm 1");
        expect(verify_coverage(fam, atlas, 200).pass, "coverage");
    });
    add("harness.certificate_verdicts", [] {
        Expr e = parse_expr("exp(x)", {{"x", 0}});
        expect(verify_certificate(e, catalog_exp(1.0), box1(0, 1), 200, 6).pass, "sound");
        MildCert halved = make_cert(0.5, std::exp(1.0), 0, kOrderInf, false, 1, std::exp(1.0));
        auto bad = verify_certificate(e, halved, box1(0, 1), 200, 6);
        expect(!bad.pass && !bad.witness_nu.empty(), "halved A fails with a witness");
        expect(verify_certificate(ex_const(0.0),
                                  make_cert(1, 1e-300, 0, kOrderInf, false, 1, 0.0),
                                  box1(0, 1), 100, 4)
                   .pass,
               "zero function");
    });
    add("harness.power_substitution_negative", [] {
        // sqrt rejected at the precondition, and order-3 bounds fail near 0
        Family fam = parse_family(kSqrtDoc);
        expect_throws([&] { build_atlas(fam, {}, 3); }, "rejected at the precondition");
        Expr comp = parse_expr("pow(x, 3/2)", {{"x", 0}}); // sqrt after x^3
        MildCert pretend = make_cert(6, 1, 0, 3, false, 1, 1.0);
        auto verdict = verify_certificate(comp, pretend, box1(1e-8, 1e-3), 400, 3);
        expect(!verdict.pass, "third derivative exceeds any fixed bound near 0");
        expect(verdict.worst_ratio > 100.0, "failure by orders of magnitude");
    });
    add("harness.report_roundtrip", [] {
        Family fam = parse_family(kHyperbolaDoc);
        Atlas atlas = build_atlas(fam, {0.5}, 3);
        VerifyOptions opt;
        opt.samples = 20;
        auto vr = verify_chart_norms(atlas, opt);
        const std::string rep = emit_report(atlas, vr, opt);
        expect(emit_report(atlas, vr, opt) == rep, "identical bytes");
        expect(rep.find("\"pass\": true") != std::string::npos, "verdict present");
    });

    return checks;
}

} // namespace

SelftestResult run_selftest() {
    SelftestResult result;
    std::ostringstream log;
    for (const auto& check : make_checks()) {
        try {
            check.fn();
            ++result.passed;
            log << "PASS " << check.name << "\n";
        } catch (const std::exception& e) {
            ++result.failed;
            result.failures.push_back(std::string(check.name) + ": " + e.what());
            log << "FAIL " << check.name << ": " << e.what() << "\n";
        }
    }
    result.log = log.str();
    return result;
}

} // namespace mildatlas
