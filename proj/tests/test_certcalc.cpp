#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>

#include "core/certcalc.hpp"
#include "core/jet.hpp"

using namespace mildatlas;

namespace {

constexpr double kSlack = 1.0 + 1e-9;

// Deterministic interior samples of a box (strided grid, boundary margin).
std::vector<std::vector<double>> sample_box(const Box& b, int count, double margin = 1e-3) {
    std::vector<std::vector<double>> pts;
    std::mt19937 rng(424242);
    std::uniform_real_distribution<double> u(margin, 1.0 - margin);
    for (int i = 0; i < count; ++i) {
        std::vector<double> x(static_cast<size_t>(b.arity()));
        for (int k = 0; k < b.arity(); ++k)
            x[static_cast<size_t>(k)] = b[k].lo + u(rng) * b[k].width();
        pts.push_back(std::move(x));
    }
    return pts;
}

// Jet-sampling oracle: does the certificate bound hold at the samples?
bool cert_holds(const Expr& e, const MildCert& c, const Box& b, int samples, int max_order) {
    for (const auto& x : sample_box(b, samples)) {
        Jet j = eval_jet(e, x, max_order);
        const IndexSpace& sp = *j.space;
        for (int r = 0; r < sp.size(); ++r) {
            const MultiIndex& nu = sp.at(r);
            const int n = nu.order();
            if (c.order != kOrderInf && n > c.order) continue;
            double bound = claimed_bound(c, n);
            if (c.weak) {
                for (int i = 0; i < nu.dim(); ++i)
                    for (int k = 0; k < nu[i]; ++k) bound /= x[static_cast<size_t>(i)];
            }
            const double got = std::fabs(j.c[static_cast<size_t>(r)]) * sp.factorial_d(r);
            if (got > bound * kSlack) return false;
        }
    }
    return true;
}

Box box1(double lo, double hi) { return Box{std::vector<Interval>{Interval(lo, hi)}}; }

} // namespace

TEST_CASE("class conversion") {
    GevreyCert g1 = to_gevrey(make_cert(1, 1, 0, kOrderInf, false, 1));
    CHECK(g1.M == 1.0);
    CHECK(g1.R == 1.0);
    CHECK(g1.alpha == 1.0);

    GevreyCert g2 = to_gevrey(make_cert(4, 2, 1, kOrderInf, false, 1));
    CHECK(g2.M == 2.0);
    CHECK(g2.R == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(g2.alpha == 2.0);

    GevreyCert g3{3.0, 0.2, 1.5};
    GevreyCert back = to_gevrey(from_gevrey(g3, 2));
    CHECK(back.M == doctest::Approx(3.0).epsilon(1e-12));
    CHECK(back.R == doctest::Approx(0.2).epsilon(1e-12));
    CHECK(back.alpha == doctest::Approx(1.5).epsilon(1e-12));

    CHECK_THROWS_AS(to_gevrey(make_cert(1, 1, 0, kOrderInf, true, 1)), Error);
}

TEST_CASE("composition constants") {
    MildCert f = make_cert(2, 1, 0, kOrderInf, false, 1);
    MildCert g = make_cert(3, 1, 0, kOrderInf, false, 1);
    MildCert h = compose(f, g);
    CHECK(h.A == 3.0 * (1.0 * 2.0 + 1.0));
    CHECK(h.B < f.B);

    MildCert f1 = make_cert(1, 1, 1, kOrderInf, false, 2);
    MildCert g1 = make_cert(1, 1, 1, kOrderInf, false, 3);
    MildCert h1 = compose(f1, g1);
    CHECK(h1.A == doctest::Approx(9.0).epsilon(1e-15));
    CHECK(h1.B == doctest::Approx(2.0 / 3.0).epsilon(1e-15));
    CHECK(h1.arity == 3);

    CHECK_THROWS_AS(compose(make_cert(1, 1, 0, kOrderInf, true, 1), g), Error);
    CHECK_THROWS_AS(compose(f1, g), Error); // C mismatch
}

TEST_CASE("composed certificate bounds nested exponentials") {
    // exp o exp on [0, 1/4] from the catalog
    Box inner_dom = box1(0.0, 0.25);
    MildCert cg = catalog_exp(0.25);
    MildCert cf = catalog_exp(std::exp(0.25));
    MildCert cc = compose(cf, cg);
    Expr e = parse_expr("exp(exp(x))", {{"x", 0}});
    CHECK(cert_holds(e, cc, inner_dom, 200, 6));
    CHECK(cc.B < cf.B);

    // halving A breaks the bound
    MildCert bad = make_cert(cc.A / 2, cc.B, cc.C, cc.order, cc.weak, cc.arity, cc.value_bound);
    CHECK_FALSE(cert_holds(e, bad, inner_dom, 200, 6));
}

TEST_CASE("witness pair attains the composed bound with equality") {
    MildCert f = make_cert(1, 1, 0, kOrderInf, false, 1);
    MildCert g = make_cert(1, 1, 0, kOrderInf, false, 1);
    MildCert c = compose(f, g);
    CHECK(c.A == 2.0);
    CHECK(c.B == 0.5);
    // jets of 1/(2-y) after 1/(1-x) at 0
    Jet gj = eval_jet(parse_expr("1/(1-x)", {{"x", 0}}), {0.0}, 6);
    Jet fj = eval_jet(parse_expr("1/(2-y)", {{"y", 0}}), {gj.value()}, 6);
    Jet h = compose_faa(fj, {gj});
    double kfact = 1.0;
    for (int k = 1; k <= 6; ++k) {
        kfact *= k;
        const double predicted = claimed_bound(c, k);
        const double attained = h.derivative(MultiIndex({k}));
        CHECK(attained == doctest::Approx(predicted).epsilon(1e-12));
    }
}

TEST_CASE("weak composition") {
    // sqrt through a unit: f = 1/(2-y) over the range of b = sqrt
    MildCert unit = unit_certificate(parse_expr("1/(2-y)", {{"y", 0}}), box1(0.0, 1.0));
    MildCert b = monomial_weak({0.5}, 1.0);
    MildCert c = compose_weak(unit, b);
    CHECK(c.weak);
    Expr e = parse_expr("1/(2 - pow(x, 1/2))", {{"x", 0}});
    CHECK(cert_holds(e, c, box1(1e-4, 1.0), 200, 5));

    // identity-like outer: the general formula applies
    MildCert ident = make_cert(1, 1, 0, kOrderInf, false, 1);
    MildCert ci = compose_weak(ident, b);
    CHECK(ci.A == b.A * (1.0 * ident.A * b.B + 1.0));
    CHECK(ci.weak);

    CHECK_THROWS_AS(compose_weak(ident, ident), Error); // non-weak inner

    // family member t^2/x at t = 1/2 through an identity-like outer
    MildCert hyp = monomial_weak({-1.0}, 0.5);
    MildCert ch = compose_weak(ident, hyp);
    Expr he = parse_expr("0.25 / x", {{"x", 0}});
    CHECK(cert_holds(he, ch, box1(0.5, 1.0), 200, 5));
}

TEST_CASE("products") {
    MildCert single = make_cert(5, 0.25, 2, 9, false, 3);
    MildCert p1 = product({single});
    CHECK(p1.A == single.A);
    CHECK(p1.B == single.B);
    CHECK(p1.order == 9);

    MildCert a = make_cert(2, 3, 0, kOrderInf, false, 1);
    MildCert p2 = product({a, a});
    CHECK(p2.A == 4.0);
    CHECK(p2.B == 9.0);

    // sqrt(x) * sqrt(x) = x, weak certificates
    MildCert sq = monomial_weak({0.5}, 1.0);
    MildCert prod = product({sq, sq});
    CHECK(cert_holds(ex_var(0), prod, box1(1e-4, 1.0), 200, 4));

    CHECK_THROWS_AS(product({a, sq}), Error); // mixed weak flags
}

TEST_CASE("sums") {
    MildCert single = make_cert(7, 0.5, 1, kOrderInf, false, 2);
    MildCert s1 = sum({single});
    CHECK(s1.A == single.A);
    CHECK(s1.B == doctest::Approx(single.B).epsilon(1e-15));

    MildCert a = make_cert(2, 0.7, 0, kOrderInf, false, 1);
    MildCert s2 = sum({a, a});
    CHECK(s2.A == 2.0);
    CHECK(s2.B == doctest::Approx(1.4).epsilon(1e-15));

    MildCert ce = catalog_exp(1.0);
    MildCert ci = catalog_coordinate(1.0, 1);
    MildCert s = sum({ce, ci});
    CHECK(cert_holds(parse_expr("exp(x) + x", {{"x", 0}}), s, box1(0.0, 1.0), 200, 5));
}

TEST_CASE("class lifting") {
    MildCert c = make_cert(3, 0.5, 1, kOrderInf, false, 1);
    MildCert same = lift_C(c, 1);
    CHECK(same.A == 3.0);
    CHECK(same.B == 1.0); // B raised to max(B, 1)

    MildCert up = lift_C(make_cert(1, 0.5, 0, kOrderInf, false, 1), 1);
    CHECK(up.A == 1.0);
    CHECK(up.B == 1.0);
    CHECK(up.C == 1.0);
    // dominance at orders up to 6
    for (int n = 1; n <= 6; ++n) CHECK(claimed_bound(up, n) >= claimed_bound(make_cert(1, 0.5, 0, kOrderInf, false, 1), n));

    MildCert x2 = catalog_pow(2.0, 1e-3, 1.0); // x^2 on (0,1]
    MildCert lifted = lift_C(x2, 2);
    CHECK(cert_holds(parse_expr("x*x", {{"x", 0}}), lifted, box1(1e-3, 1.0), 200, 4));

    CHECK_THROWS_AS(lift_C(x2, -1), Error);
}

TEST_CASE("power substitution constants and preconditions") {
    MildCert f = monomial_weak({1.0}, 1.0); // A = 1
    MildCert df = monomial_weak({0.0}, 1.0);
    MildCert out = power_substitute(f, {df}, {3}, 3);
    CHECK(out.A == 3 * 1.0 * std::pow(1.0 + 1.0, 0.0 + 1.0));
    CHECK(out.A == 6.0);
    CHECK_FALSE(out.weak);
    CHECK(out.order == 3);

    // missing derivative certificates are rejected
    CHECK_THROWS_AS(power_substitute(f, {}, {3}, 3), Error);
    // exponent below the order is rejected
    CHECK_THROWS_AS(power_substitute(f, {df}, {2}, 3), Error);

    // x^(3/2) with n = 2, r = 2: composite is x^3
    MildCert g = monomial_weak({1.5}, 1.0);
    MildCert dg = monomial_weak({0.5}, 1.5);
    MildCert c = power_substitute(g, {dg}, {2}, 2);
    CHECK(cert_holds(parse_expr("x^3", {{"x", 0}}), c, box1(1e-4, 1.0), 200, 2));
}

TEST_CASE("rescale step") {
    CHECK(rescale_step(make_cert(2, 1, 1, kOrderInf, false, 1), 3) == doctest::Approx(1.0 / 6.0));
    for (int r = 1; r <= 8; ++r)
        CHECK(rescale_step(make_cert(1, 1, 0, kOrderInf, false, 1), r) == 1.0);
    CHECK_THROWS_AS(rescale_step(make_cert(1, 2, 0, kOrderInf, false, 1), 2), Error);
    CHECK_THROWS_AS(rescale_step(make_cert(1, 1, 0, 3, false, 1), 4), Error);

    // x -> x^2 with certificate (2, 1, 0), r = 4: after the step substitution
    // the pointwise norm is at most 1
    MildCert c = make_cert(2, 1, 0, kOrderInf, false, 1);
    const double h = rescale_step(c, 4);
    CHECK(h == 0.5);
    for (int i = 0; i < 100; ++i) {
        const double u = (i + 0.5) / 100.0;
        const double P = 0.25;
        // jet of u -> (h u + P)^2
        Jet aff = jet_const<double>(1, 4, {u}, h * u + P);
        aff.c[1] = h;
        Jet sqj = multiply(aff, aff);
        CHECK(cr_norm(sqj) <= 1.0 + 1e-9);
    }
}

TEST_CASE("bounded monomial certificates") {
    MildCert c1 = monomial_weak({0.5}, 1.0);
    CHECK(c1.A == 1.0);
    CHECK(c1.B == 1.0);
    CHECK(c1.C == 0.0);
    CHECK(c1.weak);

    MildCert c2 = monomial_weak({0.0, 0.0}, 0.75); // constant map
    CHECK(c2.A == 1.0);
    CHECK(c2.B == 0.75);

    // t^2/x at t = 1/2 on (t, 1): B = sup = 1/2, A = 1
    MildCert c3 = monomial_weak({-1.0}, 0.5);
    CHECK(c3.A == 1.0);
    CHECK(c3.B == 0.5);
    CHECK(cert_holds(parse_expr("0.25/x", {{"x", 0}}), c3, box1(0.5, 1.0), 200, 6));

    CHECK_THROWS_AS(monomial_weak({1.0}, 0.0), Error);
}

TEST_CASE("prepared value certificates") {
    // single term sqrt(x) under the unit 1/(2-y)
    std::map<std::string, int> vy{{"y", 0}};
    Expr unit = parse_expr("1/(2-y)", vy);
    MildCert unit_cert = unit_certificate(unit, box1(0.0, 1.0));
    MildCert term = monomial_weak({0.5}, 1.0);

    // first derivative of sqrt is unbounded: no derivative certificates
    auto res = prepared_weak(unit_cert, {term}, 0, 1, {{std::nullopt}});
    CHECK(res.derivs.empty());
    CHECK_FALSE(res.failure.empty());
    CHECK(cert_holds(parse_expr("pow(x,1/2) * (1/(2 - pow(x,1/2)))", {{"x", 0}}), res.value,
                     box1(1e-4, 1.0), 200, 5));

    // hyperbola member t^2/x at t = 1/2 on (t, 1): first derivative bounded by 1
    MildCert hterm = monomial_weak({-1.0}, 0.5);
    MildCert hderiv = monomial_weak({-2.0}, 1.0);
    MildCert one = catalog_const(1.0, 1);
    auto hres = prepared_weak(one, {hterm}, 0, 1, {{hderiv}});
    REQUIRE(hres.derivs.size() == 1);
    CHECK(cert_holds(parse_expr("0.25/x", {{"x", 0}}), hres.value, box1(0.5, 1.0), 200, 5));
    // the derivative certificate itself is sound for -t^2/x^2
    CHECK(cert_holds(parse_expr("-(0.25/(x*x))", {{"x", 0}}), hres.derivs[0],
                     box1(0.5, 1.0), 200, 5));
}

TEST_CASE("root powers of monomials") {
    // b = x (mu = 1), r = 2, l = 2, n = 4: (b o phi)^(1/2) = x^2
    MildCert c = root_power({1.0}, 1.0, {1.0}, {4}, 2, 2);
    CHECK(c.A == 4.0 * (1.0 + 1.0));
    CHECK_FALSE(c.weak);
    CHECK(cert_holds(parse_expr("x*x", {{"x", 0}}), c, box1(1e-4, 1.0), 200, 2));

    // l = 1 keeps the plain substituted monomial
    MildCert l1 = root_power({1.0}, 1.0, {1.0}, {2}, 2, 1);
    CHECK(cert_holds(parse_expr("x*x", {{"x", 0}}), l1, box1(1e-4, 1.0), 200, 2));
}

TEST_CASE("root power rejects missing derivative bounds") {
    CHECK_THROWS_AS(root_power({0.5}, 1.0, {std::numeric_limits<double>::infinity()}, {4}, 2, 2),
                    Error);
    CHECK_THROWS_AS(root_power({1.0}, 1.0, {1.0}, {3}, 2, 2), Error); // n < r^l

    // bounded case: b = x^(1/2) on [delta, 1] has derivative bound 1/(2 sqrt(delta))
    const double delta = 0.25;
    MildCert ok = root_power({0.5}, 1.0, {0.5 / std::sqrt(delta)}, {4}, 2, 2);
    // (b o phi)^(1/2) = x on the pulled-back domain
    CHECK(cert_holds(ex_var(0), ok, box1(std::pow(delta, 0.25), 1.0), 200, 2));
}

TEST_CASE("folding B into A") {
    MildCert c = make_cert(3, 2, 0, 5, false, 1, 0.9);
    MildCert f = fold_to_unit_B(c, 0.9);
    CHECK(f.B == 1.0);
    CHECK(f.A == 6.0);
    for (int n = 1; n <= 5; ++n) CHECK(claimed_bound(f, n) >= claimed_bound(c, n));
    CHECK_THROWS_AS(fold_to_unit_B(c, 1.5), Error);
}

TEST_CASE("norm-vs-certificate equivalence on catalog functions") {
    std::map<std::string, int> v{{"x", 0}};
    const std::vector<std::string> funcs = {
        "x", "x*x", "exp(x)", "1/(2-x)", "log1p(x)", "pow(1+x, 1/2)",
        "exp(x)*x", "x*x*x - 0.5*x", "1/(3 - x*x)", "exp(-x)",
        "0.5*exp(x) + x", "x/(2-x)", "log1p(x*x)", "pow(2-x, -1)",
        "x - x*x", "exp(x*x)", "pow(1+x, 3/2)", "1/(1.5-x)",
        "0.25/(x+0.5)", "exp(x)-1",
    };
    Box dom = box1(0.0, 1.0);
    const int r = 4;
    for (const auto& s : funcs) {
        Expr e = parse_expr(s, v);
        // sampled pointwise norm
        double norm = 0.0;
        for (const auto& x : sample_box(dom, 100)) norm = std::max(norm, cr_norm(eval_jet(e, x, r)));
        // holds with B = norm, fails with B shrunk
        MildCert atnorm = make_cert(1.0, norm * (1 + 1e-12), 0.0, r, false, 1, norm * (1 + 1e-12));
        CHECK(cert_holds(e, atnorm, dom, 100, r));
        MildCert below = make_cert(1.0, norm * 0.98, 0.0, r, false, 1, norm * 0.98);
        CHECK_FALSE(cert_holds(e, below, dom, 100, r));
    }
}

TEST_CASE("monotonicity in the input constants") {
    std::mt19937 rng(1234);
    std::uniform_real_distribution<double> u(0.5, 4.0);
    for (int rep = 0; rep < 200; ++rep) {
        const double Af = u(rng), Bf = u(rng), Ag = u(rng), Bg = u(rng);
        const double C = (rep % 2) ? 1.0 : 0.0;
        const double grow = 1.0 + u(rng);
        MildCert f = make_cert(Af, Bf, C, kOrderInf, false, 2);
        MildCert g = make_cert(Ag, Bg, C, kOrderInf, false, 3);
        MildCert base = compose(f, g);
        CHECK(base.B < f.B); // strict reduction of the outer bound
        for (int which = 0; which < 4; ++which) {
            MildCert f2 = make_cert(which == 0 ? Af * grow : Af, which == 1 ? Bf * grow : Bf, C,
                                    kOrderInf, false, 2);
            MildCert g2 = make_cert(which == 2 ? Ag * grow : Ag, which == 3 ? Bg * grow : Bg, C,
                                    kOrderInf, false, 3);
            MildCert out = compose(f2, g2);
            CHECK(out.A >= base.A * (1 - 1e-12));
            CHECK(out.B >= base.B * (1 - 1e-12));
        }
        MildCert p1 = product({f, f});
        MildCert p2 = product({make_cert(Af * grow, Bf, C, kOrderInf, false, 2), f});
        CHECK(p2.A >= p1.A);
        CHECK(p2.B >= p1.B);
        MildCert s1 = sum({f, f});
        MildCert s2 = sum({make_cert(Af, Bf * grow, C, kOrderInf, false, 2), f});
        CHECK(s2.A >= s1.A);
        CHECK(s2.B >= s1.B);
    }
}

TEST_CASE("audit trail records operations") {
    Audit audit;
    MildCert f = make_cert(2, 1, 0, kOrderInf, false, 1);
    MildCert g = make_cert(3, 1, 0, kOrderInf, false, 1);
    compose(f, g, &audit);
    product({f, g}, &audit);
    sum({f, g}, &audit);
    REQUIRE(audit.entries.size() == 3);
    CHECK(audit.entries[0].op == "compose");
    CHECK(audit.entries[1].op == "product");
    CHECK(audit.entries[2].op == "sum");
    CHECK(audit.entries[0].inputs.size() == 2);
}
