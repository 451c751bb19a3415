#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>

#include "core/expr.hpp"
#include "core/interval.hpp"

using namespace mildatlas;

namespace {
Box box1(double lo, double hi) { return Box{std::vector<Interval>{Interval(lo, hi)}}; }
Box box2(double l1, double h1, double l2, double h2) {
    return Box{std::vector<Interval>{Interval(l1, h1), Interval(l2, h2)}};
}
} // namespace

TEST_CASE("natural extension encloses ranges") {
    std::map<std::string, int> v{{"x1", 0}, {"x2", 1}};

    Interval r = enclose(parse_expr("x1", v), box1(0.2, 0.8));
    CHECK(r.lo == doctest::Approx(0.2));
    CHECK(r.hi == doctest::Approx(0.8));

    Interval p = enclose(parse_expr("x1 * x2", v), box2(0, 1, 0, 1));
    CHECK(p.lo <= 0.0);
    CHECK(p.hi >= 1.0);
    CHECK(p.hi < 1.0 + 1e-12);

    CHECK_THROWS_AS(enclose(parse_expr("1/x1", v), box1(0.0, 1.0)), Error);
}

TEST_CASE("containment at random points") {
    std::map<std::string, int> v{{"x1", 0}, {"x2", 1}};
    const std::vector<Expr> exprs = {
        parse_expr("exp(x1) - x2 * x2", v),
        parse_expr("1/(2 - x1)", v),
        parse_expr("log1p(x1 * x2) + pow(x2, 1/2)", v),
        parse_expr("x1*x1*x2 - 3*x1 + 0.5", v),
    };
    Box b = box2(0.1, 0.9, 0.2, 0.8);
    std::mt19937 rng(99);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (const auto& e : exprs) {
        Interval enc = enclose(e, b);
        for (int i = 0; i < 1000; ++i) {
            std::vector<double> x = {b[0].lo + u(rng) * b[0].width(),
                                     b[1].lo + u(rng) * b[1].width()};
            const double val = eval_value(e, x);
            CHECK(enc.contains(val));
        }
    }
}

TEST_CASE("sub-box enclosures are nested") {
    std::map<std::string, int> v{{"x1", 0}, {"x2", 1}};
    Expr e = parse_expr("exp(x1 * x2) - x1", v);
    Box outer = box2(0.0, 1.0, 0.0, 1.0);
    Interval oe = enclose(e, outer);
    std::mt19937 rng(3);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int i = 0; i < 50; ++i) {
        double a = u(rng), b = u(rng);
        if (a > b) std::swap(a, b);
        double c = u(rng), d = u(rng);
        if (c > d) std::swap(c, d);
        Interval ie = enclose(e, box2(a, b, c, d));
        CHECK(ie.subset_of(oe, 1e-12));
    }
}

TEST_CASE("unit certification") {
    std::map<std::string, int> v{{"x1", 0}};

    auto ub = certify_unit(parse_expr("2 + x1", v), box1(0.0, 1.0));
    CHECK(ub.delta >= 2.0 - 1e-12);
    CHECK(ub.sup <= 3.0 + 1e-12);
    CHECK(ub.positive);

    CHECK_THROWS_AS(certify_unit(parse_expr("x1 - 0.5", v), box1(0.0, 1.0)), Error);

    auto ue = certify_unit(parse_expr("exp(x1)", v), box1(0.0, 1.0));
    CHECK(ue.delta >= 1.0 - 1e-12);
    CHECK(ue.sup >= std::exp(1.0));
    CHECK(ue.sup <= std::exp(1.0) * (1 + 1e-12));

    auto un = certify_unit(parse_expr("-1 - x1", v), box1(0.0, 1.0));
    CHECK_FALSE(un.positive);
    CHECK(un.delta >= 1.0 - 1e-12);

    // bisection rescues an enclosure the flat extension cannot separate
    auto uh = certify_unit(parse_expr("x1 * x1 - x1 + 0.26", v), box1(0.0, 1.0));
    CHECK(uh.delta > 0.0);
    CHECK(uh.delta <= 0.01 + 1e-9);
}

TEST_CASE("certified sup of absolute value") {
    std::map<std::string, int> v{{"x1", 0}, {"t", 1}};

    const double s1 = sup_abs(parse_expr("pow(x1, 1/2)", {{"x1", 0}}), box1(0.01, 1.0));
    CHECK(s1 >= 1.0);
    CHECK(s1 <= 1.0 + 1e-9);

    // t^2/x at fixed t = 1/2 over x in [1/2, 1]
    Expr f = parse_expr("t*t/x1", v);
    Box b{std::vector<Interval>{Interval(0.5, 1.0), Interval::point(0.5)}};
    const double s2 = sup_abs(f, b);
    CHECK(s2 >= 0.5);
    CHECK(s2 <= 0.5 + 1e-9);

    CHECK(sup_abs(ex_const(-3.25), box1(0, 1)) == doctest::Approx(3.25));
}

TEST_CASE("certified unit bounds hold at samples") {
    std::map<std::string, int> v{{"x1", 0}, {"x2", 1}};
    Expr e = parse_expr("1/(2 - x1 * x2) + 0.3", v);
    Box b = box2(0.0, 1.0, 0.0, 1.0);
    auto ub = certify_unit(e, b);
    std::mt19937 rng(11);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int i = 0; i < 500; ++i) {
        std::vector<double> x = {u(rng), u(rng)};
        const double val = std::fabs(eval_value(e, x));
        CHECK(val >= ub.delta - 1e-12);
        CHECK(val <= ub.sup + 1e-12);
    }
}

TEST_CASE("expression round-trips through text") {
    std::map<std::string, int> v{{"t1", 0}, {"x1", 1}};
    const std::vector<std::string> names = {"t1", "x1"};
    const std::vector<std::string> texts = {
        "t1 * t1",
        "1/(2 - x1)",
        "exp(x1) + log1p(t1 * x1)",
        "pow(x1, 1/2) * t1 - 0.125",
        "-x1 + (t1 - 3) * x1",
    };
    std::mt19937 rng(5);
    std::uniform_real_distribution<double> u(0.05, 0.95);
    for (const auto& s : texts) {
        Expr e = parse_expr(s, v);
        Expr back = parse_expr(print_expr(e, names), v);
        for (int i = 0; i < 50; ++i) {
            std::vector<double> x = {u(rng), u(rng)};
            CHECK(eval_value(e, x) == doctest::Approx(eval_value(back, x)).epsilon(1e-15));
        }
    }
    CHECK_THROWS_AS(parse_expr("x1 +", v), Error);
    CHECK_THROWS_AS(parse_expr("foo(x1)", v), Error);
    CHECK_THROWS_AS(parse_expr("x1 x1", v), Error);
}
