#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "core/family.hpp"
#include "core/jet.hpp"

using namespace mildatlas;

namespace {

const char* kHyperbolaDoc = R"({
  "k": 1, "m": 1, "n": 2,
  "T": [[0.1, 0.95]],
  "cell": { "walls": [
    {"which": "alpha", "var": 1, "kind": "param", "payload": "t1"},
    {"which": "beta",  "var": 1, "kind": "const", "payload": 1.0}
  ]},
  "components": [
    {"terms": [{"a": "t1 * t1", "mu": [-1]}], "unit": "1", "j": 1}
  ]
})";

const char* kPointDoc = R"({
  "k": 1, "m": 0, "n": 1,
  "T": [[0.1, 0.9]],
  "cell": { "walls": [] },
  "components": [
    {"terms": [{"a": "t1", "mu": []}], "unit": "1", "j": 1}
  ]
})";

// f = sqrt(x) on 0 < x < 1: a valid bounded family whose monomial map is not
// C^1-bounded toward the boundary.
const char* kSqrtDoc = R"({
  "k": 0, "m": 1, "n": 2,
  "T": [],
  "cell": { "walls": [
    {"which": "alpha", "var": 1, "kind": "const", "payload": 0.0},
    {"which": "beta",  "var": 1, "kind": "const", "payload": 1.0}
  ]},
  "components": [
    {"terms": [{"a": "1", "mu": ["1/2"]}], "unit": "1", "j": 1}
  ]
})";

} // namespace

TEST_CASE("hyperbola family parses and evaluates") {
    Family fam = parse_family(kHyperbolaDoc);
    CHECK(fam.k == 1);
    CHECK(fam.m == 1);
    CHECK(fam.components.size() == 1);

    auto res = evaluate(fam, {0.5}, {0.7});
    REQUIRE(res.values.size() == 1);
    CHECK(res.values[0] == doctest::Approx(0.25 / 0.7).epsilon(1e-12));
    CHECK(res.member);

    auto below = evaluate(fam, {0.5}, {0.4});
    CHECK_FALSE(below.member);

    CHECK_THROWS_AS(evaluate(fam, {2.0}, {0.7}), Error);

    // members stay within [-1, 1]
    for (const auto& x : sample_cell(fam, {0.5}, 200)) {
        auto r = evaluate(fam, {0.5}, x);
        CHECK(r.member);
        CHECK(std::fabs(r.values[0]) <= 1.0 + 1e-9);
    }
}

TEST_CASE("vanishing unit is rejected") {
    std::string doc = kHyperbolaDoc;
    const auto pos = doc.find("\"unit\": \"1\"");
    REQUIRE(pos != std::string::npos);
    doc.replace(pos, std::string("\"unit\": \"1\"").size(), "\"unit\": \"b1 - 0.5\"");
    CHECK_THROWS_WITH_AS(parse_family(doc),
                         doctest::Contains("non-vanishing"), Error);
}

TEST_CASE("schema violations are reported") {
    CHECK_THROWS_AS(parse_family("{"), Error);
    CHECK_THROWS_AS(parse_family("{\"k\": 1}"), Error);

    // malformed exponent string
    std::string doc = kHyperbolaDoc;
    const auto pos = doc.find("[-1]");
    doc.replace(pos, 4, "[\"x/y\"]");
    CHECK_THROWS_WITH_AS(parse_family(doc), doctest::Contains("exponent"), Error);

    // wall ordering violated: alpha above beta
    std::string doc2 = kHyperbolaDoc;
    const auto p2 = doc2.find("\"payload\": 1.0");
    doc2.replace(p2, std::string("\"payload\": 1.0").size(), "\"payload\": 0.05");
    CHECK_THROWS_AS(parse_family(doc2), Error);
}

TEST_CASE("zero-dimensional families degenerate to evaluation") {
    Family fam = parse_family(kPointDoc);
    CHECK(fam.m == 0);
    auto res = evaluate(fam, {0.37}, {});
    CHECK(res.member);
    CHECK(res.values[0] == doctest::Approx(0.37));
}

TEST_CASE("serialization round-trips") {
    for (const char* doc : {kHyperbolaDoc, kPointDoc, kSqrtDoc}) {
        Family fam = parse_family(doc);
        const std::string s1 = serialize_family(fam);
        Family fam2 = parse_family(s1);
        const std::string s2 = serialize_family(fam2);
        CHECK(s1 == s2);
    }
}

TEST_CASE("evaluation agrees with jets at order zero") {
    Family fam = parse_family(kHyperbolaDoc);
    const double t = 0.5;
    Expr fixed = parse_expr("0.25 / x1", {{"x1", 0}});
    for (const auto& x : sample_cell(fam, {t}, 50)) {
        auto r = evaluate(fam, {t}, x);
        Jet j = eval_jet(fixed, x, 2);
        CHECK(r.values[0] == doctest::Approx(j.value()).epsilon(1e-12));
    }
}

TEST_CASE("first-derivative bounds of the hyperbola family") {
    Family fam = parse_family(kHyperbolaDoc);
    auto c1 = check_c1_bounded(fam, 8);
    REQUIRE(c1.ok);
    // |d(t^2/x)/dx| = t^2/x^2 <= 1 on t < x; the certified bound approaches 1
    CHECK(c1.max_bound >= 1.0 - 1e-9);
    CHECK(c1.max_bound <= 1.5);

    // tighter parameter range, tighter certified bound
    Box narrow{std::vector<Interval>{Interval(0.4, 0.6)}};
    auto c1n = check_c1_bounded(fam, narrow, 8);
    CHECK(c1n.ok);
    CHECK(c1n.max_bound <= 1.05);

    // at a fixed parameter the bound is essentially exact
    Box point{std::vector<Interval>{Interval::point(0.5)}};
    auto c1p = check_c1_bounded(fam, point, 4);
    CHECK(c1p.ok);
    CHECK(c1p.max_bound <= 1.0 + 1e-9);
}

TEST_CASE("sqrt component fails the first-derivative check with a witness") {
    Family fam = parse_family(kSqrtDoc);
    auto c1 = check_c1_bounded(fam, 4);
    CHECK_FALSE(c1.ok);
    CHECK(c1.failure.find("unbounded") != std::string::npos);
    REQUIRE(c1.witness_x.size() == 1);
    CHECK(c1.witness_x[0] < 0.05); // blow-up toward the boundary
    CHECK(c1.witness_value > 1.0);
}

TEST_CASE("constant terms have zero derivative bound") {
    Family fam = parse_family(kPointDoc);
    auto c1 = check_c1_bounded(fam, 4);
    CHECK(c1.ok);
    CHECK(c1.max_bound == 0.0);
}

TEST_CASE("wall diagnostics") {
    Family fam = parse_family(kHyperbolaDoc);
    auto diag = wall_prepared_check(fam);
    CHECK(diag.ok);
    CHECK(diag.violations.empty());
    REQUIRE(diag.notes.size() == 2);

    // handcrafted family with an x1^(-2) wall term: unbounded on the cell
    Family bad;
    bad.k = 0;
    bad.m = 2;
    bad.n = 2;
    bad.cell.m = 2;
    WallSpec lo1;
    lo1.kind = WallKind::Constant;
    lo1.constant = 0.0;
    WallSpec hi1;
    hi1.kind = WallKind::Constant;
    hi1.constant = 1.0;
    WallSpec lo2 = lo1;
    WallSpec hi2;
    hi2.kind = WallKind::Prepared;
    PreparedTerm pt;
    pt.a = ex_const(0.03);
    pt.mu.push_back(ExponentVal{-2.0, Rational(-2)});
    hi2.prepared.terms.push_back(pt);
    hi2.prepared.unit = ex_const(1.0);
    hi2.prepared.j = 0;
    bad.cell.lower = {lo1, lo2};
    bad.cell.upper = {hi1, hi2};
    auto bdiag = wall_prepared_check(bad);
    CHECK_FALSE(bdiag.ok);
    REQUIRE_FALSE(bdiag.violations.empty());
    CHECK(bdiag.violations[0].find("unbounded") != std::string::npos);
}

TEST_CASE("cell hull is conservative") {
    Family fam = parse_family(kHyperbolaDoc);
    Box hull = cell_hull(fam, fam.T);
    REQUIRE(hull.arity() == 1);
    CHECK(hull[0].lo <= 0.1 + 1e-12);
    CHECK(hull[0].hi >= 1.0 - 1e-12);
    for (const auto& x : sample_cell(fam, {0.2}, 100)) CHECK(hull[0].contains(x[0]));
}
