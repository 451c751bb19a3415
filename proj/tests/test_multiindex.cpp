#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <set>

#include "core/multiindex.hpp"

using namespace mildatlas;

namespace {

MultiIndex mi(std::initializer_list<int> e) { return MultiIndex(std::vector<int>(e)); }

BigInt binomial(int n, int k) {
    BigInt num = 1, den = 1;
    for (int i = 0; i < k; ++i) {
        num *= (n - i);
        den *= (i + 1);
    }
    return num / den;
}

BigInt ipow(BigInt b, int e) {
    BigInt r = 1;
    for (int i = 0; i < e; ++i) r *= b;
    return r;
}

} // namespace

TEST_CASE("order and factorial") {
    CHECK(order_and_factorial(mi({0, 0, 0})) == std::make_pair(0, BigInt(1)));
    CHECK(order_and_factorial(mi({2, 1})) == std::make_pair(3, BigInt(2)));
    CHECK(order_and_factorial(mi({3, 3})) == std::make_pair(6, BigInt(36)));
    // |nu|! near 21 overflows 64-bit; exact integers must not.
    MultiIndex big = mi({22});
    CHECK(big.factorial() == BigInt("1124000727777607680000"));
}

TEST_CASE("graded-lexicographic order") {
    CHECK_FALSE(precedes(mi({2, 0}), mi({0, 1}))); // higher total order comes later
    CHECK(precedes(mi({0, 1}), mi({2, 0})));
    CHECK(precedes(mi({1, 0}), mi({0, 1}))); // equal order, first coordinate heavier first
    CHECK_FALSE(precedes(mi({1, 1}), mi({1, 1})));
    CHECK_THROWS_AS(precedes(mi({1}), mi({1, 0})), Error);

    // strict total order on a grid
    auto grid = enumerate_up_to(3, 4);
    for (size_t i = 0; i < grid.size(); ++i)
        for (size_t j = 0; j < grid.size(); ++j)
            CHECK(precedes(grid[i], grid[j]) == (i < j));
}

TEST_CASE("enumeration") {
    auto u1 = enumerate_up_to(1, 2);
    REQUIRE(u1.size() == 3);
    CHECK(u1[0] == mi({0}));
    CHECK(u1[1] == mi({1}));
    CHECK(u1[2] == mi({2}));

    auto u2 = enumerate_up_to(2, 1);
    REQUIRE(u2.size() == 3);
    CHECK(u2[0] == mi({0, 0}));
    CHECK(u2[1] == mi({1, 0}));
    CHECK(u2[2] == mi({0, 1}));

    CHECK(enumerate_up_to(2, 3).size() == 10);
    // count for arbitrary (d, r) is binomial(r + d, d)
    for (int d = 1; d <= 4; ++d)
        for (int r = 0; r <= 5; ++r)
            CHECK(BigInt(enumerate_up_to(d, r).size()) == binomial(r + d, d));
}

TEST_CASE("index space ranks") {
    auto sp = IndexSpace::get(2, 4);
    for (int i = 0; i < sp->size(); ++i) CHECK(sp->rank(sp->at(i)) == i);
    CHECK(sp->at(0) == mi({0, 0}));
}

TEST_CASE("decompositions carry multinomial weights") {
    auto d1 = decompositions(mi({1}), 2);
    REQUIRE(d1.size() == 2);
    CHECK(d1[0].parts[0] == mi({1}));
    CHECK(d1[0].parts[1] == mi({0}));
    CHECK(d1[0].weight == 1);
    CHECK(d1[1].weight == 1);

    auto d2 = decompositions(mi({2}), 2);
    REQUIRE(d2.size() == 3);
    std::multiset<int> ws;
    for (auto& d : d2) ws.insert(static_cast<int>(d.weight));
    CHECK(ws == std::multiset<int>({1, 2, 1}));

    BigInt total = 0;
    for (auto& d : decompositions(mi({2, 1}), 3)) total += d.weight;
    CHECK(total == 27);

    CHECK_THROWS_AS(decompositions(mi({1}), 0), Error);
}

TEST_CASE("sum of weights is l^|nu| for all small shapes") {
    for (int d = 1; d <= 2; ++d) {
        for (int l = 1; l <= 3; ++l) {
            for (auto& nu : enumerate_up_to(d, d == 1 ? 6 : 6)) {
                if (nu.order() > 6) continue;
                BigInt total = 0;
                std::set<std::string> seen;
                for (auto& dec : decompositions(nu, l)) {
                    total += dec.weight;
                    std::string key;
                    for (auto& p : dec.parts) key += p.to_string();
                    CHECK(seen.insert(key).second); // no duplicates
                }
                CHECK(total == ipow(l, nu.order()));
            }
        }
    }
}

TEST_CASE("factorial chains") {
    // nu! <= |nu|! <= d^|nu| nu!, exact integers
    for (int d = 1; d <= 4; ++d) {
        for (auto& nu : enumerate_up_to(d, 8)) {
            auto [n, nf] = order_and_factorial(nu);
            BigInt of = 1;
            for (int i = 2; i <= n; ++i) of *= i;
            CHECK(nf <= of);
            CHECK(of <= ipow(d, n) * nf);
        }
    }
    // |nu|! <= |nu|^|nu| <= e^|nu| |nu|!, with a rational upper bound for e
    const BigInt ep = BigInt("2718281828459046"); // e < ep / eq
    const BigInt eq = BigInt("1000000000000000");
    for (int n = 1; n <= 8; ++n) {
        BigInt of = 1;
        for (int i = 2; i <= n; ++i) of *= i;
        CHECK(of <= ipow(n, n));
        CHECK(ipow(n, n) * ipow(eq, n) <= ipow(ep, n) * of);
    }
}

TEST_CASE("chain-rule partition sets: univariate") {
    // first order: exactly the chain rule
    auto p1 = faa_partitions(mi({1}), mi({1}));
    REQUIRE(p1.size() == 1);
    CHECK(p1[0].s == 1);
    CHECK(p1[0].ks[0] == mi({1}));
    CHECK(p1[0].ls[0] == mi({1}));

    // second order: (f.g)'' = f''(g) g'^2 + f'(g) g''
    auto p21 = faa_partitions(mi({2}), mi({1}));
    REQUIRE(p21.size() == 1);
    CHECK(p21[0].s == 1);
    CHECK(p21[0].ks[0] == mi({1}));
    CHECK(p21[0].ls[0] == mi({2}));

    auto p22 = faa_partitions(mi({2}), mi({2}));
    REQUIRE(p22.size() == 1);
    CHECK(p22[0].s == 1);
    CHECK(p22[0].ks[0] == mi({2}));
    CHECK(p22[0].ls[0] == mi({1}));
    for (auto& p : p22) CHECK(p.s != 2); // no strictly increasing pair can sum to (2)

    CHECK_THROWS_AS(faa_partitions(mi({2}), mi({0})), Error);
    CHECK_THROWS_AS(faa_partitions(mi({1}), mi({2})), Error);
}

TEST_CASE("chain-rule partition sets: structural validation") {
    for (int e = 1; e <= 2; ++e) {
        for (auto& nu : enumerate_up_to(e, 4)) {
            if (nu.order() == 0) continue;
            for (int d = 1; d <= 2; ++d) {
                for (auto& lam : enumerate_up_to(d, nu.order())) {
                    if (lam.order() == 0) continue;
                    auto parts = faa_partitions(nu, lam);
                    std::set<std::string> seen;
                    for (auto& p : parts) {
                        CHECK(validate_faa_partition(p, nu, lam));
                        std::string key;
                        for (int j = 0; j < p.s; ++j)
                            key += p.ks[static_cast<size_t>(j)].to_string() +
                                   p.ls[static_cast<size_t>(j)].to_string();
                        CHECK(seen.insert(key).second);
                    }
                }
            }
        }
    }
}
