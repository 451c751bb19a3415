#pragma once

// Truncated multivariate Taylor arithmetic. A jet stores the normalized
// coefficients f^(nu)(x)/nu! of a function at a base point for all |nu| <= r;
// raw derivatives are reconstructed on demand. Two scalar backends share the
// code: double (default) and exact rationals (polynomial data only), the
// latter existing so the chain-rule composition can be cross-checked exactly.

#include <cmath>
#include <boost/multiprecision/cpp_int.hpp>

#include "expr.hpp"
#include "multiindex.hpp"

namespace mildatlas {

using Rational = boost::multiprecision::cpp_rational;

template <typename T>
struct BasicJet {
    std::shared_ptr<const IndexSpace> space;
    std::vector<T> base; // base point, one entry per variable
    std::vector<T> c;    // normalized coefficients, indexed by space rank

    int arity() const { return space->dim(); }
    int order() const { return space->max_order(); }
    const T& value() const { return c[0]; }
    T coeff(const MultiIndex& v) const { return c[static_cast<size_t>(space->rank(v))]; }
    // f^(nu)(x) = nu! * coeff(nu)
    T derivative(const MultiIndex& v) const;
};

using Jet = BasicJet<double>;
using RatJet = BasicJet<Rational>;

template <typename T>
BasicJet<T> jet_const(int dim, int ord, std::vector<T> base, T value);
template <typename T>
BasicJet<T> jet_var(int dim, int ord, std::vector<T> base, int axis);

template <typename T>
BasicJet<T> jet_add(const BasicJet<T>& a, const BasicJet<T>& b);
template <typename T>
BasicJet<T> jet_sub(const BasicJet<T>& a, const BasicJet<T>& b);
template <typename T>
BasicJet<T> jet_neg(const BasicJet<T>& a);
template <typename T>
BasicJet<T> jet_scale(const BasicJet<T>& a, const T& s);

// Truncated product: coefficient at nu is sum over nu1 + nu2 = nu.
template <typename T>
BasicJet<T> multiply(const BasicJet<T>& a, const BasicJet<T>& b);

// Composition of jets through the higher-order chain rule partition sets.
// f_jet must be based at the value vector of the g_jets (within tolerance in
// double mode, exactly in rational mode); all orders must agree.
template <typename T>
BasicJet<T> compose_faa(const BasicJet<T>& f_jet, const std::vector<BasicJet<T>>& g_jets);

// Independent oracle: substitutes the inner jets into the outer Taylor
// polynomial and re-truncates. Same contract as compose_faa.
template <typename T>
BasicJet<T> compose_series(const BasicJet<T>& f_jet, const std::vector<BasicJet<T>>& g_jets);

// Composition with a univariate outer power series given by normalized
// coefficients around the inner jet's value (outer[k] multiplies w^k where w
// is the inner jet minus its value).
template <typename T>
BasicJet<T> compose_univariate(const std::vector<T>& outer, const BasicJet<T>& inner);

// Jet of x -> prod_i x_i^{mu_i} at a strictly positive point; exponents may
// be arbitrary reals. Coefficients come from the generalized binomial
// closed form, so negative and fractional powers are exact to roundoff.
Jet monomial_jet(const std::vector<double>& mu, const std::vector<double>& x, int ord);

// Pointwise contribution to the C^r-norm: max over |nu| <= r of
// |f^(nu)(x)| / |nu|!.
double cr_norm(const Jet& j);

// Taylor jet of an expression at a point. Errors when the point violates a
// declared definedness box or hits a numeric singularity.
Jet eval_jet(const Expr& e, const std::vector<double>& x, int ord);

// Rational-mode evaluation; the expression must be polynomial (constants,
// variables, +, -, *, natural powers, composition).
RatJet eval_jet_rational(const Expr& e, const std::vector<Rational>& x, int ord);

double rational_to_double(const Rational& q);

// --- implementation ----------------------------------------------------------

namespace detail {

// Cached chain-rule composition tables for one (inner arity of f, arity of g,
// order) shape: for each (nu, lambda) pair, the list of partition terms with
// their exact integer weights lambda! / prod_j k_j!.
struct FaaTerm {
    BigInt weight;
    double weight_d;
    // factors: (component i of g, rank of l_j in the outer space, exponent)
    std::vector<std::array<int, 3>> factors;
};

class FaaTable {
public:
    static std::shared_ptr<const FaaTable> get(int f_arity, int g_arity, int ord);
    const std::vector<FaaTerm>& terms(int nu_rank, int lambda_rank) const {
        return table_[static_cast<size_t>(nu_rank)][static_cast<size_t>(lambda_rank)];
    }
    const IndexSpace& f_space() const { return *f_space_; }
    const IndexSpace& g_space() const { return *g_space_; }

private:
    FaaTable(int f_arity, int g_arity, int ord);
    std::shared_ptr<const IndexSpace> f_space_;
    std::shared_ptr<const IndexSpace> g_space_;
    std::vector<std::vector<std::vector<FaaTerm>>> table_;
};

template <typename T>
T from_bigint(const BigInt& b) {
    if constexpr (std::is_same_v<T, double>)
        return static_cast<double>(b);
    else
        return T(b);
}

template <typename T>
double to_double(const T& v) {
    if constexpr (std::is_same_v<T, double>)
        return v;
    else
        return rational_to_double(v);
}

} // namespace detail

template <typename T>
T BasicJet<T>::derivative(const MultiIndex& v) const {
    return c[static_cast<size_t>(space->rank(v))] * detail::from_bigint<T>(v.factorial());
}

template <typename T>
BasicJet<T> jet_const(int dim, int ord, std::vector<T> base, T value) {
    BasicJet<T> j;
    j.space = IndexSpace::get(dim, ord);
    j.base = std::move(base);
    j.c.assign(static_cast<size_t>(j.space->size()), T(0));
    j.c[0] = std::move(value);
    return j;
}

template <typename T>
BasicJet<T> jet_var(int dim, int ord, std::vector<T> base, int axis) {
    if (axis < 0 || axis >= dim) fail_input("variable axis out of range");
    BasicJet<T> j = jet_const<T>(dim, ord, base, base[static_cast<size_t>(axis)]);
    if (ord >= 1) {
        const int rank = j.space->rank(MultiIndex::unit(dim, axis));
        j.c[static_cast<size_t>(rank)] = T(1);
    }
    return j;
}

namespace detail {

template <typename T>
void check_shape(const BasicJet<T>& a, const BasicJet<T>& b) {
    if (a.space != b.space)
        fail_input("jet shape mismatch (arity or order differ)");
    if (a.base != b.base)
        fail_input("jet base point mismatch");
}

} // namespace detail

template <typename T>
BasicJet<T> jet_add(const BasicJet<T>& a, const BasicJet<T>& b) {
    detail::check_shape(a, b);
    BasicJet<T> r = a;
    for (size_t i = 0; i < r.c.size(); ++i) r.c[i] += b.c[i];
    return r;
}

template <typename T>
BasicJet<T> jet_sub(const BasicJet<T>& a, const BasicJet<T>& b) {
    detail::check_shape(a, b);
    BasicJet<T> r = a;
    for (size_t i = 0; i < r.c.size(); ++i) r.c[i] -= b.c[i];
    return r;
}

template <typename T>
BasicJet<T> jet_neg(const BasicJet<T>& a) {
    BasicJet<T> r = a;
    for (auto& v : r.c) v = -v;
    return r;
}

template <typename T>
BasicJet<T> jet_scale(const BasicJet<T>& a, const T& s) {
    BasicJet<T> r = a;
    for (auto& v : r.c) v *= s;
    return r;
}

template <typename T>
BasicJet<T> multiply(const BasicJet<T>& a, const BasicJet<T>& b) {
    detail::check_shape(a, b);
    const IndexSpace& sp = *a.space;
    BasicJet<T> r = jet_const<T>(sp.dim(), sp.max_order(), a.base, T(0));
    for (int ia = 0; ia < sp.size(); ++ia) {
        if (a.c[static_cast<size_t>(ia)] == T(0)) continue;
        const MultiIndex& va = sp.at(ia);
        const int oa = sp.order_of(ia);
        for (int ib = 0; ib < sp.size(); ++ib) {
            if (oa + sp.order_of(ib) > sp.max_order()) continue;
            if (b.c[static_cast<size_t>(ib)] == T(0)) continue;
            const int ir = sp.rank(va.plus(sp.at(ib)));
            r.c[static_cast<size_t>(ir)] +=
                a.c[static_cast<size_t>(ia)] * b.c[static_cast<size_t>(ib)];
        }
    }
    return r;
}

template <typename T>
BasicJet<T> compose_univariate(const std::vector<T>& outer, const BasicJet<T>& inner) {
    BasicJet<T> w = inner;
    w.c[0] = T(0);
    BasicJet<T> acc = jet_const<T>(inner.arity(), inner.order(), inner.base,
                                   outer.empty() ? T(0) : outer.back());
    for (int k = static_cast<int>(outer.size()) - 2; k >= 0; --k) {
        acc = multiply(acc, w);
        acc.c[0] += outer[static_cast<size_t>(k)];
    }
    return acc;
}

namespace detail {

template <typename T>
void check_composable(const BasicJet<T>& f_jet, const std::vector<BasicJet<T>>& g_jets) {
    if (g_jets.empty()) fail_input("composition needs at least one inner jet");
    if (f_jet.arity() != static_cast<int>(g_jets.size()))
        fail_input("composition arity mismatch: outer expects " +
                   std::to_string(f_jet.arity()) + " inner jets, got " +
                   std::to_string(g_jets.size()));
    for (size_t i = 1; i < g_jets.size(); ++i) check_shape(g_jets[0], g_jets[i]);
    if (f_jet.order() != g_jets[0].order())
        fail_input("composition order mismatch");
    for (int i = 0; i < f_jet.arity(); ++i) {
        const T& gv = g_jets[static_cast<size_t>(i)].value();
        if constexpr (std::is_same_v<T, double>) {
            if (std::fabs(f_jet.base[static_cast<size_t>(i)] - gv) > 1e-12)
                fail_input("outer jet base point does not match inner jet values");
        } else {
            if (f_jet.base[static_cast<size_t>(i)] != gv)
                fail_input("outer jet base point does not match inner jet values");
        }
    }
}

} // namespace detail

template <typename T>
BasicJet<T> compose_faa(const BasicJet<T>& f_jet, const std::vector<BasicJet<T>>& g_jets) {
    detail::check_composable(f_jet, g_jets);
    const int e = g_jets[0].arity();
    const int d = f_jet.arity();
    const int ord = f_jet.order();
    auto table = detail::FaaTable::get(d, e, ord);
    const IndexSpace& out_sp = table->g_space();
    const IndexSpace& f_sp = *f_jet.space;

    BasicJet<T> out = jet_const<T>(e, ord, g_jets[0].base, f_jet.value());
    for (int nu = 1; nu < out_sp.size(); ++nu) {
        const int n = out_sp.order_of(nu);
        T total(0);
        for (int lam = 1; lam < f_sp.size(); ++lam) {
            if (f_sp.order_of(lam) > n) continue;
            const T& fc = f_jet.c[static_cast<size_t>(lam)];
            if (fc == T(0)) continue;
            T inner_sum(0);
            for (const auto& term : table->terms(nu, lam)) {
                T prod = detail::from_bigint<T>(term.weight);
                for (const auto& fac : term.factors) {
                    const T& g = g_jets[static_cast<size_t>(fac[0])].c[static_cast<size_t>(fac[1])];
                    for (int p = 0; p < fac[2]; ++p) prod *= g;
                }
                inner_sum += prod;
            }
            total += fc * inner_sum;
        }
        out.c[static_cast<size_t>(nu)] = total;
    }
    return out;
}

template <typename T>
BasicJet<T> compose_series(const BasicJet<T>& f_jet, const std::vector<BasicJet<T>>& g_jets) {
    detail::check_composable(f_jet, g_jets);
    const int e = g_jets[0].arity();
    const int d = f_jet.arity();
    const int ord = f_jet.order();
    const IndexSpace& f_sp = *f_jet.space;

    // Powers of each centered inner jet up to the order.
    std::vector<std::vector<BasicJet<T>>> pw(static_cast<size_t>(d));
    for (int i = 0; i < d; ++i) {
        BasicJet<T> w = g_jets[static_cast<size_t>(i)];
        w.c[0] = T(0);
        auto& col = pw[static_cast<size_t>(i)];
        col.push_back(jet_const<T>(e, ord, g_jets[0].base, T(1)));
        for (int k = 1; k <= ord; ++k) col.push_back(multiply(col.back(), w));
    }
    BasicJet<T> out = jet_const<T>(e, ord, g_jets[0].base, T(0));
    for (int lam = 0; lam < f_sp.size(); ++lam) {
        const T& fc = f_jet.c[static_cast<size_t>(lam)];
        if (fc == T(0)) continue;
        const MultiIndex& l = f_sp.at(lam);
        BasicJet<T> prod = pw[0][static_cast<size_t>(l[0])];
        for (int i = 1; i < d; ++i)
            prod = multiply(prod, pw[static_cast<size_t>(i)][static_cast<size_t>(l[i])]);
        out = jet_add(out, jet_scale(prod, fc));
    }
    return out;
}

} // namespace mildatlas
