#include "jet.hpp"

#include <mutex>
#include <unordered_map>

namespace mildatlas {

namespace detail {

FaaTable::FaaTable(int f_arity, int g_arity, int ord)
    : f_space_(IndexSpace::get(f_arity, ord)), g_space_(IndexSpace::get(g_arity, ord)) {
    table_.resize(static_cast<size_t>(g_space_->size()));
    for (int nu = 0; nu < g_space_->size(); ++nu) {
        auto& row = table_[static_cast<size_t>(nu)];
        row.resize(static_cast<size_t>(f_space_->size()));
        const int n = g_space_->order_of(nu);
        if (n == 0) continue;
        for (int lam = 1; lam < f_space_->size(); ++lam) {
            if (f_space_->order_of(lam) > n) continue;
            const MultiIndex& nu_mi = g_space_->at(nu);
            const MultiIndex& lam_mi = f_space_->at(lam);
            auto parts = faa_partitions(nu_mi, lam_mi);
            auto& cell = row[static_cast<size_t>(lam)];
            cell.reserve(parts.size());
            for (const auto& p : parts) {
                FaaTerm term;
                term.weight = lam_mi.factorial();
                for (const auto& k : p.ks) term.weight /= k.factorial();
                term.weight_d = static_cast<double>(term.weight);
                for (int j = 0; j < p.s; ++j) {
                    const int l_rank = g_space_->rank(p.ls[static_cast<size_t>(j)]);
                    const MultiIndex& k = p.ks[static_cast<size_t>(j)];
                    for (int i = 0; i < k.dim(); ++i) {
                        if (k[i] > 0) term.factors.push_back({i, l_rank, k[i]});
                    }
                }
                cell.push_back(std::move(term));
            }
        }
    }
}

std::shared_ptr<const FaaTable> FaaTable::get(int f_arity, int g_arity, int ord) {
    static std::mutex mu;
    static std::unordered_map<int64_t, std::shared_ptr<const FaaTable>> cache;
    const int64_t key = (static_cast<int64_t>(f_arity) * 100 + g_arity) * 100 + ord;
    std::lock_guard<std::mutex> lock(mu);
    auto it = cache.find(key);
    if (it != cache.end()) return it->second;
    auto sp = std::shared_ptr<const FaaTable>(new FaaTable(f_arity, g_arity, ord));
    cache[key] = sp;
    return sp;
}

} // namespace detail

double rational_to_double(const Rational& q) { return static_cast<double>(q); }

Jet monomial_jet(const std::vector<double>& mu, const std::vector<double>& x, int ord) {
    const int d = static_cast<int>(mu.size());
    if (d < 1) fail_input("monomial_jet needs arity >= 1");
    if (x.size() != mu.size()) fail_input("monomial_jet: point arity mismatch");
    for (double xi : x)
        if (!(xi > 0.0)) fail_input("monomial_jet: point must be strictly positive");

    Jet j = jet_const<double>(d, ord, x, 0.0);
    const IndexSpace& sp = *j.space;
    // Generalized binomial coefficients C(mu_i, k) for k <= ord.
    std::vector<std::vector<double>> binom(static_cast<size_t>(d));
    for (int i = 0; i < d; ++i) {
        auto& col = binom[static_cast<size_t>(i)];
        col.resize(static_cast<size_t>(ord + 1));
        col[0] = 1.0;
        for (int k = 1; k <= ord; ++k)
            col[static_cast<size_t>(k)] =
                col[static_cast<size_t>(k - 1)] * (mu[static_cast<size_t>(i)] - (k - 1)) / k;
    }
    for (int r = 0; r < sp.size(); ++r) {
        const MultiIndex& nu = sp.at(r);
        double v = 1.0;
        for (int i = 0; i < d; ++i) {
            const double b = binom[static_cast<size_t>(i)][static_cast<size_t>(nu[i])];
            if (b == 0.0) {
                v = 0.0;
                break;
            }
            v *= b * std::pow(x[static_cast<size_t>(i)], mu[static_cast<size_t>(i)] - nu[i]);
        }
        j.c[static_cast<size_t>(r)] = v;
    }
    return j;
}

double cr_norm(const Jet& j) {
    const IndexSpace& sp = *j.space;
    double best = 0.0;
    for (int r = 0; r < sp.size(); ++r) {
        const double v = std::fabs(j.c[static_cast<size_t>(r)]) * sp.factorial_d(r) /
                         sp.order_factorial_d(r);
        best = std::max(best, v);
    }
    return best;
}

namespace {

// Outer series of the partial primitives, as normalized coefficients around
// the inner value u0.
std::vector<double> recip_series(double u0, int ord) {
    if (u0 == 0.0) fail_input("division by zero in jet evaluation");
    std::vector<double> c(static_cast<size_t>(ord + 1));
    double v = 1.0 / u0;
    for (int k = 0; k <= ord; ++k) {
        c[static_cast<size_t>(k)] = v;
        v *= -1.0 / u0;
    }
    return c;
}

std::vector<double> exp_series(double u0, int ord) {
    std::vector<double> c(static_cast<size_t>(ord + 1));
    const double e = std::exp(u0);
    double f = 1.0;
    for (int k = 0; k <= ord; ++k) {
        if (k > 0) f *= k;
        c[static_cast<size_t>(k)] = e / f;
    }
    return c;
}

std::vector<double> log1p_series(double u0, int ord) {
    if (u0 <= -1.0) fail_input("log1p of a value <= -1 in jet evaluation");
    std::vector<double> c(static_cast<size_t>(ord + 1));
    c[0] = std::log1p(u0);
    for (int k = 1; k <= ord; ++k)
        c[static_cast<size_t>(k)] =
            ((k % 2 == 1) ? 1.0 : -1.0) / (k * std::pow(1.0 + u0, k));
    return c;
}

std::vector<double> log_series(double u0, int ord) {
    if (u0 <= 0.0) fail_input("log of a non-positive value in jet evaluation");
    std::vector<double> c(static_cast<size_t>(ord + 1));
    c[0] = std::log(u0);
    for (int k = 1; k <= ord; ++k)
        c[static_cast<size_t>(k)] = ((k % 2 == 1) ? 1.0 : -1.0) / (k * std::pow(u0, k));
    return c;
}

void check_declared(const Expr& e, double u) {
    if (e->dom && !e->dom->contains(u))
        fail_input("argument outside declared definedness box in jet evaluation");
}

} // namespace

Jet eval_jet(const Expr& e, const std::vector<double>& x, int ord) {
    if (!e) fail_internal("null expression");
    const int d = static_cast<int>(x.size());
    switch (e->kind) {
    case ExprKind::Const: return jet_const<double>(d, ord, x, e->value);
    case ExprKind::Var:
        if (e->var >= d) fail_input("evaluation point has too few coordinates");
        return jet_var<double>(d, ord, x, e->var);
    case ExprKind::Add: return jet_add(eval_jet(e->args[0], x, ord), eval_jet(e->args[1], x, ord));
    case ExprKind::Sub: return jet_sub(eval_jet(e->args[0], x, ord), eval_jet(e->args[1], x, ord));
    case ExprKind::Neg: return jet_neg(eval_jet(e->args[0], x, ord));
    case ExprKind::Mul: return multiply(eval_jet(e->args[0], x, ord), eval_jet(e->args[1], x, ord));
    case ExprKind::Recip: {
        Jet u = eval_jet(e->args[0], x, ord);
        check_declared(e, u.value());
        return compose_univariate(recip_series(u.value(), ord), u);
    }
    case ExprKind::Exp: {
        Jet u = eval_jet(e->args[0], x, ord);
        return compose_univariate(exp_series(u.value(), ord), u);
    }
    case ExprKind::Log1p: {
        Jet u = eval_jet(e->args[0], x, ord);
        check_declared(e, u.value());
        return compose_univariate(log1p_series(u.value(), ord), u);
    }
    case ExprKind::Pow: {
        // u^mu as exp(mu * log u); u must be certified positive.
        Jet u = eval_jet(e->args[0], x, ord);
        if (!(u.value() > 0.0)) fail_input("real power of a non-positive base in jet evaluation");
        check_declared(e, u.value());
        Jet lg = compose_univariate(log_series(u.value(), ord), u);
        Jet mlg = jet_scale(lg, e->exponent);
        return compose_univariate(exp_series(mlg.value(), ord), mlg);
    }
    case ExprKind::Compose: {
        std::vector<Jet> inner;
        inner.reserve(e->args.size() - 1);
        std::vector<double> values;
        for (size_t i = 1; i < e->args.size(); ++i) {
            inner.push_back(eval_jet(e->args[i], x, ord));
            values.push_back(inner.back().value());
        }
        Jet outer = eval_jet(e->args[0], values, ord);
        return compose_faa(outer, inner);
    }
    }
    fail_internal("unhandled expression kind");
}

RatJet eval_jet_rational(const Expr& e, const std::vector<Rational>& x, int ord) {
    if (!e) fail_internal("null expression");
    const int d = static_cast<int>(x.size());
    switch (e->kind) {
    case ExprKind::Const: {
        // Doubles convert exactly to rationals.
        return jet_const<Rational>(d, ord, x, Rational(e->value));
    }
    case ExprKind::Var:
        if (e->var >= d) fail_input("evaluation point has too few coordinates");
        return jet_var<Rational>(d, ord, x, e->var);
    case ExprKind::Add:
        return jet_add(eval_jet_rational(e->args[0], x, ord), eval_jet_rational(e->args[1], x, ord));
    case ExprKind::Sub:
        return jet_sub(eval_jet_rational(e->args[0], x, ord), eval_jet_rational(e->args[1], x, ord));
    case ExprKind::Neg: return jet_neg(eval_jet_rational(e->args[0], x, ord));
    case ExprKind::Mul:
        return multiply(eval_jet_rational(e->args[0], x, ord), eval_jet_rational(e->args[1], x, ord));
    case ExprKind::Compose: {
        std::vector<RatJet> inner;
        std::vector<Rational> values;
        for (size_t i = 1; i < e->args.size(); ++i) {
            inner.push_back(eval_jet_rational(e->args[i], x, ord));
            values.push_back(inner.back().value());
        }
        RatJet outer = eval_jet_rational(e->args[0], values, ord);
        return compose_faa(outer, inner);
    }
    default:
        fail_input("rational jet evaluation supports polynomial expressions only");
    }
}

} // namespace mildatlas
