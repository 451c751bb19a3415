#include "family.hpp"
#include <functional>

#include <algorithm>
#include <cmath>
#include <sstream>

#include <json.hpp>

#include "digest.hpp"
#include "sampling.hpp"

namespace mildatlas {

using OJson = nlohmann::ordered_json;

// --- evaluation ---------------------------------------------------------------

double term_value(const PreparedTerm& term, const std::vector<double>& t,
                  const std::vector<double>& x) {
    double v = eval_value(term.a, t);
    for (size_t i = 0; i < term.mu.size(); ++i) {
        const double mu = term.mu[i].v;
        if (mu == 0.0) continue;
        if (!(x[i] > 0.0)) fail_input("monomial evaluated at a non-positive coordinate");
        v *= std::pow(x[i], mu);
    }
    return v;
}

double prepared_value(const PreparedFunction& pf, const std::vector<double>& t,
                      const std::vector<double>& x) {
    std::vector<double> b(pf.terms.size());
    for (size_t i = 0; i < pf.terms.size(); ++i) b[i] = term_value(pf.terms[i], t, x);
    return b[static_cast<size_t>(pf.j)] * eval_value(pf.unit, b);
}

double wall_value(const WallSpec& w, const std::vector<double>& t,
                  const std::vector<double>& x_prefix) {
    switch (w.kind) {
    case WallKind::Constant: return w.constant;
    case WallKind::Param: return eval_value(w.param, t);
    case WallKind::Prepared: return prepared_value(w.prepared, t, x_prefix);
    }
    fail_internal("unhandled wall kind");
}

EvalResult evaluate(const Family& fam, const std::vector<double>& t,
                    const std::vector<double>& x, double boundary_margin) {
    if (static_cast<int>(t.size()) != fam.k) fail_input("parameter arity mismatch");
    for (int i = 0; i < fam.k; ++i)
        if (!fam.T[i].contains(t[static_cast<size_t>(i)]))
            fail_input("parameter outside the family box");
    if (static_cast<int>(x.size()) != fam.m) fail_input("cell arity mismatch");

    EvalResult res;
    res.member = true;
    std::vector<double> prefix;
    for (int i = 0; i < fam.m; ++i) {
        const double lo = wall_value(fam.cell.lower[static_cast<size_t>(i)], t, prefix);
        const double hi = wall_value(fam.cell.upper[static_cast<size_t>(i)], t, prefix);
        const double xi = x[static_cast<size_t>(i)];
        if (!(xi > lo + boundary_margin && xi < hi - boundary_margin)) res.member = false;
        prefix.push_back(xi);
    }
    for (const auto& comp : fam.components) res.values.push_back(prepared_value(comp, t, x));
    return res;
}

// --- interval ranges ----------------------------------------------------------

Interval monomial_range(const std::vector<ExponentVal>& mu, const Box& hull) {
    if (hull.arity() < static_cast<int>(mu.size())) fail_input("hull arity mismatch");
    Interval r(1.0, 1.0);
    for (size_t i = 0; i < mu.size(); ++i) {
        const double m = mu[i].v;
        if (m == 0.0) continue;
        const Interval& h = hull[static_cast<int>(i)];
        if (h.lo < 0.0) fail_input("cell hull has a negative coordinate");
        Interval p;
        if (h.lo > 0.0) {
            p = ipow(h, m);
        } else if (m > 0.0) {
            p = Interval(0.0, std::pow(h.hi, m));
        } else {
            fail_input("monomial with a negative exponent is unbounded on a hull touching 0");
        }
        r = imul(r, p);
    }
    return r;
}

Interval term_range(const PreparedTerm& term, const Box& t_box, const Box& hull) {
    return imul(range_bounds(term.a, t_box), monomial_range(term.mu, hull));
}

Interval prepared_range(const PreparedFunction& pf, const Box& t_box, const Box& hull) {
    std::vector<Interval> b;
    b.reserve(pf.terms.size());
    for (const auto& term : pf.terms) b.push_back(term_range(term, t_box, hull));
    Box brange(std::move(b));
    const Interval unit = range_bounds(pf.unit, brange);
    return imul(brange[pf.j], unit);
}

Interval wall_range(const WallSpec& w, const Box& t_box, const Box& hull_prefix) {
    switch (w.kind) {
    case WallKind::Constant: return Interval::point(w.constant);
    case WallKind::Param: return range_bounds(w.param, t_box);
    case WallKind::Prepared: return prepared_range(w.prepared, t_box, hull_prefix);
    }
    fail_internal("unhandled wall kind");
}

Box cell_hull(const Family& fam, const Box& t_box) {
    Box hull;
    for (int i = 0; i < fam.m; ++i) {
        const Interval lo = wall_range(fam.cell.lower[static_cast<size_t>(i)], t_box, hull);
        const Interval hi = wall_range(fam.cell.upper[static_cast<size_t>(i)], t_box, hull);
        const double a = std::max(0.0, lo.lo);
        const double b = std::min(1.0, hi.hi);
        if (!(a <= b))
            fail_input("cell hull is empty for x" + std::to_string(i + 1));
        hull.dims.push_back(Interval(a, b));
    }
    return hull;
}

std::vector<std::vector<double>> sample_cell(const Family& fam, const std::vector<double>& t,
                                             int count, double margin, uint64_t seed) {
    std::vector<std::vector<double>> out;
    out.reserve(static_cast<size_t>(count));
    for (int s = 0; s < count; ++s) {
        const std::vector<double> u = halton_point(seed + static_cast<uint64_t>(s), std::max(1, fam.m));
        std::vector<double> x;
        for (int i = 0; i < fam.m; ++i) {
            const double lo = wall_value(fam.cell.lower[static_cast<size_t>(i)], t, x);
            const double hi = wall_value(fam.cell.upper[static_cast<size_t>(i)], t, x);
            if (!(hi > lo)) fail_input("cell is empty at the sampled parameter");
            const double ui = margin + (1.0 - 2.0 * margin) * u[static_cast<size_t>(i)];
            x.push_back(lo + ui * (hi - lo));
        }
        out.push_back(std::move(x));
    }
    return out;
}

// --- parameter-box sweeps -----------------------------------------------------

namespace {

// Visit leaves of a bisection tree of the parameter box, handing each leaf its
// own cell hull. Depth counts total splits across all coordinates.
template <typename Fn>
void for_t_leaves(const Family& fam, const Box& t_box, int depth, Fn&& fn) {
    if (t_box.arity() == 0 || depth <= 0) {
        fn(t_box, cell_hull(fam, t_box));
        return;
    }
    int widest = 0;
    for (int i = 1; i < t_box.arity(); ++i)
        if (t_box[i].width() > t_box[widest].width()) widest = i;
    if (t_box[widest].width() < 1e-13) {
        fn(t_box, cell_hull(fam, t_box));
        return;
    }
    Box lo = t_box, hi = t_box;
    const double mid = t_box[widest].mid();
    lo[widest] = Interval(t_box[widest].lo, mid);
    hi[widest] = Interval(mid, t_box[widest].hi);
    for_t_leaves(fam, lo, depth - 1, fn);
    for_t_leaves(fam, hi, depth - 1, fn);
}

struct DerivBound {
    bool bounded = true;
    double bound = 0.0;
};

// Certified uniform bound for |d(a(t) x^mu)/dx_dir| over the cell, maxing the
// per-leaf interval bounds. Host arity may be smaller than m (walls).
DerivBound term_derivative_bound(const Family& fam, const Box& t_box, int depth,
                                 const PreparedTerm& term, int dir) {
    const double mu_dir = term.mu[static_cast<size_t>(dir)].v;
    if (mu_dir == 0.0) return {true, 0.0};
    std::vector<ExponentVal> dmu = term.mu;
    dmu[static_cast<size_t>(dir)].v -= 1.0;
    dmu[static_cast<size_t>(dir)].exact.reset();
    DerivBound out;
    try {
        for_t_leaves(fam, t_box, depth, [&](const Box& leaf, const Box& hull) {
            Box host_hull;
            for (size_t i = 0; i < term.mu.size(); ++i) host_hull.dims.push_back(hull[static_cast<int>(i)]);
            const double sup = std::fabs(mu_dir) *
                               imul(range_bounds(term.a, leaf), monomial_range(dmu, host_hull)).mag();
            out.bound = std::max(out.bound, sup);
        });
    } catch (const Error&) {
        out.bounded = false;
        out.bound = std::numeric_limits<double>::infinity();
    }
    return out;
}

} // namespace

C1Result check_c1_bounded(const Family& fam, const Box& t_box, int t_depth) {
    C1Result res;
    struct Target {
        std::string where;
        const std::vector<PreparedTerm>* terms;
    };
    std::vector<Target> targets;
    for (size_t c = 0; c < fam.components.size(); ++c)
        targets.push_back({"component " + std::to_string(c + 1), &fam.components[c].terms});
    for (int i = 0; i < fam.m; ++i) {
        if (fam.cell.lower[static_cast<size_t>(i)].kind == WallKind::Prepared)
            targets.push_back({"lower wall of x" + std::to_string(i + 1),
                               &fam.cell.lower[static_cast<size_t>(i)].prepared.terms});
        if (fam.cell.upper[static_cast<size_t>(i)].kind == WallKind::Prepared)
            targets.push_back({"upper wall of x" + std::to_string(i + 1),
                               &fam.cell.upper[static_cast<size_t>(i)].prepared.terms});
    }
    for (const auto& target : targets) {
        for (size_t ti = 0; ti < target.terms->size(); ++ti) {
            const PreparedTerm& term = (*target.terms)[ti];
            for (size_t dir = 0; dir < term.mu.size(); ++dir) {
                const DerivBound db =
                    term_derivative_bound(fam, t_box, t_depth, term, static_cast<int>(dir));
                if (!db.bounded) {
                    res.ok = false;
                    res.failure = target.where + ": term " + std::to_string(ti + 1) +
                                  " has an unbounded first derivative in x" +
                                  std::to_string(dir + 1);
                    // witness: the steepest sampled derivative value
                    const std::vector<double> tmid = t_box.midpoint();
                    double worst = 0.0;
                    std::vector<double> wx;
                    for (const auto& x : sample_cell(fam, tmid, 200, 1e-6)) {
                        std::vector<double> xp(x.begin(), x.begin() + static_cast<long>(term.mu.size()));
                        double v = std::fabs(term.mu[dir].v) * std::fabs(eval_value(term.a, tmid));
                        for (size_t q = 0; q < term.mu.size(); ++q) {
                            const double e = term.mu[q].v - (q == dir ? 1.0 : 0.0);
                            if (e != 0.0) v *= std::pow(xp[q], e);
                        }
                        if (v > worst) {
                            worst = v;
                            wx = x;
                        }
                    }
                    res.witness_t = tmid;
                    res.witness_x = wx;
                    res.witness_value = worst;
                    return res;
                }
                res.entries.push_back(C1Entry{target.where, static_cast<int>(ti),
                                              static_cast<int>(dir), db.bound});
                res.max_bound = std::max(res.max_bound, db.bound);
            }
        }
    }
    return res;
}

C1Result check_c1_bounded(const Family& fam, int t_depth) {
    return check_c1_bounded(fam, fam.T, t_depth);
}

WallDiagnostics wall_prepared_check(const Family& fam) {
    WallDiagnostics diag;
    for (int i = 0; i < fam.m; ++i) {
        for (int side = 0; side < 2; ++side) {
            const WallSpec& w = side == 0 ? fam.cell.lower[static_cast<size_t>(i)]
                                          : fam.cell.upper[static_cast<size_t>(i)];
            const std::string name = std::string(side == 0 ? "lower" : "upper") + " wall of x" +
                                     std::to_string(i + 1);
            switch (w.kind) {
            case WallKind::Constant:
                diag.notes.push_back(name + ": constant " + format_double(w.constant));
                break;
            case WallKind::Param:
                diag.notes.push_back(name + ": parameter-only");
                break;
            case WallKind::Prepared: {
                diag.notes.push_back(name + ": prepared, " +
                                     std::to_string(w.prepared.terms.size()) + " term(s)");
                if (i == 0) {
                    diag.ok = false;
                    diag.violations.push_back(name + ": walls of x1 cannot depend on x");
                    break;
                }
                for (const auto& term : w.prepared.terms) {
                    if (static_cast<int>(term.mu.size()) != i) {
                        diag.ok = false;
                        diag.violations.push_back(name + ": term exponent arity " +
                                                  std::to_string(term.mu.size()) + ", expected " +
                                                  std::to_string(i));
                    }
                }
                // boundedness of the wall's monomial map
                for (size_t ti = 0; ti < w.prepared.terms.size(); ++ti) {
                    const PreparedTerm& term = w.prepared.terms[ti];
                    for (size_t dir = 0; dir < term.mu.size(); ++dir) {
                        const DerivBound db =
                            term_derivative_bound(fam, fam.T, 6, term, static_cast<int>(dir));
                        if (!db.bounded) {
                            diag.ok = false;
                            diag.violations.push_back(
                                name + ": term " + std::to_string(ti + 1) +
                                " has an unbounded first derivative in x" + std::to_string(dir + 1));
                        }
                    }
                }
                break;
            }
            }
        }
    }
    return diag;
}

// --- JSON ----------------------------------------------------------------------

namespace {

std::map<std::string, int> param_names(int k) {
    std::map<std::string, int> v;
    for (int i = 0; i < k; ++i) v["t" + std::to_string(i + 1)] = i;
    return v;
}

std::map<std::string, int> range_names(int N) {
    std::map<std::string, int> v;
    for (int i = 0; i < N; ++i) v["b" + std::to_string(i + 1)] = i;
    return v;
}

std::vector<std::string> name_list(const std::string& stem, int count) {
    std::vector<std::string> v;
    for (int i = 0; i < count; ++i) v.push_back(stem + std::to_string(i + 1));
    return v;
}

ExponentVal parse_exponent_value(const OJson& v, std::vector<std::string>& errors,
                                 const std::string& where) {
    ExponentVal e;
    if (v.is_number()) {
        e.v = v.get<double>();
        e.exact = Rational(e.v);
        return e;
    }
    if (v.is_string()) {
        const std::string s = v.get<std::string>();
        const auto slash = s.find('/');
        try {
            if (slash == std::string::npos) {
                e.v = std::stod(s);
                e.exact = Rational(e.v);
            } else {
                const long long num = std::stoll(s.substr(0, slash));
                const long long den = std::stoll(s.substr(slash + 1));
                if (den == 0) throw std::invalid_argument("zero denominator");
                e.exact = Rational(num, den);
                e.v = static_cast<double>(num) / static_cast<double>(den);
            }
            return e;
        } catch (const std::exception&) {
            errors.push_back(where + ": malformed exponent '" + s + "'");
            return e;
        }
    }
    errors.push_back(where + ": exponent must be a number or a p/q string");
    return e;
}

PreparedFunction parse_prepared(const OJson& obj, int k, int x_arity,
                                std::vector<std::string>& errors, const std::string& where) {
    PreparedFunction pf;
    if (!obj.is_object() || !obj.contains("terms") || !obj.contains("unit") ||
        !obj.contains("j")) {
        errors.push_back(where + ": expected an object with terms, unit and j");
        return pf;
    }
    const auto tvars = param_names(k);
    for (const auto& t : obj["terms"]) {
        PreparedTerm term;
        if (!t.is_object() || !t.contains("a") || !t.contains("mu")) {
            errors.push_back(where + ": each term needs fields a and mu");
            continue;
        }
        try {
            term.a = parse_expr(t["a"].get<std::string>(), tvars);
        } catch (const Error& e) {
            errors.push_back(where + ": coefficient: " + e.what());
            term.a = ex_const(0.0);
        }
        for (const auto& muv : t["mu"])
            term.mu.push_back(parse_exponent_value(muv, errors, where));
        if (static_cast<int>(term.mu.size()) != x_arity)
            errors.push_back(where + ": exponent vector has length " +
                             std::to_string(term.mu.size()) + ", expected " +
                             std::to_string(x_arity));
        pf.terms.push_back(std::move(term));
    }
    if (pf.terms.empty()) {
        errors.push_back(where + ": needs at least one term");
        return pf;
    }
    try {
        pf.unit = parse_expr(obj["unit"].get<std::string>(),
                             range_names(static_cast<int>(pf.terms.size())));
    } catch (const Error& e) {
        errors.push_back(where + ": unit: " + e.what());
        pf.unit = ex_const(1.0);
    }
    const int j = obj["j"].is_number_integer() ? obj["j"].get<int>() : -1;
    if (j < 1 || j > static_cast<int>(pf.terms.size()))
        errors.push_back(where + ": distinguished index j out of range");
    else
        pf.j = j - 1;
    return pf;
}

OJson exponent_to_json(const ExponentVal& e) {
    if (e.exact) {
        const Rational& q = *e.exact;
        if (boost::multiprecision::denominator(q) == 1) {
            const double iv = static_cast<double>(boost::multiprecision::numerator(q));
            return OJson(iv);
        }
        std::ostringstream os;
        os << boost::multiprecision::numerator(q) << '/' << boost::multiprecision::denominator(q);
        const std::string s = os.str();
        // prefer the compact numeric form when it is exact
        if (Rational(e.v) == q) return OJson(e.v);
        return OJson(s);
    }
    return OJson(e.v);
}

OJson prepared_to_json(const PreparedFunction& pf, int k) {
    OJson obj;
    OJson terms = OJson::array();
    for (const auto& term : pf.terms) {
        OJson t;
        t["a"] = print_expr(term.a, name_list("t", k));
        OJson mu = OJson::array();
        for (const auto& e : term.mu) mu.push_back(exponent_to_json(e));
        t["mu"] = mu;
        terms.push_back(t);
    }
    obj["terms"] = terms;
    obj["unit"] = print_expr(pf.unit, name_list("b", static_cast<int>(pf.terms.size())));
    obj["j"] = pf.j + 1;
    return obj;
}

std::string terms_signature(const std::vector<PreparedTerm>& terms, int k) {
    std::ostringstream os;
    for (const auto& t : terms) {
        os << print_expr(t.a, name_list("t", k)) << '|';
        for (const auto& e : t.mu) os << format_double(e.v) << ',';
        os << ';';
    }
    return os.str();
}

void validate_numeric(const Family& fam, std::vector<std::string>& errors) {
    // hull, wall ranges and ordering
    Box hull;
    try {
        hull = cell_hull(fam, fam.T);
    } catch (const Error& e) {
        errors.push_back(std::string("cell hull: ") + e.what());
        return;
    }
    // walls map into [0, 1]
    {
        Box prefix;
        for (int i = 0; i < fam.m; ++i) {
            for (int side = 0; side < 2; ++side) {
                const WallSpec& w = side == 0 ? fam.cell.lower[static_cast<size_t>(i)]
                                              : fam.cell.upper[static_cast<size_t>(i)];
                try {
                    const Interval r = wall_range(w, fam.T, prefix);
                    if (r.lo < -1e-9 || r.hi > 1.0 + 1e-9)
                        errors.push_back("wall of x" + std::to_string(i + 1) +
                                         " leaves [0,1]: range " + r.to_string());
                } catch (const Error& e) {
                    errors.push_back("wall of x" + std::to_string(i + 1) + ": " + e.what());
                }
            }
            prefix.dims.push_back(hull[i]);
        }
    }
    // interval wall ordering, adaptively bisecting (t, x_prefix) jointly
    try {
        for (int i = 0; i < fam.m; ++i) {
            Box joint = fam.T;
            for (int h = 0; h < i; ++h) joint.dims.push_back(hull[h]);
            const WallSpec& lo_w = fam.cell.lower[static_cast<size_t>(i)];
            const WallSpec& hi_w = fam.cell.upper[static_cast<size_t>(i)];
            // adaptive: only failing leaves are split further
            std::function<bool(const Box&, int)> gap_positive = [&](const Box& b, int depth) {
                Box tb, pb;
                for (int h = 0; h < fam.k; ++h) tb.dims.push_back(b[h]);
                for (int h = fam.k; h < b.arity(); ++h) pb.dims.push_back(b[h]);
                const Interval gap = isub(wall_range(hi_w, tb, pb), wall_range(lo_w, tb, pb));
                if (gap.lo > 0.0) return true;
                if (depth <= 0 || b.arity() == 0) return false;
                int widest = 0;
                for (int h = 1; h < b.arity(); ++h)
                    if (b[h].width() > b[widest].width()) widest = h;
                if (b[widest].width() < 1e-13) return false;
                Box left = b, right = b;
                const double mid = b[widest].mid();
                left[widest] = Interval(b[widest].lo, mid);
                right[widest] = Interval(mid, b[widest].hi);
                return gap_positive(left, depth - 1) && gap_positive(right, depth - 1);
            };
            if (!gap_positive(joint, 12))
                errors.push_back("wall ordering alpha < beta could not be certified for x" +
                                 std::to_string(i + 1));
        }
    } catch (const Error& e) {
        errors.push_back(std::string("wall ordering check: ") + e.what());
    }
    // term boundedness and unit non-vanishing per component
    for (size_t c = 0; c < fam.components.size(); ++c) {
        const auto& comp = fam.components[c];
        std::vector<Interval> branges;
        bool terms_ok = true;
        for (size_t i = 0; i < comp.terms.size(); ++i) {
            try {
                branges.push_back(term_range(comp.terms[i], fam.T, hull));
            } catch (const Error& e) {
                errors.push_back("component " + std::to_string(c + 1) + ", term " +
                                 std::to_string(i + 1) + ": " + e.what());
                terms_ok = false;
            }
        }
        if (!terms_ok) continue;
        try {
            certify_unit(comp.unit, Box(branges));
        } catch (const Error& e) {
            errors.push_back("component " + std::to_string(c + 1) +
                             ": unit not certified non-vanishing: " + e.what());
        }
    }
    // prepared walls: unit non-vanishing
    {
        Box prefix;
        for (int i = 0; i < fam.m; ++i) {
            for (int side = 0; side < 2; ++side) {
                const WallSpec& w = side == 0 ? fam.cell.lower[static_cast<size_t>(i)]
                                              : fam.cell.upper[static_cast<size_t>(i)];
                if (w.kind == WallKind::Prepared) {
                    std::vector<Interval> branges;
                    bool ok = true;
                    for (const auto& term : w.prepared.terms) {
                        try {
                            branges.push_back(term_range(term, fam.T, prefix));
                        } catch (const Error& e) {
                            errors.push_back("wall of x" + std::to_string(i + 1) + ": " +
                                             e.what());
                            ok = false;
                        }
                    }
                    if (ok) {
                        try {
                            certify_unit(w.prepared.unit, Box(branges));
                        } catch (const Error& e) {
                            errors.push_back("wall of x" + std::to_string(i + 1) +
                                             ": unit not certified non-vanishing: " + e.what());
                        }
                    }
                }
            }
            prefix.dims.push_back(hull[i]);
        }
    }
    if (!errors.empty()) return;
    // sampled checks: strict ordering and |f| <= 1
    const int t_samples = fam.k == 0 ? 1 : 40;
    for (int ts = 0; ts < t_samples; ++ts) {
        std::vector<double> t(static_cast<size_t>(fam.k));
        const auto u = halton_point(static_cast<uint64_t>(ts), std::max(1, fam.k));
        for (int i = 0; i < fam.k; ++i)
            t[static_cast<size_t>(i)] =
                fam.T[i].lo + (0.02 + 0.96 * u[static_cast<size_t>(i)]) * fam.T[i].width();
        std::vector<std::vector<double>> xs;
        try {
            xs = sample_cell(fam, t, 25, 1e-4, static_cast<uint64_t>(ts) * 1000);
        } catch (const Error& e) {
            errors.push_back(std::string("wall ordering violated on samples: ") + e.what());
            return;
        }
        for (const auto& x : xs) {
            for (size_t c = 0; c < fam.components.size(); ++c) {
                const double v = prepared_value(fam.components[c], t, x);
                if (!(std::fabs(v) <= 1.0 + 1e-9)) {
                    errors.push_back("component " + std::to_string(c + 1) +
                                     " exceeds 1 in absolute value at a sample (" +
                                     format_double(v) + ")");
                    return;
                }
            }
        }
    }
}

} // namespace

namespace {
Family parse_family_impl(const OJson& doc, const std::string& json_text);
}

Family parse_family(const std::string& json_text) {
    OJson doc;
    try {
        doc = OJson::parse(json_text);
    } catch (const std::exception& e) {
        fail_input(std::string("family document is not valid JSON: ") + e.what());
    }
    try {
        return parse_family_impl(doc, json_text);
    } catch (const Error&) {
        throw;
    } catch (const std::exception& e) {
        fail_input(std::string("malformed family document: ") + e.what());
    }
}

namespace {
Family parse_family_impl(const OJson& doc, const std::string& json_text) {
    std::vector<std::string> errors;
    Family fam;
    fam.digest = fnv1a_digest(json_text);

    for (const char* key : {"k", "m", "n", "T", "cell", "components"})
        if (!doc.contains(key)) errors.push_back(std::string("missing field '") + key + "'");
    if (!errors.empty()) fail_input("invalid family document:\n  " + errors[0]);

    fam.k = doc["k"].get<int>();
    fam.m = doc["m"].get<int>();
    fam.n = doc["n"].get<int>();
    if (fam.k < 0) errors.push_back("k must be >= 0");
    if (fam.m < 0) errors.push_back("m must be >= 0");
    if (fam.n < fam.m) errors.push_back("n must be >= m");

    if (static_cast<int>(doc["T"].size()) != fam.k)
        errors.push_back("T must list exactly k coordinate ranges");
    else
        for (const auto& pair : doc["T"]) {
            if (!pair.is_array() || pair.size() != 2) {
                errors.push_back("each T entry must be a [lo, hi] pair");
                break;
            }
            const double lo = pair[0].get<double>(), hi = pair[1].get<double>();
            if (!(lo <= hi))
                errors.push_back("empty parameter range in T");
            else
                fam.T.dims.push_back(Interval(lo, hi));
        }

    // walls
    fam.cell.m = fam.m;
    fam.cell.lower.resize(static_cast<size_t>(fam.m));
    fam.cell.upper.resize(static_cast<size_t>(fam.m));
    std::vector<bool> have_lower(static_cast<size_t>(fam.m), false);
    std::vector<bool> have_upper(static_cast<size_t>(fam.m), false);
    const auto tvars = param_names(fam.k);
    if (!doc["cell"].is_object() || !doc["cell"].contains("walls")) {
        errors.push_back("cell must contain a walls array");
    } else {
        for (const auto& wj : doc["cell"]["walls"]) {
            if (!wj.is_object() || !wj.contains("which") || !wj.contains("var") ||
                !wj.contains("kind") || !wj.contains("payload")) {
                errors.push_back("each wall needs which, var, kind and payload");
                continue;
            }
            const std::string which = wj["which"].get<std::string>();
            const int var = wj["var"].get<int>();
            if (var < 1 || var > fam.m) {
                errors.push_back("wall variable index " + std::to_string(var) + " out of range");
                continue;
            }
            const std::string where = which + " wall of x" + std::to_string(var);
            WallSpec w;
            const std::string kind = wj["kind"].get<std::string>();
            if (kind == "const") {
                w.kind = WallKind::Constant;
                if (!wj["payload"].is_number()) {
                    errors.push_back(where + ": const payload must be a number");
                    continue;
                }
                w.constant = wj["payload"].get<double>();
            } else if (kind == "param") {
                w.kind = WallKind::Param;
                try {
                    w.param = parse_expr(wj["payload"].get<std::string>(), tvars);
                } catch (const Error& e) {
                    errors.push_back(where + ": " + e.what());
                    continue;
                }
            } else if (kind == "prepared") {
                w.kind = WallKind::Prepared;
                if (var == 1) {
                    errors.push_back(where + ": walls of x1 must be const or param");
                    continue;
                }
                w.prepared = parse_prepared(wj["payload"], fam.k, var - 1, errors, where);
            } else {
                errors.push_back(where + ": unknown wall kind '" + kind + "'");
                continue;
            }
            if (which == "alpha") {
                fam.cell.lower[static_cast<size_t>(var - 1)] = std::move(w);
                have_lower[static_cast<size_t>(var - 1)] = true;
            } else if (which == "beta") {
                fam.cell.upper[static_cast<size_t>(var - 1)] = std::move(w);
                have_upper[static_cast<size_t>(var - 1)] = true;
            } else {
                errors.push_back("wall 'which' must be alpha or beta");
            }
        }
        for (int i = 0; i < fam.m; ++i) {
            if (!have_lower[static_cast<size_t>(i)])
                errors.push_back("missing alpha wall for x" + std::to_string(i + 1));
            if (!have_upper[static_cast<size_t>(i)])
                errors.push_back("missing beta wall for x" + std::to_string(i + 1));
        }
    }

    // components
    if (static_cast<int>(doc["components"].size()) != fam.n - fam.m)
        errors.push_back("expected n - m = " + std::to_string(fam.n - fam.m) + " components, got " +
                         std::to_string(doc["components"].size()));
    int ci = 0;
    for (const auto& cj : doc["components"]) {
        ++ci;
        fam.components.push_back(
            parse_prepared(cj, fam.k, fam.m, errors, "component " + std::to_string(ci)));
    }
    // structural sharing of the monomial map
    if (fam.components.size() > 1) {
        const std::string sig0 = terms_signature(fam.components[0].terms, fam.k);
        for (size_t c = 1; c < fam.components.size(); ++c)
            if (terms_signature(fam.components[c].terms, fam.k) != sig0)
                errors.push_back("components must share one bounded monomial map "
                                 "(identical terms)");
    }

    if (errors.empty()) validate_numeric(fam, errors);

    if (!errors.empty()) {
        std::string msg = "invalid family document:";
        for (const auto& e : errors) msg += "\n  " + e;
        fail_input(msg);
    }
    fam.source = serialize_family(fam);
    return fam;
}
} // namespace

std::string serialize_family(const Family& fam) {
    OJson doc;
    doc["k"] = fam.k;
    doc["m"] = fam.m;
    doc["n"] = fam.n;
    OJson T = OJson::array();
    for (int i = 0; i < fam.k; ++i) T.push_back(OJson::array({fam.T[i].lo, fam.T[i].hi}));
    doc["T"] = T;
    OJson walls = OJson::array();
    for (int i = 0; i < fam.m; ++i) {
        for (int side = 0; side < 2; ++side) {
            const WallSpec& w = side == 0 ? fam.cell.lower[static_cast<size_t>(i)]
                                          : fam.cell.upper[static_cast<size_t>(i)];
            OJson wj;
            wj["which"] = side == 0 ? "alpha" : "beta";
            wj["var"] = i + 1;
            switch (w.kind) {
            case WallKind::Constant:
                wj["kind"] = "const";
                wj["payload"] = w.constant;
                break;
            case WallKind::Param:
                wj["kind"] = "param";
                wj["payload"] = print_expr(w.param, name_list("t", fam.k));
                break;
            case WallKind::Prepared:
                wj["kind"] = "prepared";
                wj["payload"] = prepared_to_json(w.prepared, fam.k);
                break;
            }
            walls.push_back(wj);
        }
    }
    doc["cell"] = OJson{{"walls", walls}};
    OJson comps = OJson::array();
    for (const auto& comp : fam.components) comps.push_back(prepared_to_json(comp, fam.k));
    doc["components"] = comps;
    return doc.dump(2);
}

} // namespace mildatlas
