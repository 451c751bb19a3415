#include "atlas.hpp"

#include <algorithm>
#include <cmath>

#include "json_io.hpp"
#include "multiindex.hpp"

namespace mildatlas {

namespace {

Box point_box(const std::vector<double>& t) {
    Box b;
    for (double v : t) b.dims.push_back(Interval::point(v));
    return b;
}

std::vector<double> mu_values(const PreparedTerm& term) {
    std::vector<double> mu;
    mu.reserve(term.mu.size());
    for (const auto& e : term.mu) mu.push_back(e.v);
    return mu;
}

// weak certificate of the identically-zero function
MildCert zero_weak(int arity) {
    return make_cert(1.0, 1e-300, 0.0, kOrderInf, true, arity, 0.0);
}

// Fixed-parameter view of a prepared function with all certificates.
struct FixedPrepared {
    NumPrepared num;
    std::vector<MildCert> term_certs;
    std::vector<std::vector<std::optional<MildCert>>> deriv_certs;
    std::vector<double> term_sups;
    std::vector<std::vector<double>> term_c1; // +inf when unbounded
    MildCert unit_cert;
    UnitBounds unit_bounds;
    bool unit_is_const = false;
    double unit_const = 1.0;
};

FixedPrepared fix_prepared(const PreparedFunction& pf, const std::vector<double>& t,
                           const Box& host_hull, const std::string& stage, Audit* audit) {
    FixedPrepared fx;
    const Box tb = point_box(t);
    const int host_arity = host_hull.arity();
    fx.num.j = pf.j;
    fx.num.unit = pf.unit;
    std::vector<Interval> branges;
    for (size_t i = 0; i < pf.terms.size(); ++i) {
        const PreparedTerm& term = pf.terms[i];
        NumTerm nt;
        nt.coeff = eval_value(term.a, t);
        nt.mu = mu_values(term);
        fx.num.terms.push_back(nt);

        Interval range;
        try {
            range = term_range(term, tb, host_hull);
        } catch (const Error& e) {
            fail_input(stage + ": term " + std::to_string(i + 1) + " unbounded: " + e.what());
        }
        branges.push_back(range);
        const double sup = range.mag();
        fx.term_sups.push_back(sup);
        fx.term_certs.push_back(sup > 0.0 ? monomial_weak(nt.mu, sup, audit)
                                          : zero_weak(std::max(1, host_arity)));

        std::vector<std::optional<MildCert>> dcerts;
        std::vector<double> c1row;
        for (int l = 0; l < host_arity; ++l) {
            if (nt.mu[static_cast<size_t>(l)] == 0.0) {
                dcerts.push_back(zero_weak(host_arity));
                c1row.push_back(0.0);
                continue;
            }
            std::vector<ExponentVal> dmu = term.mu;
            dmu[static_cast<size_t>(l)].v -= 1.0;
            dmu[static_cast<size_t>(l)].exact.reset();
            double bound = std::numeric_limits<double>::infinity();
            try {
                bound = std::fabs(nt.mu[static_cast<size_t>(l)]) * std::fabs(nt.coeff) *
                        monomial_range(dmu, host_hull).mag();
            } catch (const Error&) {
                // unbounded toward the boundary
            }
            c1row.push_back(bound);
            if (std::isfinite(bound)) {
                std::vector<double> dmuv = nt.mu;
                dmuv[static_cast<size_t>(l)] -= 1.0;
                dcerts.push_back(bound > 0.0 ? monomial_weak(dmuv, bound, audit)
                                             : zero_weak(host_arity));
            } else {
                dcerts.push_back(std::nullopt);
            }
        }
        fx.deriv_certs.push_back(std::move(dcerts));
        fx.term_c1.push_back(std::move(c1row));
    }
    if (pf.unit->kind == ExprKind::Const) {
        fx.unit_is_const = true;
        fx.unit_const = pf.unit->value;
        fx.num.unit_sign = fx.unit_const >= 0.0 ? 1.0 : -1.0;
        if (fx.unit_const == 0.0) fail_input(stage + ": unit is identically zero");
        fx.unit_cert = catalog_const(fx.unit_const, static_cast<int>(pf.terms.size()));
        fx.unit_bounds = UnitBounds{std::fabs(fx.unit_const), std::fabs(fx.unit_const),
                                    fx.unit_const > 0.0};
    } else {
        Box brange_box(branges);
        try {
            fx.unit_bounds = certify_unit(pf.unit, brange_box);
        } catch (const Error& e) {
            fail_input(stage + ": unit not certified non-vanishing: " + e.what());
        }
        fx.num.unit_sign = fx.unit_bounds.positive ? 1.0 : -1.0;
        fx.unit_cert = unit_certificate(pf.unit, brange_box, audit);
    }
    return fx;
}

// Weak certificate of the prepared value and its first derivatives.
PreparedWeakResult weak_certs_of(const FixedPrepared& fx, int host_arity,
                                 const std::string& stage, Audit* audit) {
    if (fx.unit_is_const) {
        PreparedWeakResult res;
        res.value = scale_cert(fx.term_certs[static_cast<size_t>(fx.num.j)], fx.unit_const,
                               audit);
        const auto& dj = fx.deriv_certs[static_cast<size_t>(fx.num.j)];
        for (int l = 0; l < host_arity; ++l) {
            if (!dj[static_cast<size_t>(l)]) {
                res.derivs.clear();
                res.failure = stage + ": unbounded first derivative in x" + std::to_string(l + 1);
                return res;
            }
            res.derivs.push_back(scale_cert(*dj[static_cast<size_t>(l)], fx.unit_const, audit));
        }
        return res;
    }
    return prepared_weak(fx.unit_cert, fx.term_certs, fx.num.j, host_arity, fx.deriv_certs,
                         audit);
}

std::vector<int> exponent_schedule(int m, int r, AtlasMode mode) {
    std::vector<int> n(static_cast<size_t>(m));
    auto rpow = [&](int e) {
        long long p = 1;
        for (int i = 0; i < e; ++i) {
            p *= r;
            if (p > std::numeric_limits<int>::max())
                fail_input("power-substitution exponent overflows (r too large)");
        }
        return static_cast<int>(p);
    };
    for (int i = 0; i < m; ++i) {
        int e = m - i; // r^(m-i) for x_{i+1}
        if (mode == AtlasMode::Improved) e = (i == 0 || i == 1) ? (m - 1) : (m - i);
        n[static_cast<size_t>(i)] = rpow(std::max(0, e));
    }
    return n;
}

int root_level(int rho, int r) {
    // l with r^(l-1) = rho
    if (rho == 1) return 1;
    if (r == 1) fail_internal("non-trivial root with r = 1");
    int l = 1;
    long long p = 1;
    while (p < rho) {
        p *= r;
        ++l;
    }
    if (p != rho) fail_internal("wall root is not a power of r");
    return l;
}

MildCert with_arity(MildCert c, int arity) {
    c.arity = arity;
    return c;
}

struct WallBuild {
    NumWall wall;
    MildCert cert; // folded (A, 1, 0) up to r, arity m
};

WallBuild build_wall(const WallSpec& w, int var_index, // 0-based
                     const std::vector<double>& t, const Box& hull, const std::vector<int>& n,
                     int r, int m, Audit* audit) {
    WallBuild out;
    const int ni = n[static_cast<size_t>(var_index)];
    const std::string stage = "wall of x" + std::to_string(var_index + 1);
    if (w.kind == WallKind::Constant || w.kind == WallKind::Param) {
        const double v = wall_value(w, t, {});
        if (v < 0.0) fail_input(stage + ": negative wall value");
        out.wall.is_const = true;
        out.wall.value = std::pow(v, 1.0 / ni);
        out.cert = make_cert(1.0, 1.0, 0.0, kOrderInf, false, m, std::min(out.wall.value, 1.0));
        return out;
    }
    const int prefix = var_index; // number of earlier variables
    Box prefix_hull;
    for (int i = 0; i < prefix; ++i) prefix_hull.dims.push_back(hull[i]);
    FixedPrepared fx = fix_prepared(w.prepared, t, prefix_hull, stage, audit);
    out.wall.is_const = false;
    out.wall.prepared = fx.num;
    out.wall.root = static_cast<double>(ni);
    for (int i = 0; i < prefix; ++i)
        out.wall.phi_exponents.push_back(static_cast<double>(n[static_cast<size_t>(i)]));

    // monomial part: the root of b_j through the power map
    const NumTerm& lead = fx.num.terms[static_cast<size_t>(fx.num.j)];
    const double sup_j = fx.term_sups[static_cast<size_t>(fx.num.j)];
    std::vector<double> q(static_cast<size_t>(prefix));
    bool natural = true;
    for (int h = 0; h < prefix; ++h) {
        q[static_cast<size_t>(h)] =
            static_cast<double>(n[static_cast<size_t>(h)]) * lead.mu[static_cast<size_t>(h)] / ni;
        const double rq = std::round(q[static_cast<size_t>(h)]);
        if (std::fabs(q[static_cast<size_t>(h)] - rq) > 1e-9 || rq < 0.0) natural = false;
    }
    MildCert mono_cert;
    if (natural) {
        double qmax = 1.0;
        for (double qq : q) qmax = std::max(qmax, qq);
        const double croot = std::pow(std::fabs(lead.coeff), 1.0 / ni);
        mono_cert = make_cert(qmax, std::max(croot, 1e-300), 0.0, kOrderInf, false,
                              std::max(1, prefix),
                              sup_j > 0.0 ? std::pow(sup_j, 1.0 / ni) : 0.0);
    } else {
        const int l = root_level(ni, r);
        std::vector<int> n_prefix(n.begin(), n.begin() + prefix);
        mono_cert = root_power(mu_values(w.prepared.terms[static_cast<size_t>(fx.num.j)]),
                               sup_j, fx.term_c1[static_cast<size_t>(fx.num.j)], n_prefix, r, l,
                               audit);
    }

    MildCert pre;
    if (fx.unit_is_const) {
        // fold the constant unit into the rooted coefficient
        pre = scale_cert(mono_cert, std::pow(std::fabs(fx.unit_const), 1.0 / ni), audit);
    } else {
        // (root o F) composed with the substituted monomial map
        double S = std::max(fx.unit_bounds.sup, 1.0 / fx.unit_bounds.delta) * (1.0 + 1e-9);
        S = std::max(S, 1.0 + 1e-9);
        MildCert root_cert = make_cert(S, S, 0.0, kOrderInf, false, 1, std::pow(S, 1.0 / ni));
        MildCert rootF = compose(root_cert, fx.unit_cert, audit);
        // unified weak certificate of the monomial map and its derivatives
        double Au = 1.0, Bu = 1e-300;
        for (size_t i = 0; i < fx.term_certs.size(); ++i) {
            Au = std::max(Au, fx.term_certs[i].A);
            Bu = std::max(Bu, fx.term_certs[i].B);
            for (const auto& dc : fx.deriv_certs[i]) {
                if (!dc)
                    fail_input(stage + ": monomial map is not C1-bounded "
                                       "(power substitution precondition)");
                Au = std::max(Au, dc->A);
                Bu = std::max(Bu, dc->B);
            }
        }
        MildCert map_syn = make_cert(Au, Bu, 0.0, kOrderInf, true, std::max(1, prefix), Bu);
        std::vector<int> n_prefix(n.begin(), n.begin() + prefix);
        std::vector<MildCert> dsyn(static_cast<size_t>(prefix), map_syn);
        MildCert map_powered = power_substitute(map_syn, dsyn, n_prefix, r, audit);
        MildCert unit_part = compose(rootF, map_powered, audit);
        pre = product({with_arity(mono_cert, std::max(1, prefix)),
                       with_arity(unit_part, std::max(1, prefix))},
                      audit);
    }
    out.cert = with_arity(fold_to_unit_B(with_arity(pre, std::max(1, prefix)), 1.0, audit), m);
    return out;
}

} // namespace

PoweredCell power_substitute_cell(const Family& fam, const std::vector<double>& t, int r,
                                  AtlasMode mode, Audit* audit) {
    const int m = fam.m;
    PoweredCell pc;
    if (m == 0) {
        // point cell: components are constants at the fixed parameter
        for (const auto& comp : fam.components) {
            NumPrepared np;
            np.j = comp.j;
            np.unit = comp.unit;
            for (const auto& term : comp.terms)
                np.terms.push_back(NumTerm{eval_value(term.a, t), {}});
            const double v = component_value(np, {});
            pc.components.push_back(std::move(np));
            pc.component_certs.push_back(
                make_cert(1.0, 1.0, 0.0, kOrderInf, false, 1, std::fabs(v)));
        }
        return pc;
    }
    const std::vector<int> n = exponent_schedule(m, r, mode);
    for (int i = 0; i < m; ++i)
        pc.phi_exponents.push_back(static_cast<double>(n[static_cast<size_t>(i)]));
    const Box hull = cell_hull(fam, point_box(t));

    for (int i = 0; i < m; ++i) {
        try {
            WallBuild lo = build_wall(fam.cell.lower[static_cast<size_t>(i)], i, t, hull,
                                      n, r, m, audit);
            WallBuild hi = build_wall(fam.cell.upper[static_cast<size_t>(i)], i, t, hull,
                                      n, r, m, audit);
            pc.lower.push_back(lo.wall);
            pc.upper.push_back(hi.wall);
            pc.wall_certs_lower.push_back(lo.cert);
            pc.wall_certs_upper.push_back(hi.cert);
        } catch (const Error& e) {
            const std::string what = e.what();
            if (what.find("wall of") == std::string::npos)
                fail_input("wall of x" + std::to_string(i + 1) + ": " + what);
            throw;
        }
    }

    for (size_t c = 0; c < fam.components.size(); ++c) {
        const std::string stage = "component " + std::to_string(c + 1);
        try {
            FixedPrepared fx = fix_prepared(fam.components[c], t, hull, stage, audit);
            auto weak = weak_certs_of(fx, m, stage, audit);
            if (weak.derivs.empty())
                fail_input(weak.failure.empty() ? "first-derivative certificates unavailable"
                                                : weak.failure);
            pc.components.push_back(fx.num);
            pc.component_certs.push_back(power_substitute(weak.value, weak.derivs, n, r, audit));
        } catch (const Error& e) {
            const std::string what = e.what();
            if (what.find(stage) == std::string::npos) fail_input(stage + ": " + what);
            throw;
        }
    }
    return pc;
}

MildCert straighten(const PoweredCell& pc, int m, int r, Audit* audit) {
    if (pc.component_certs.empty()) fail_input("straighten: no components");
    if (m == 0) {
        double vb = 0.0;
        for (const auto& c : pc.component_certs) vb = std::max(vb, c.value_bound);
        return make_cert(1.0, 1.0, 0.0, kOrderInf, false, 1, std::min(vb, 1.0));
    }
    const MildCert ident = make_cert(1.0, 1.0, 0.0, kOrderInf, false, m, 1.0);
    // one affine stage per variable
    std::vector<MildCert> stage_certs;
    for (int i = 0; i < m; ++i) {
        MildCert diff = sum({pc.wall_certs_upper[static_cast<size_t>(i)],
                             pc.wall_certs_lower[static_cast<size_t>(i)]},
                            audit);
        MildCert diff_folded = fold_to_unit_B(diff, 1.0, audit);
        MildCert prod = product({diff_folded, ident}, audit);
        MildCert aff = sum({prod, pc.wall_certs_lower[static_cast<size_t>(i)]}, audit);
        MildCert aff_folded = fold_to_unit_B(aff, 1.0, audit);
        stage_certs.push_back(make_cert(std::max(aff_folded.A, 1.0), 1.0, 0.0, aff_folded.order,
                                        false, m, 1.0));
    }
    double Amax = 0.0, Bmax = 0.0, vb = 0.0;
    Order ord = kOrderInf;
    for (const auto& comp : pc.component_certs) {
        MildCert h = comp;
        for (int i = 0; i < m; ++i) h = compose(h, stage_certs[static_cast<size_t>(i)], audit);
        Amax = std::max(Amax, h.A);
        Bmax = std::max(Bmax, h.B);
        vb = std::max(vb, h.value_bound);
        ord = min_order(ord, h.order);
    }
    if (ord != kOrderInf && ord < r) fail_internal("composite certificate lost the order");
    MildCert composite = make_cert(Amax, Bmax, 0.0, ord, false, m, vb);
    return fold_to_unit_B(composite, 1.0, audit);
}

CubeGrid subdivide(const MildCert& composite, int r, int growth_exponent,
                   double* growth_base_out) {
    // validates B <= 1 and the order
    (void)rescale_step(composite, r);
    const double a_eff = composite.A * std::pow(static_cast<double>(r), composite.C);
    const double denom = std::pow(static_cast<double>(r), static_cast<double>(growth_exponent));
    const double base = a_eff / denom;
    if (growth_base_out) *growth_base_out = base;
    // The emitted count commits to exactly this roundtrip expression.
    const double side_real = std::ceil(base * denom);
    if (!(side_real >= 1.0)) {
        CubeGrid g;
        g.side = 1;
        g.step = 1.0;
        return g;
    }
    if (side_real > 9e15) fail_input("subdivision grid exceeds the representable range");
    CubeGrid g;
    g.side = static_cast<long long>(side_real);
    g.step = 1.0 / static_cast<double>(g.side);
    return g;
}

namespace {

long long checked_count(long long side, int m) {
    long long c = 1;
    for (int i = 0; i < m; ++i) {
        if (side != 0 && c > std::numeric_limits<long long>::max() / side)
            fail_input("chart count exceeds the representable range");
        c *= side;
    }
    return c;
}

PreparedFunction coordinate_component(int m, int axis) {
    PreparedFunction pf;
    PreparedTerm term;
    term.a = ex_const(1.0);
    for (int i = 0; i < m; ++i) {
        ExponentVal e;
        e.v = (i == axis) ? 1.0 : 0.0;
        e.exact = Rational(i == axis ? 1 : 0);
        term.mu.push_back(e);
    }
    pf.terms.push_back(term);
    pf.unit = ex_const(1.0);
    pf.j = 0;
    return pf;
}

Family with_coordinate_components(const Family& fam, const ImprovedRewrite* rewrite) {
    Family out = fam;
    std::vector<PreparedFunction> comps;
    for (int i = 0; i < fam.m; ++i) {
        PreparedFunction pf = coordinate_component(fam.m, i);
        if (rewrite && !rewrite->identity) {
            if (i == 0) {
                pf.terms[0].mu[0].exact = rewrite->e1;
                pf.terms[0].mu[0].v = static_cast<double>(rewrite->e1);
            } else if (i == 1) {
                pf.terms[0].mu[0].exact = rewrite->e21;
                pf.terms[0].mu[0].v = static_cast<double>(rewrite->e21);
                pf.terms[0].a = ex_mul(rewrite->c2, ex_const(rewrite->scale));
            }
        }
        comps.push_back(std::move(pf));
    }
    comps.insert(comps.end(), out.components.begin(), out.components.end());
    out.components = std::move(comps);
    out.n = out.m + static_cast<int>(out.components.size());
    return out;
}

Atlas build_atlas_with(const Family& fam, const std::vector<double>& t, int r, AtlasMode mode,
                       const ImprovedRewrite* rewrite) {
    Atlas atlas;
    atlas.input_digest = fam.digest;
    atlas.t = t;
    atlas.r = r;
    atlas.mode = mode;
    atlas.m = fam.m;

    // The chart map emits the straightened coordinates and the prepared
    // values; coordinates are handled as prepared components of their own.
    Family staged = with_coordinate_components(fam, rewrite);
    atlas.n = static_cast<int>(staged.components.size());

    CellPipeline pipe;
    pipe.m = fam.m;
    pipe.n = atlas.n;
    pipe.r = r;
    pipe.mode = mode;
    pipe.t = t;
    PoweredCell pc = power_substitute_cell(staged, t, r, mode, &pipe.audit);
    pipe.phi_exponents = pc.phi_exponents;
    pipe.lower = pc.lower;
    pipe.upper = pc.upper;
    pipe.wall_certs_lower = pc.wall_certs_lower;
    pipe.wall_certs_upper = pc.wall_certs_upper;
    pipe.components = pc.components;
    pipe.component_certs = pc.component_certs;
    pipe.composite = straighten(pc, fam.m, r, &pipe.audit);
    pipe.growth_exponent =
        mode == AtlasMode::Improved ? fam.m * (fam.m - 1) : fam.m * fam.m;
    pipe.grid = subdivide(pipe.composite, r, pipe.growth_exponent, &pipe.growth_base);
    pipe.chart_cert = make_cert(1.0, 1.0, 0.0, r, false, std::max(1, fam.m), 1.0);

    atlas.chart_count = checked_count(pipe.grid.side, fam.m);
    atlas.predicted_count = std::pow(static_cast<double>(pipe.grid.side), fam.m);
    atlas.cells.push_back(std::move(pipe));
    return atlas;
}

} // namespace

Atlas build_atlas(const Family& fam, const std::vector<double>& t, int r, AtlasMode mode) {
    if (r < 1) fail_input("atlas order r must be >= 1");
    if (static_cast<int>(t.size()) != fam.k) fail_input("parameter arity mismatch");
    for (int i = 0; i < fam.k; ++i)
        if (!fam.T[i].contains(t[static_cast<size_t>(i)]))
            fail_input("parameter outside the family box");

    if (mode == AtlasMode::Improved) {
        if (fam.m < 2) {
            Atlas a = build_atlas_with(fam, t, r, AtlasMode::Standard, nullptr);
            a.note = "improved mode needs m >= 2; fell back to standard";
            return a;
        }
        ImprovedRewrite rw = improved_normalize(fam, r);
        if (rw.identity) {
            Atlas a = build_atlas_with(fam, t, r, AtlasMode::Standard, nullptr);
            a.note = "improved mode fell back to standard: " + rw.note;
            return a;
        }
        try {
            Atlas a = build_atlas_with(rw.fam, t, r, AtlasMode::Improved, &rw);
            a.input_digest = fam.digest;
            a.note = rw.note;
            return a;
        } catch (const Error& e) {
            Atlas a = build_atlas_with(fam, t, r, AtlasMode::Standard, nullptr);
            a.note = std::string("improved mode fell back to standard: ") + e.what();
            return a;
        }
    }
    return build_atlas_with(fam, t, r, AtlasMode::Standard, nullptr);
}

GrowthFit growth_fit(const Family& fam, const std::vector<double>& t, int r_min, int r_max,
                     AtlasMode mode) {
    if (r_max - r_min + 1 < 3) fail_input("growth fit needs at least 3 values of r");
    GrowthFit fit;
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    int n = 0;
    for (int r = r_min; r <= r_max; ++r) {
        Atlas a = build_atlas(fam, t, r, mode);
        GrowthRow row;
        row.r = r;
        row.count = a.chart_count;
        row.a_total = a.cells.empty() ? 0.0 : a.cells[0].composite.A;
        fit.rows.push_back(row);
        const double x = std::log(static_cast<double>(r));
        const double y = std::log(static_cast<double>(row.count));
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
        ++n;
    }
    const double denom = n * sxx - sx * sx;
    fit.slope = denom == 0.0 ? 0.0 : (n * sxy - sx * sy) / denom;
    return fit;
}

// --- improved normalization ----------------------------------------------------

namespace {

// Normal form of an x2 wall: leading coefficient a(t), leading exponent on x1,
// remaining map terms and the unit.
struct X2Wall {
    Expr lead_coeff;          // over t
    Rational lead_exp = 0;    // exponent of x1 in the distinguished term
    PreparedFunction pf;      // full prepared data (terms over x1)
    bool zero = false;        // identically zero lower wall
    bool ok = false;
    std::string why;
};

X2Wall x2_normal_form(const WallSpec& w, int k) {
    X2Wall out;
    switch (w.kind) {
    case WallKind::Constant:
        if (w.constant == 0.0) {
            out.zero = true;
            out.ok = true;
            return out;
        }
        out.pf.terms.push_back(PreparedTerm{ex_const(w.constant), {ExponentVal{0.0, Rational(0)}}});
        out.pf.unit = ex_const(1.0);
        out.pf.j = 0;
        out.lead_coeff = ex_const(w.constant);
        out.lead_exp = 0;
        out.ok = true;
        return out;
    case WallKind::Param:
        out.pf.terms.push_back(PreparedTerm{w.param, {ExponentVal{0.0, Rational(0)}}});
        out.pf.unit = ex_const(1.0);
        out.pf.j = 0;
        out.lead_coeff = w.param;
        out.lead_exp = 0;
        out.ok = true;
        return out;
    case WallKind::Prepared: {
        out.pf = w.prepared;
        const PreparedTerm& lead = out.pf.terms[static_cast<size_t>(out.pf.j)];
        if (!lead.mu[0].exact) {
            out.why = "leading exponent of the x2 wall is not exact";
            return out;
        }
        out.lead_coeff = lead.a;
        out.lead_exp = *lead.mu[0].exact;
        out.ok = true;
        return out;
    }
    }
    (void)k;
    out.why = "unhandled wall kind";
    return out;
}

Rational rational_ceil(const Rational& q) {
    using boost::multiprecision::denominator;
    using boost::multiprecision::numerator;
    BigInt num = numerator(q), den = denominator(q);
    BigInt d = num / den;
    if (num > 0 && d * den != num) d += 1;
    return Rational(d);
}

// scale every term of a prepared function for the substitution
// x2 = c(t) * S * x1^q * y2:   a x1^e x2^w (...) -> a (cS)^w x1^(e+qw) y2^w
PreparedFunction transform_prepared(const PreparedFunction& pf, const Expr& c, double S,
                                    const Rational& q, const Rational& x1_power, int x2_index,
                                    bool& ok, std::string& why) {
    PreparedFunction out = pf;
    for (auto& term : out.terms) {
        if (x2_index < static_cast<int>(term.mu.size())) {
            ExponentVal& w2 = term.mu[static_cast<size_t>(x2_index)];
            if (!w2.exact) {
                ok = false;
                why = "x2 exponent is not exact";
                return out;
            }
            const Rational w = *w2.exact;
            if (w != 0) {
                // coefficient picks up (c(t) * S)^w
                const double wd = static_cast<double>(w);
                Expr scaled = ex_pow(ex_mul(c, ex_const(S)), wd);
                term.a = ex_mul(term.a, scaled);
                ExponentVal& e1 = term.mu[0];
                if (!e1.exact) {
                    ok = false;
                    why = "x1 exponent is not exact";
                    return out;
                }
                e1.exact = *e1.exact + q * w;
                e1.v = static_cast<double>(*e1.exact);
            }
        }
        // x1 power substitution
        if (!term.mu.empty()) {
            ExponentVal& e1 = term.mu[0];
            if (!e1.exact) {
                ok = false;
                why = "x1 exponent is not exact";
                return out;
            }
            e1.exact = *e1.exact * x1_power;
            e1.v = static_cast<double>(*e1.exact);
        }
    }
    return out;
}

} // namespace

ImprovedRewrite improved_normalize(const Family& fam, int r) {
    (void)r;
    ImprovedRewrite rw;
    rw.identity = true;
    if (fam.m < 2) {
        rw.note = "m < 2";
        return rw;
    }
    X2Wall lo = x2_normal_form(fam.cell.lower[1], fam.k);
    X2Wall hi = x2_normal_form(fam.cell.upper[1], fam.k);
    if (!lo.ok || !hi.ok) {
        rw.note = "x2 wall outside the handled shapes: " + (lo.ok ? hi.why : lo.why);
        return rw;
    }
    if (hi.zero) {
        rw.note = "upper x2 wall is zero";
        return rw;
    }
    // choose the scaling wall: the one with the smaller x1 exponent
    // (the lower wall only qualifies when it is nonzero)
    const bool scale_by_upper = lo.zero || lo.lead_exp >= hi.lead_exp;
    const X2Wall& sw = scale_by_upper ? hi : lo;

    // certified positive leading coefficient and unit bounds of the scaler
    UnitBounds cb;
    try {
        cb = certify_unit(sw.lead_coeff, fam.T);
    } catch (const Error&) {
        rw.note = "scaling coefficient sign not certified";
        return rw;
    }
    if (!cb.positive) {
        rw.note = "scaling coefficient is negative";
        return rw;
    }
    Box hull = cell_hull(fam, fam.T);
    Box prefix{std::vector<Interval>{hull[0]}};
    UnitBounds gb;
    try {
        std::vector<Interval> branges;
        for (const auto& term : sw.pf.terms) branges.push_back(term_range(term, fam.T, prefix));
        gb = certify_unit(sw.pf.unit, Box(branges));
    } catch (const Error& e) {
        rw.note = std::string("scaling unit bounds unavailable: ") + e.what();
        return rw;
    }
    if (!gb.positive) {
        rw.note = "scaling unit is negative";
        return rw;
    }
    double S = std::max(gb.sup, 1.0 / gb.delta) * 1.0000001;
    S = std::max(S, 1.0 + 1e-9);

    const Rational q = sw.lead_exp;
    const Rational other_exp = scale_by_upper ? lo.lead_exp : hi.lead_exp;
    const Rational gap = scale_by_upper ? (lo.zero ? Rational(0) : other_exp - q)
                                        : other_exp - q; // >= 0 by choice
    Rational x1_power(1);
    if (gap != 0) {
        const Rational R = rational_ceil(gap);
        x1_power = R / gap; // substitution exponent for x1, >= 1
    }

    // transformed x1 walls: values raised to gap/R (the inverse substitution)
    const Rational inv_power = Rational(1) / x1_power;
    Family out = fam;
    auto transform_x1_wall = [&](WallSpec& w) -> bool {
        if (w.kind == WallKind::Constant) {
            w.constant = std::pow(w.constant, static_cast<double>(inv_power));
            return true;
        }
        if (w.kind == WallKind::Param) {
            UnitBounds wb;
            try {
                wb = certify_unit(w.param, fam.T);
            } catch (const Error&) {
                return false;
            }
            if (!wb.positive) return false;
            w.param = ex_pow(w.param, static_cast<double>(inv_power));
            return true;
        }
        return false;
    };
    if (x1_power != 1) {
        if (!transform_x1_wall(out.cell.lower[0]) || !transform_x1_wall(out.cell.upper[0])) {
            rw.note = "x1 walls cannot absorb the rounding substitution";
            return rw;
        }
    }

    bool ok = true;
    std::string why;
    const Expr divisor_coeff = sw.lead_coeff;

    // x1 power substitution applied to the terms of an x2 wall (they only
    // reference x1).
    auto substituted_terms = [&](const PreparedFunction& pf) {
        PreparedFunction out_pf = pf;
        for (auto& term : out_pf.terms) {
            ExponentVal& e1 = term.mu[0];
            if (!e1.exact) {
                ok = false;
                why = "x1 exponent is not exact";
            } else {
                e1.exact = *e1.exact * x1_power;
                e1.v = static_cast<double>(*e1.exact);
            }
        }
        return out_pf;
    };

    // scaled upper wall: terms + constant term 1, unit = G/S at the constant
    {
        WallSpec upper;
        if (scale_by_upper) {
            upper.kind = WallKind::Prepared;
            PreparedFunction pf = substituted_terms(hi.pf);
            PreparedTerm one;
            one.a = ex_const(1.0);
            one.mu.push_back(ExponentVal{0.0, Rational(0)});
            pf.terms.push_back(one);
            const int new_j = static_cast<int>(pf.terms.size()) - 1;
            // unit: (1/S) * G(b) as an expression over the extended range list
            pf.unit = ex_mul(ex_const(1.0 / S), hi.pf.unit);
            pf.j = new_j;
            upper.prepared = pf;
        } else {
            // divide the upper (deeper) wall by the lower scaler
            upper.kind = WallKind::Prepared;
            PreparedFunction pf = substituted_terms(hi.pf);
            PreparedTerm lead;
            Expr ratio = ex_mul(hi.lead_coeff,
                                ex_recip(ex_mul(lo.lead_coeff, ex_const(S))));
            lead.a = ratio;
            Rational e = (hi.lead_exp - lo.lead_exp) * x1_power;
            lead.mu.push_back(ExponentVal{static_cast<double>(e), e});
            pf.terms.push_back(lead);
            pf.j = static_cast<int>(pf.terms.size()) - 1;
            pf.unit = hi.pf.unit; // over the original terms, index unchanged
            upper.prepared = pf;
        }
        out.cell.upper[1] = upper;
    }
    {
        WallSpec lower;
        if (lo.zero) {
            lower.kind = WallKind::Constant;
            lower.constant = 0.0;
        } else if (scale_by_upper) {
            lower.kind = WallKind::Prepared;
            PreparedFunction pf = substituted_terms(lo.pf);
            PreparedTerm lead;
            Expr ratio = ex_mul(lo.lead_coeff,
                                ex_recip(ex_mul(hi.lead_coeff, ex_const(S))));
            lead.a = ratio;
            const Rational e = (lo.lead_exp - hi.lead_exp) * x1_power;
            lead.mu.push_back(ExponentVal{static_cast<double>(e), e});
            pf.terms.push_back(lead);
            pf.j = static_cast<int>(pf.terms.size()) - 1;
            pf.unit = lo.pf.unit;
            lower.prepared = pf;
        } else {
            lower.kind = WallKind::Prepared;
            PreparedFunction pf = substituted_terms(lo.pf);
            PreparedTerm one;
            one.a = ex_const(1.0);
            one.mu.push_back(ExponentVal{0.0, Rational(0)});
            pf.terms.push_back(one);
            pf.j = static_cast<int>(pf.terms.size()) - 1;
            pf.unit = ex_mul(ex_const(1.0 / S), lo.pf.unit);
            lower.prepared = pf;
        }
        out.cell.lower[1] = lower;
    }
    if (!ok) {
        rw.identity = true;
        rw.note = why;
        return rw;
    }

    // components and the walls of x3..xm through the substitution
    for (auto& comp : out.components) {
        comp = transform_prepared(comp, divisor_coeff, S, q, x1_power, 1, ok, why);
        if (!ok) {
            rw.identity = true;
            rw.note = why;
            return rw;
        }
    }
    for (int i = 2; i < fam.m; ++i) {
        for (int side = 0; side < 2; ++side) {
            WallSpec& w = side == 0 ? out.cell.lower[static_cast<size_t>(i)]
                                    : out.cell.upper[static_cast<size_t>(i)];
            if (w.kind == WallKind::Prepared) {
                w.prepared = transform_prepared(w.prepared, divisor_coeff, S, q, x1_power, 1,
                                                ok, why);
                if (!ok) {
                    rw.identity = true;
                    rw.note = why;
                    return rw;
                }
            }
        }
    }

    // re-validate the rewritten family through the parser
    try {
        rw.fam = parse_family(serialize_family(out));
    } catch (const Error& e) {
        rw.identity = true;
        rw.note = std::string("rewritten family failed validation: ") + e.what();
        return rw;
    }
    rw.identity = false;
    rw.e1 = x1_power; // x1 = y1^(R/gap)
    rw.e21 = q * x1_power;
    rw.c2 = divisor_coeff;
    rw.scale = S;
    rw.note = "x2 walls normalized";
    return rw;
}

// --- serialization ---------------------------------------------------------------

namespace {

OJson numprep_to_json(const NumPrepared& p) {
    OJson j;
    OJson terms = OJson::array();
    for (const auto& t : p.terms) {
        OJson tj;
        tj["coeff"] = t.coeff;
        tj["mu"] = t.mu;
        terms.push_back(tj);
    }
    j["terms"] = terms;
    std::vector<std::string> names;
    for (size_t i = 0; i < p.terms.size(); ++i) names.push_back("b" + std::to_string(i + 1));
    j["unit"] = print_expr(p.unit, names);
    j["j"] = p.j + 1;
    j["unit_sign"] = p.unit_sign;
    return j;
}

NumPrepared numprep_from_json(const OJson& j) {
    NumPrepared p;
    for (const auto& tj : j.at("terms")) {
        NumTerm t;
        t.coeff = tj.at("coeff").get<double>();
        t.mu = tj.at("mu").get<std::vector<double>>();
        p.terms.push_back(t);
    }
    std::map<std::string, int> names;
    for (size_t i = 0; i < p.terms.size(); ++i) names["b" + std::to_string(i + 1)] = static_cast<int>(i);
    p.unit = parse_expr(j.at("unit").get<std::string>(), names);
    p.j = j.at("j").get<int>() - 1;
    p.unit_sign = j.at("unit_sign").get<double>();
    return p;
}

OJson wall_to_json(const NumWall& w) {
    OJson j;
    if (w.is_const) {
        j["kind"] = "const";
        j["value"] = w.value;
        return j;
    }
    j["kind"] = "root";
    j["root"] = w.root;
    j["phi_exponents"] = w.phi_exponents;
    j["prepared"] = numprep_to_json(w.prepared);
    return j;
}

NumWall wall_from_json(const OJson& j) {
    NumWall w;
    if (j.at("kind").get<std::string>() == "const") {
        w.is_const = true;
        w.value = j.at("value").get<double>();
        return w;
    }
    w.is_const = false;
    w.root = j.at("root").get<double>();
    w.phi_exponents = j.at("phi_exponents").get<std::vector<double>>();
    w.prepared = numprep_from_json(j.at("prepared"));
    return w;
}

} // namespace

std::string atlas_to_json(const Atlas& atlas) {
    OJson j;
    OJson meta;
    meta["input_digest"] = atlas.input_digest;
    meta["t"] = atlas.t;
    meta["r"] = atlas.r;
    meta["mode"] = atlas.mode == AtlasMode::Improved ? "improved" : "standard";
    meta["m"] = atlas.m;
    meta["n"] = atlas.n;
    if (!atlas.note.empty()) meta["note"] = atlas.note;
    j["meta"] = meta;
    OJson cells = OJson::array();
    for (const auto& pipe : atlas.cells) {
        OJson cj;
        cj["phi_exponents"] = pipe.phi_exponents;
        OJson walls = OJson::array();
        for (int i = 0; i < pipe.m; ++i) {
            OJson wj;
            wj["lower"] = wall_to_json(pipe.lower[static_cast<size_t>(i)]);
            wj["upper"] = wall_to_json(pipe.upper[static_cast<size_t>(i)]);
            walls.push_back(wj);
        }
        cj["walls"] = walls;
        OJson comps = OJson::array();
        for (const auto& c : pipe.components) comps.push_back(numprep_to_json(c));
        cj["components"] = comps;
        OJson ccerts = OJson::array();
        for (const auto& c : pipe.component_certs) ccerts.push_back(cert_to_json(c));
        cj["component_certificates"] = ccerts;
        cj["composite_certificate"] = cert_to_json(pipe.composite);
        cj["growth_base"] = pipe.growth_base;
        cj["growth_exponent"] = pipe.growth_exponent;
        OJson grid;
        grid["side"] = pipe.grid.side;
        grid["step"] = pipe.grid.step;
        cj["grid"] = grid;
        cj["certificate"] = cert_to_json(pipe.chart_cert);
        cj["audit"] = audit_to_json(pipe.audit);
        cells.push_back(cj);
    }
    j["cells"] = cells;
    OJson counts;
    counts["charts"] = atlas.chart_count;
    counts["predicted"] = atlas.predicted_count;
    j["counts"] = counts;
    return j.dump(2);
}

Atlas atlas_from_json(const std::string& text) {
    OJson j;
    try {
        j = OJson::parse(text);
    } catch (const std::exception& e) {
        fail_input(std::string("atlas document is not valid JSON: ") + e.what());
    }
    try {
        Atlas atlas;
        const OJson& meta = j.at("meta");
        atlas.input_digest = meta.at("input_digest").get<std::string>();
        atlas.t = meta.at("t").get<std::vector<double>>();
        atlas.r = meta.at("r").get<int>();
        atlas.mode = meta.at("mode").get<std::string>() == "improved" ? AtlasMode::Improved
                                                                      : AtlasMode::Standard;
        atlas.m = meta.at("m").get<int>();
        atlas.n = meta.at("n").get<int>();
        if (meta.contains("note")) atlas.note = meta.at("note").get<std::string>();
        for (const auto& cj : j.at("cells")) {
            CellPipeline pipe;
            pipe.m = atlas.m;
            pipe.n = atlas.n;
            pipe.r = atlas.r;
            pipe.mode = atlas.mode;
            pipe.t = atlas.t;
            pipe.phi_exponents = cj.at("phi_exponents").get<std::vector<double>>();
            for (const auto& wj : cj.at("walls")) {
                pipe.lower.push_back(wall_from_json(wj.at("lower")));
                pipe.upper.push_back(wall_from_json(wj.at("upper")));
            }
            for (const auto& compj : cj.at("components"))
                pipe.components.push_back(numprep_from_json(compj));
            for (const auto& certj : cj.at("component_certificates"))
                pipe.component_certs.push_back(cert_from_json(certj));
            pipe.composite = cert_from_json(cj.at("composite_certificate"));
            pipe.growth_base = cj.at("growth_base").get<double>();
            pipe.growth_exponent = cj.at("growth_exponent").get<int>();
            pipe.grid.side = cj.at("grid").at("side").get<long long>();
            pipe.grid.step = cj.at("grid").at("step").get<double>();
            pipe.chart_cert = cert_from_json(cj.at("certificate"));
            atlas.cells.push_back(std::move(pipe));
        }
        atlas.chart_count = j.at("counts").at("charts").get<long long>();
        atlas.predicted_count = j.at("counts").at("predicted").get<double>();
        return atlas;
    } catch (const Error&) {
        throw;
    } catch (const std::exception& e) {
        fail_input(std::string("malformed atlas document: ") + e.what());
    }
}

// --- pipeline evaluation ----------------------------------------------------------

double component_value(const NumPrepared& comp, const std::vector<double>& x) {
    std::vector<double> b(comp.terms.size());
    for (size_t i = 0; i < comp.terms.size(); ++i) {
        double v = comp.terms[i].coeff;
        for (size_t h = 0; h < comp.terms[i].mu.size(); ++h) {
            const double mu = comp.terms[i].mu[h];
            if (mu != 0.0) v *= std::pow(x[h], mu);
        }
        b[i] = v;
    }
    return b[static_cast<size_t>(comp.j)] * eval_value(comp.unit, b);
}

double wall_value_at(const NumWall& w, const std::vector<double>& prefix) {
    if (w.is_const) return w.value;
    std::vector<double> y(prefix.size());
    for (size_t h = 0; h < prefix.size(); ++h)
        y[h] = std::pow(prefix[h], w.phi_exponents[h]);
    const double v = component_value(w.prepared, y);
    if (!(v > 0.0)) fail_input("transformed wall is not positive at the sample");
    return std::pow(v, 1.0 / w.root);
}

std::vector<double> straightened_point(const CellPipeline& pipe, const std::vector<double>& u) {
    std::vector<double> v;
    for (int i = 0; i < pipe.m; ++i) {
        const double lo = wall_value_at(pipe.lower[static_cast<size_t>(i)], v);
        const double hi = wall_value_at(pipe.upper[static_cast<size_t>(i)], v);
        v.push_back(lo + u[static_cast<size_t>(i)] * (hi - lo));
    }
    return v;
}

std::vector<double> power_point(const CellPipeline& pipe, const std::vector<double>& v) {
    std::vector<double> x(v.size());
    for (size_t i = 0; i < v.size(); ++i)
        x[i] = std::pow(v[i], pipe.phi_exponents[i]);
    return x;
}

std::vector<double> invert_point(const CellPipeline& pipe, const std::vector<double>& x) {
    std::vector<double> v(x.size()), u(x.size());
    std::vector<double> prefix;
    for (int i = 0; i < pipe.m; ++i) {
        v[static_cast<size_t>(i)] =
            std::pow(x[static_cast<size_t>(i)], 1.0 / pipe.phi_exponents[static_cast<size_t>(i)]);
        const double lo = wall_value_at(pipe.lower[static_cast<size_t>(i)], prefix);
        const double hi = wall_value_at(pipe.upper[static_cast<size_t>(i)], prefix);
        u[static_cast<size_t>(i)] = (v[static_cast<size_t>(i)] - lo) / (hi - lo);
        prefix.push_back(v[static_cast<size_t>(i)]);
    }
    return u;
}

} // namespace mildatlas
