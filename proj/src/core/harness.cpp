#include "harness.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <thread>

#include "json_io.hpp"
#include "sampling.hpp"

namespace mildatlas {

std::string certify_family_report(const Family& fam, bool* ok_out) {
    OJson j;
    j["input_digest"] = fam.digest;
    j["k"] = fam.k;
    j["m"] = fam.m;
    j["n"] = fam.n;
    bool ok = true;

    const C1Result c1 = check_c1_bounded(fam);
    OJson c1j;
    c1j["ok"] = c1.ok;
    c1j["max_bound"] = c1.max_bound;
    if (!c1.ok) {
        c1j["failure"] = c1.failure;
        c1j["witness_t"] = c1.witness_t;
        c1j["witness_x"] = c1.witness_x;
        c1j["witness_value"] = c1.witness_value;
        ok = false;
    } else {
        OJson rows = OJson::array();
        for (const auto& e : c1.entries) {
            OJson ej;
            ej["where"] = e.where;
            ej["term"] = e.term + 1;
            ej["direction"] = e.dir + 1;
            ej["bound"] = e.bound;
            rows.push_back(ej);
        }
        c1j["bounds"] = rows;
    }
    j["first_derivatives"] = c1j;

    const WallDiagnostics walls = wall_prepared_check(fam);
    OJson wj;
    wj["ok"] = walls.ok;
    wj["notes"] = walls.notes;
    if (!walls.violations.empty()) wj["violations"] = walls.violations;
    j["walls"] = wj;
    ok = ok && walls.ok;

    // uniform weak certificates per component over the whole parameter box
    Audit audit;
    OJson comps = OJson::array();
    if (fam.m > 0) {
        Box hull;
        try {
            hull = cell_hull(fam, fam.T);
        } catch (const Error& e) {
            ok = false;
            j["error"] = std::string("cell hull: ") + e.what();
        }
        for (size_t c = 0; ok && c < fam.components.size(); ++c) {
            const auto& comp = fam.components[c];
            OJson cj;
            cj["component"] = c + 1;
            try {
                std::vector<MildCert> term_certs;
                std::vector<std::vector<std::optional<MildCert>>> deriv_certs;
                std::vector<Interval> branges;
                for (size_t i = 0; i < comp.terms.size(); ++i) {
                    const Interval range = term_range(comp.terms[i], fam.T, hull);
                    branges.push_back(range);
                    std::vector<double> mu;
                    for (const auto& ev : comp.terms[i].mu) mu.push_back(ev.v);
                    term_certs.push_back(monomial_weak(mu, std::max(range.mag(), 1e-300),
                                                       &audit));
                    std::vector<std::optional<MildCert>> row;
                    for (int l = 0; l < fam.m; ++l) {
                        double bound = -1.0;
                        for (const auto& e : c1.entries)
                            if (e.where == "component " + std::to_string(c + 1) &&
                                e.term == static_cast<int>(i) && e.dir == l)
                                bound = e.bound;
                        std::vector<double> dmu = mu;
                        dmu[static_cast<size_t>(l)] -= 1.0;
                        if (bound > 0.0 && std::isfinite(bound))
                            row.push_back(monomial_weak(dmu, bound, &audit));
                        else if (bound == 0.0)
                            row.push_back(make_cert(1.0, 1e-300, 0.0, kOrderInf, true, fam.m,
                                                    0.0));
                        else
                            row.push_back(std::nullopt);
                    }
                    deriv_certs.push_back(std::move(row));
                }
                MildCert unit_cert = unit_certificate(comp.unit, Box(branges), &audit);
                auto res = prepared_weak(unit_cert, term_certs, comp.j, fam.m, deriv_certs,
                                         &audit);
                cj["value_certificate"] = cert_to_json(res.value);
                if (res.derivs.empty()) {
                    cj["first_derivative_certificates"] = "unavailable";
                    cj["reason"] = res.failure;
                    ok = false;
                } else {
                    OJson ds = OJson::array();
                    for (const auto& dcert : res.derivs) ds.push_back(cert_to_json(dcert));
                    cj["first_derivative_certificates"] = ds;
                }
            } catch (const Error& e) {
                cj["error"] = e.what();
                ok = false;
            }
            comps.push_back(cj);
        }
    }
    j["components"] = comps;
    j["audit"] = audit_to_json(audit);
    j["ok"] = ok;
    if (ok_out) *ok_out = ok;
    return j.dump(2);
}

std::string growth_report(const Family& fam, const GrowthFit& fit, AtlasMode mode,
                          const std::vector<double>& t) {
    OJson j;
    j["input_digest"] = fam.digest;
    j["t"] = t;
    j["mode"] = mode == AtlasMode::Improved ? "improved" : "standard";
    j["slope"] = fit.slope;
    OJson rows = OJson::array();
    for (const auto& row : fit.rows) {
        OJson rj;
        rj["r"] = row.r;
        rj["charts"] = row.count;
        rj["A_total"] = row.a_total;
        rows.push_back(rj);
    }
    j["rows"] = rows;
    return j.dump(2);
}

int thread_budget() {
    if (const char* env = std::getenv("MILDATLAS_THREADS")) {
        const int v = std::atoi(env);
        if (v >= 1) return v;
    }
    const unsigned hc = std::thread::hardware_concurrency();
    return hc == 0 ? 1 : static_cast<int>(hc);
}

namespace {

// normalized series of y -> y^mu around u0, for univariate composition
std::vector<double> power_series(double u0, double mu, int ord) {
    Jet j = monomial_jet({mu}, {u0}, ord);
    return j.c;
}

Jet const_jet_like(int m, int ord, const std::vector<double>& base, double v) {
    return jet_const<double>(std::max(1, m), ord, base, v);
}

// jet of a prepared value b_j F(b) as a function of its own variables
Jet prepared_jet(const NumPrepared& p, const std::vector<double>& x, int ord) {
    std::vector<Jet> term_jets;
    std::vector<double> b_values;
    term_jets.reserve(p.terms.size());
    for (const auto& term : p.terms) {
        Jet tj = jet_scale(monomial_jet(term.mu, x, ord), term.coeff);
        b_values.push_back(tj.value());
        term_jets.push_back(std::move(tj));
    }
    Jet unit_jet = eval_jet(p.unit, b_values, ord);
    Jet unit_of_b = compose_faa(unit_jet, term_jets);
    return multiply(term_jets[static_cast<size_t>(p.j)], unit_of_b);
}

// jet of a transformed wall as a function of the prefix variables
Jet wall_jet_local(const NumWall& w, const std::vector<double>& v_prefix, int ord) {
    if (w.is_const) return const_jet_like(static_cast<int>(v_prefix.size()), ord, v_prefix, w.value);
    // substituted monomial exponents phi_h * mu_h
    std::vector<Jet> term_jets;
    std::vector<double> b_values;
    for (const auto& term : w.prepared.terms) {
        std::vector<double> emu(term.mu.size());
        for (size_t h = 0; h < term.mu.size(); ++h)
            emu[h] = term.mu[h] * w.phi_exponents[h];
        Jet tj = jet_scale(monomial_jet(emu, v_prefix, ord), term.coeff);
        b_values.push_back(tj.value());
        term_jets.push_back(std::move(tj));
    }
    // rooted distinguished monomial
    const NumTerm& lead = w.prepared.terms[static_cast<size_t>(w.prepared.j)];
    std::vector<double> rooted(lead.mu.size());
    for (size_t h = 0; h < lead.mu.size(); ++h)
        rooted[h] = lead.mu[h] * w.phi_exponents[h] / w.root;
    Jet lead_root = jet_scale(monomial_jet(rooted, v_prefix, ord),
                              std::pow(std::fabs(lead.coeff), 1.0 / w.root));
    // rooted unit: (sign * F)(b)
    Jet unit_jet = eval_jet(w.prepared.unit, b_values, ord);
    Jet unit_of_b = compose_faa(unit_jet, term_jets);
    Jet signed_unit = w.prepared.unit_sign < 0 ? jet_neg(unit_of_b) : unit_of_b;
    if (!(signed_unit.value() > 0.0))
        fail_input("transformed wall unit is not positive at the sample");
    Jet unit_root = compose_univariate(power_series(signed_unit.value(), 1.0 / w.root, ord),
                                       signed_unit);
    return multiply(lead_root, unit_root);
}

} // namespace

std::vector<Jet> chart_jets(const CellPipeline& pipe, const std::vector<double>& origin,
                            double step, const std::vector<double>& u) {
    const int m = pipe.m;
    const int r = pipe.r;
    if (m == 0) {
        std::vector<Jet> out;
        for (const auto& comp : pipe.components)
            out.push_back(const_jet_like(1, r, {0.0}, component_value(comp, {})));
        return out;
    }
    // cube placement: w_i = origin_i + step * u_i
    std::vector<Jet> w_jets;
    std::vector<double> w_vals(static_cast<size_t>(m));
    for (int i = 0; i < m; ++i) {
        const double wv = origin[static_cast<size_t>(i)] + step * u[static_cast<size_t>(i)];
        w_vals[static_cast<size_t>(i)] = wv;
        Jet wj = jet_const<double>(m, r, u, wv);
        if (r >= 1) wj.c[static_cast<size_t>(wj.space->rank(MultiIndex::unit(m, i)))] = step;
        w_jets.push_back(std::move(wj));
    }
    // straightening: v_i = lo(v_<i) + w_i (hi - lo)(v_<i)
    std::vector<Jet> v_jets;
    std::vector<double> v_vals;
    for (int i = 0; i < m; ++i) {
        Jet lo, hi;
        if (i == 0) {
            // walls of the first variable are constants at a fixed parameter
            lo = const_jet_like(m, r, u, wall_value_at(pipe.lower[0], {}));
            hi = const_jet_like(m, r, u, wall_value_at(pipe.upper[0], {}));
        } else {
            Jet lo_local = wall_jet_local(pipe.lower[static_cast<size_t>(i)], v_vals, r);
            Jet hi_local = wall_jet_local(pipe.upper[static_cast<size_t>(i)], v_vals, r);
            lo = compose_faa(lo_local, v_jets);
            hi = compose_faa(hi_local, v_jets);
        }
        Jet vi = jet_add(lo, multiply(w_jets[static_cast<size_t>(i)], jet_sub(hi, lo)));
        v_vals.push_back(vi.value());
        v_jets.push_back(std::move(vi));
    }
    // power substitution: x_i = v_i^(n_i)
    std::vector<Jet> x_jets;
    std::vector<double> x_vals;
    for (int i = 0; i < m; ++i) {
        Jet xi = compose_univariate(
            power_series(v_vals[static_cast<size_t>(i)],
                         pipe.phi_exponents[static_cast<size_t>(i)], r),
            v_jets[static_cast<size_t>(i)]);
        x_vals.push_back(xi.value());
        x_jets.push_back(std::move(xi));
    }
    // components
    std::vector<Jet> out;
    out.reserve(pipe.components.size());
    for (const auto& comp : pipe.components) {
        Jet local = prepared_jet(comp, x_vals, r);
        out.push_back(compose_faa(local, x_jets));
    }
    return out;
}

VerifyReport verify_chart_norms(const Atlas& atlas, const VerifyOptions& opt) {
    VerifyReport report;
    report.charts_total = atlas.chart_count;
    for (size_t ci = 0; ci < atlas.cells.size(); ++ci) {
        const CellPipeline& pipe = atlas.cells[ci];
        const int m = pipe.m;
        long long total = 1;
        for (int i = 0; i < m; ++i) total *= pipe.grid.side;
        const long long checked =
            std::min<long long>(total, std::max<long long>(1, opt.max_charts));
        // deterministic strided selection of chart indices
        std::vector<long long> chart_ids;
        for (long long k = 0; k < checked; ++k)
            chart_ids.push_back(total <= checked ? k : (k * total) / checked);

        std::vector<ChartVerdict> verdicts(chart_ids.size());
        const int workers =
            std::max(1, std::min<int>(thread_budget(), static_cast<int>(chart_ids.size())));
        auto work = [&](int w) {
            for (size_t idx = static_cast<size_t>(w); idx < chart_ids.size();
                 idx += static_cast<size_t>(workers)) {
                const long long chart = chart_ids[idx];
                ChartVerdict verdict;
                verdict.cell = static_cast<int>(ci);
                verdict.chart = chart;
                // cube origin from the linear index
                std::vector<double> origin(static_cast<size_t>(m));
                long long rem = chart;
                for (int i = 0; i < m; ++i) {
                    origin[static_cast<size_t>(i)] =
                        static_cast<double>(rem % pipe.grid.side) * pipe.grid.step;
                    rem /= pipe.grid.side;
                }
                for (int s = 0; s < opt.samples; ++s) {
                    std::vector<double> u =
                        halton_point(opt.seed + static_cast<uint64_t>(s), std::max(1, m));
                    for (auto& uv : u) uv = opt.margin + (1.0 - 2.0 * opt.margin) * uv;
                    u.resize(static_cast<size_t>(std::max(1, m)));
                    std::vector<Jet> jets = chart_jets(pipe, origin, pipe.grid.step, u);
                    for (size_t comp = 0; comp < jets.size(); ++comp) {
                        const Jet& j = jets[comp];
                        const IndexSpace& sp = *j.space;
                        for (int rk = 0; rk < sp.size(); ++rk) {
                            const double val = std::fabs(j.c[static_cast<size_t>(rk)]) *
                                               sp.factorial_d(rk) / sp.order_factorial_d(rk);
                            if (val > verdict.max_norm) {
                                verdict.max_norm = val;
                                verdict.witness_u = u;
                                verdict.witness_nu = sp.at(rk).to_string();
                                verdict.witness_component = static_cast<int>(comp);
                            }
                        }
                    }
                }
                verdict.pass = verdict.max_norm <= 1.0 + opt.tol;
                verdicts[idx] = std::move(verdict);
            }
        };
        if (workers == 1) {
            work(0);
        } else {
            std::vector<std::thread> pool;
            for (int w = 0; w < workers; ++w) pool.emplace_back(work, w);
            for (auto& th : pool) th.join();
        }
        for (auto& v : verdicts) {
            report.max_norm = std::max(report.max_norm, v.max_norm);
            if (!v.pass) report.pass = false;
            report.charts.push_back(std::move(v));
        }
        report.charts_checked += checked;
    }
    return report;
}

CertVerdict verify_certificate(const Expr& e, const MildCert& cert, const Box& domain,
                               int samples, int max_order, double tol) {
    if (cert.order != kOrderInf && max_order > cert.order)
        fail_input("verification order exceeds the certificate order");
    CertVerdict verdict;
    const int d = domain.arity();
    for (int s = 0; s < samples; ++s) {
        std::vector<double> x = halton_point(static_cast<uint64_t>(s), d);
        for (int i = 0; i < d; ++i)
            x[static_cast<size_t>(i)] =
                domain[i].lo + (1e-4 + (1.0 - 2e-4) * x[static_cast<size_t>(i)]) * domain[i].width();
        Jet j = eval_jet(e, x, max_order);
        const IndexSpace& sp = *j.space;
        for (int rk = 0; rk < sp.size(); ++rk) {
            const MultiIndex& nu = sp.at(rk);
            double bound = claimed_bound(cert, nu.order());
            if (cert.weak) {
                for (int i = 0; i < nu.dim(); ++i)
                    for (int q = 0; q < nu[i]; ++q) bound /= x[static_cast<size_t>(i)];
            }
            const double got = std::fabs(j.c[static_cast<size_t>(rk)]) * sp.factorial_d(rk);
            const double ratio = bound > 0.0 ? got / bound : (got > 0.0 ? 1e300 : 0.0);
            if (ratio > verdict.worst_ratio) {
                verdict.worst_ratio = ratio;
                verdict.witness_x = x;
                verdict.witness_nu = nu.to_string();
            }
        }
    }
    verdict.pass = verdict.worst_ratio <= 1.0 + tol;
    return verdict;
}

bool fd_crosscheck(const Expr& e, const std::vector<std::vector<double>>& points, int order,
                   double rel_tol) {
    if (order < 1 || order > 2) fail_input("finite-difference crosscheck supports orders 1..2");
    const double h = 1e-5;
    for (const auto& x : points) {
        const int d = static_cast<int>(x.size());
        Jet j = eval_jet(e, x, order);
        for (int i = 0; i < d; ++i) {
            std::vector<double> xp = x, xm = x;
            xp[static_cast<size_t>(i)] += h;
            xm[static_cast<size_t>(i)] -= h;
            const double fd = (eval_value(e, xp) - eval_value(e, xm)) / (2 * h);
            const double an = j.coeff(MultiIndex::unit(d, i));
            if (std::fabs(an - fd) > rel_tol * std::max({1.0, std::fabs(an), std::fabs(fd)}))
                return false;
            if (order >= 2) {
                const double h2 = 1e-4; // wider step: second differences amplify roundoff
                std::vector<double> xp2 = x, xm2 = x;
                xp2[static_cast<size_t>(i)] += h2;
                xm2[static_cast<size_t>(i)] -= h2;
                const double f0 = eval_value(e, x);
                const double fdd =
                    (eval_value(e, xp2) - 2 * f0 + eval_value(e, xm2)) / (h2 * h2);
                MultiIndex two = MultiIndex::unit(d, i).plus(MultiIndex::unit(d, i));
                const double an2 = j.derivative(two);
                if (std::fabs(an2 - fdd) > rel_tol * std::max({1.0, std::fabs(an2), std::fabs(fdd)}))
                    return false;
            }
        }
    }
    return true;
}

namespace {

// Invert the coordinate back-map encoded by the first m (single-term,
// constant-unit) components: x_i = c_i * prod_h y_h^(mu_ih).
std::vector<double> kappa_invert(const CellPipeline& pipe, const std::vector<double>& x) {
    const int m = pipe.m;
    std::vector<double> y(static_cast<size_t>(m));
    for (int i = 0; i < m; ++i) {
        const NumPrepared& comp = pipe.components[static_cast<size_t>(i)];
        if (comp.terms.size() != 1)
            fail_input("coordinate component is not a single monomial");
        const NumTerm& term = comp.terms[0];
        double c = term.coeff;
        if (comp.unit->kind == ExprKind::Const)
            c *= comp.unit->value;
        else
            fail_input("coordinate component has a non-constant unit");
        double rest = c;
        for (int h = 0; h < i; ++h) {
            const double mu = term.mu[static_cast<size_t>(h)];
            if (mu != 0.0) rest *= std::pow(y[static_cast<size_t>(h)], mu);
        }
        const double mii = term.mu[static_cast<size_t>(i)];
        if (mii == 0.0) fail_input("coordinate component does not involve its own variable");
        y[static_cast<size_t>(i)] =
            std::pow(x[static_cast<size_t>(i)] / rest, 1.0 / mii);
    }
    return y;
}

} // namespace

CoverageReport verify_coverage(const Family& fam, const Atlas& atlas, int samples,
                               uint64_t seed) {
    CoverageReport report;
    report.samples = samples;
    if (atlas.cells.empty()) {
        report.pass = false;
        report.failure = "atlas has no cells";
        return report;
    }
    const CellPipeline& pipe = atlas.cells[0];
    if (fam.m == 0) return report;
    auto xs = sample_cell(fam, atlas.t, samples, 1e-6, seed);
    for (const auto& x : xs) {
        std::vector<double> y, u;
        try {
            y = kappa_invert(pipe, x);
            u = invert_point(pipe, y);
        } catch (const Error& e) {
            report.pass = false;
            report.failure = std::string("inversion failed: ") + e.what();
            return report;
        }
        for (double ui : u) {
            if (!(ui > -1e-9 && ui < 1.0 + 1e-9)) {
                report.pass = false;
                report.failure = "inverted point leaves the unit cube";
                return report;
            }
        }
        // reproduce the graph point through the selected chart
        std::vector<double> vv = straightened_point(pipe, u);
        std::vector<double> xx = power_point(pipe, vv);
        const auto want = evaluate(fam, atlas.t, x, 0.0);
        for (int c = 0; c < static_cast<int>(pipe.components.size()); ++c) {
            const double got = component_value(pipe.components[static_cast<size_t>(c)], xx);
            const double expect = c < fam.m ? x[static_cast<size_t>(c)]
                                            : want.values[static_cast<size_t>(c - fam.m)];
            if (std::fabs(got - expect) > 1e-7 * std::max(1.0, std::fabs(expect))) {
                report.pass = false;
                report.failure = "chart image does not reproduce the graph point";
                return report;
            }
        }
    }
    return report;
}

std::string emit_report(const Atlas& atlas, const VerifyReport& vr, const VerifyOptions& opt,
                        const CoverageReport* coverage, const GrowthFit* growth) {
    OJson j;
    OJson meta;
    meta["input_digest"] = atlas.input_digest;
    meta["t"] = atlas.t;
    meta["r"] = atlas.r;
    meta["mode"] = atlas.mode == AtlasMode::Improved ? "improved" : "standard";
    meta["seed"] = opt.seed;
    meta["samples"] = opt.samples;
    meta["margin"] = opt.margin;
    meta["tol"] = opt.tol;
    j["meta"] = meta;
    OJson charts = OJson::array();
    for (const auto& v : vr.charts) {
        OJson cj;
        cj["cell"] = v.cell;
        cj["chart"] = v.chart;
        cj["max_norm"] = v.max_norm;
        cj["pass"] = v.pass;
        if (!v.pass) {
            cj["witness_u"] = v.witness_u;
            cj["witness_order"] = v.witness_nu;
            cj["witness_component"] = v.witness_component;
        }
        charts.push_back(cj);
    }
    j["charts"] = charts;
    OJson summary;
    summary["charts_total"] = vr.charts_total;
    summary["charts_checked"] = vr.charts_checked;
    summary["max_norm"] = vr.max_norm;
    summary["pass"] = vr.pass;
    j["summary"] = summary;
    if (coverage) {
        OJson cj;
        cj["samples"] = coverage->samples;
        cj["pass"] = coverage->pass;
        if (!coverage->failure.empty()) cj["failure"] = coverage->failure;
        j["coverage"] = cj;
    }
    if (growth) {
        OJson gj;
        gj["slope"] = growth->slope;
        OJson rows = OJson::array();
        for (const auto& row : growth->rows) {
            OJson rj;
            rj["r"] = row.r;
            rj["charts"] = row.count;
            rj["A_total"] = row.a_total;
            rows.push_back(rj);
        }
        gj["rows"] = rows;
        j["growth"] = gj;
    }
    OJson audits = OJson::array();
    for (const auto& cell : atlas.cells) audits.push_back(audit_to_json(cell.audit));
    j["certificate_audit"] = audits;
    return j.dump(2);
}

} // namespace mildatlas
