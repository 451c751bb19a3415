#pragma once

// Verification: jets pushed through the chart pipeline against the claimed
// norm bound, certificate audits against jet measurements, low-order finite
// difference crosschecks, coverage sampling and deterministic reports.

#include <string>
#include <vector>

#include "atlas.hpp"
#include "jet.hpp"

namespace mildatlas {

struct VerifyOptions {
    int samples = 500;
    double margin = 1e-9; // boundary margin inside each cube
    double tol = 1e-9;    // pass iff norm <= 1 + tol
    long long max_charts = 256; // explicit-check cap per cell (strided subset beyond)
    uint64_t seed = 0;
};

struct ChartVerdict {
    int cell = 0;
    long long chart = 0; // linear grid index
    double max_norm = 0.0;
    bool pass = true;
    std::vector<double> witness_u; // cube-local sample of the worst norm
    std::string witness_nu;
    int witness_component = 0;
};

struct VerifyReport {
    bool pass = true;
    long long charts_total = 0;
    long long charts_checked = 0;
    double max_norm = 0.0;
    std::vector<ChartVerdict> charts;
};

// Jets of every chart component at the cube-local point u, as functions of
// the cube coordinates. origin/step place the cube inside [0,1]^m.
std::vector<Jet> chart_jets(const CellPipeline& pipe, const std::vector<double>& origin,
                            double step, const std::vector<double>& u);

VerifyReport verify_chart_norms(const Atlas& atlas, const VerifyOptions& opt = {});

struct CertVerdict {
    bool pass = true;
    double worst_ratio = 0.0; // max of measured/claimed
    std::vector<double> witness_x;
    std::string witness_nu;
};

// Checks the certified derivative bounds at interior samples of the domain,
// with the boundary-weight factor when the certificate is weak.
CertVerdict verify_certificate(const Expr& e, const MildCert& cert, const Box& domain,
                               int samples, int max_order, double tol = 1e-9);

// Jet coefficients of orders <= 2 against central finite differences.
bool fd_crosscheck(const Expr& e, const std::vector<std::vector<double>>& points, int order,
                   double rel_tol = 1e-6);

struct CoverageReport {
    bool pass = true;
    int samples = 0;
    std::string failure;
};

// Samples the graph over the cell and checks each point reproduces through
// exactly the chart the inverted pipeline selects.
CoverageReport verify_coverage(const Family& fam, const Atlas& atlas, int samples = 500,
                               uint64_t seed = 0);

std::string emit_report(const Atlas& atlas, const VerifyReport& vr, const VerifyOptions& opt,
                        const CoverageReport* coverage = nullptr,
                        const GrowthFit* growth = nullptr);

// Family-level certification: uniform derivative-bound certificates for every
// component, wall diagnostics and the audit trail, as one JSON document.
// ok_out (optional) reports whether every certificate was produced.
std::string certify_family_report(const Family& fam, bool* ok_out = nullptr);

std::string growth_report(const Family& fam, const GrowthFit& fit, AtlasMode mode,
                          const std::vector<double>& t);

int thread_budget(); // MILDATLAS_THREADS, default hardware concurrency

} // namespace mildatlas
