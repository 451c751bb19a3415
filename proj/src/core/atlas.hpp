#pragma once

// The chart pipeline. At a fixed parameter value the cell is pulled back
// through a power substitution, straightened onto the unit cube by affine
// stages built from the transformed walls, and subdivided into cubes whose
// size comes from the composite certificate. Every chart then carries a
// certificate asserting pointwise norm at most 1 up to order r.

#include <string>
#include <vector>

#include "certcalc.hpp"
#include "family.hpp"

namespace mildatlas {

enum class AtlasMode { Standard, Improved };

// Monomial data with the parameter folded in.
struct NumTerm {
    double coeff = 0.0;
    std::vector<double> mu;
};

// b_j(x) * F(b(x)) over cell variables, coefficients numeric.
struct NumPrepared {
    std::vector<NumTerm> terms;
    Expr unit;        // over b1..bN
    int j = 0;
    double unit_sign = 1.0; // certified sign of the unit on the range
};

// A wall of the pulled-back cell: the root-th root of the original wall
// through the power map on the prefix variables.
struct NumWall {
    bool is_const = true;
    double value = 0.0;            // const case
    NumPrepared prepared;          // else: terms over the i-1 prefix variables
    std::vector<double> phi_exponents; // power-map exponents of the prefix
    double root = 1.0;
};

struct CubeGrid {
    long long side = 1;
    double step = 1.0;
};

struct CellPipeline {
    int m = 0;
    int n = 0;
    int r = 1;
    AtlasMode mode = AtlasMode::Standard;
    std::vector<double> t;
    std::vector<double> phi_exponents;     // n_1..n_m
    std::vector<NumWall> lower, upper;     // transformed walls, one per variable
    std::vector<NumPrepared> components;   // n entries: m coordinates then values
    std::vector<MildCert> wall_certs_lower, wall_certs_upper; // (A,1,0) up to r
    std::vector<MildCert> component_certs; // after the power substitution
    MildCert composite;                    // (A_total, 1, 0) up to r after straightening
    double growth_base = 1.0;              // A_total / r^growth_exponent
    int growth_exponent = 0;
    CubeGrid grid;
    MildCert chart_cert;                   // the per-chart norm <= 1 assertion
    Audit audit;
};

struct Atlas {
    std::string input_digest;
    std::vector<double> t;
    int r = 1;
    AtlasMode mode = AtlasMode::Standard;
    int m = 0;
    int n = 0;
    std::string note; // e.g. fallback reason in improved mode
    std::vector<CellPipeline> cells;
    long long chart_count = 0;
    double predicted_count = 0.0;
};

// Pulled-back cell with certificates: transformed walls plus certificates for
// every component composed with the power map.
struct PoweredCell {
    std::vector<double> phi_exponents;
    std::vector<NumWall> lower, upper;
    std::vector<MildCert> wall_certs_lower, wall_certs_upper;
    std::vector<NumPrepared> components;
    std::vector<MildCert> component_certs;
};
PoweredCell power_substitute_cell(const Family& fam, const std::vector<double>& t, int r,
                                  AtlasMode mode, Audit* audit = nullptr);

// Composite certificate of (component o straightening) for all components,
// folded to the (A, 0)-mild form.
MildCert straighten(const PoweredCell& pc, int m, int r, Audit* audit = nullptr);

// Cube grid from the composite certificate; the roundtrip through the growth
// base is the exact arithmetic the emitted counts commit to.
CubeGrid subdivide(const MildCert& composite, int r, int growth_exponent,
                   double* growth_base_out = nullptr);

Atlas build_atlas(const Family& fam, const std::vector<double>& t, int r,
                  AtlasMode mode = AtlasMode::Standard);

// Wall normalization for the improved exponent schedule (m >= 2): the walls
// of x2 are rescaled by their shallower side and the leftover exponent is
// rounded to an integer by a power substitution in x1. Falls back to the
// identity when the wall shapes are outside the handled cases.
struct ImprovedRewrite {
    Family fam;
    bool identity = true;
    std::string note;
    // back-map from the rewritten cell to the original coordinates:
    // x1 = y1^e1, x2 = c2(t) * S * y1^e21 * y2, x_i = y_i otherwise
    Rational e1 = 1;
    Rational e21 = 0;
    Expr c2;
    double scale = 1.0;
};
ImprovedRewrite improved_normalize(const Family& fam, int r);

struct GrowthRow {
    int r = 0;
    long long count = 0;
    double a_total = 0.0;
};
struct GrowthFit {
    double slope = 0.0;
    std::vector<GrowthRow> rows;
};
GrowthFit growth_fit(const Family& fam, const std::vector<double>& t, int r_min, int r_max,
                     AtlasMode mode = AtlasMode::Standard);

std::string atlas_to_json(const Atlas& atlas);
Atlas atlas_from_json(const std::string& text);

// Pipeline evaluation helpers (shared with the verification harness).
double wall_value_at(const NumWall& w, const std::vector<double>& prefix);
// u in (0,1)^m -> straightened point v in the pulled-back cell
std::vector<double> straightened_point(const CellPipeline& pipe, const std::vector<double>& u);
// v -> x = phi(v) in the original cell coordinates
std::vector<double> power_point(const CellPipeline& pipe, const std::vector<double>& v);
double component_value(const NumPrepared& comp, const std::vector<double>& x);
// x in the cell -> u in [0,1]^m (inverse of the two stages)
std::vector<double> invert_point(const CellPipeline& pipe, const std::vector<double>& x);

} // namespace mildatlas
