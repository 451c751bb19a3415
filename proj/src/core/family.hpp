#pragma once

// Data model and validation for prepared families: cells cut out by walls,
// components of the form b_j(t,x) F(b(t,x)) with monomial terms
// a_i(t) x^mu_i, and the structural checks the chart pipeline relies on
// (walls into (0,1), non-vanishing units, bounded first derivatives).

#include <optional>
#include <string>
#include <vector>

#include "certcalc.hpp"
#include "expr.hpp"
#include "interval.hpp"

#include <boost/multiprecision/cpp_int.hpp>

namespace mildatlas {

using Rational = boost::multiprecision::cpp_rational;

struct ExponentVal {
    double v = 0.0;
    std::optional<Rational> exact; // set when given as p/q; used by exponent rounding
};

struct PreparedTerm {
    Expr a;                      // coefficient, an expression over t1..tk
    std::vector<ExponentVal> mu; // one exponent per cell variable of the host
};

struct PreparedFunction {
    std::vector<PreparedTerm> terms;
    Expr unit; // over the term values b1..bN
    int j = 0; // distinguished term, 0-based
};

enum class WallKind { Constant, Param, Prepared };

struct WallSpec {
    WallKind kind = WallKind::Constant;
    double constant = 0.0;
    Expr param;                  // over t (kind Param)
    PreparedFunction prepared;   // over (t, x_{<i}) (kind Prepared)
};

struct Cell {
    int m = 0;
    std::vector<WallSpec> lower; // one per variable
    std::vector<WallSpec> upper;
};

struct Family {
    int k = 0;
    int m = 0;
    int n = 0;
    Box T; // arity k
    Cell cell;
    std::vector<PreparedFunction> components; // n - m entries
    std::string digest;                       // content digest of the source document
    std::string source;                       // canonical serialized form
};

// Parses and fully validates a family document. Throws Error with a
// diagnostic listing every violated check.
Family parse_family(const std::string& json_text);

std::string serialize_family(const Family& fam);

// Evaluation of one member.
struct EvalResult {
    std::vector<double> values; // one per component
    bool member = false;
};
EvalResult evaluate(const Family& fam, const std::vector<double>& t,
                    const std::vector<double>& x, double boundary_margin = 1e-9);

double term_value(const PreparedTerm& term, const std::vector<double>& t,
                  const std::vector<double>& x);
double prepared_value(const PreparedFunction& pf, const std::vector<double>& t,
                      const std::vector<double>& x);
double wall_value(const WallSpec& w, const std::vector<double>& t,
                  const std::vector<double>& x_prefix);

// Conservative interval ranges.
Interval monomial_range(const std::vector<ExponentVal>& mu, const Box& hull);
Interval term_range(const PreparedTerm& term, const Box& t_box, const Box& hull);
Interval prepared_range(const PreparedFunction& pf, const Box& t_box, const Box& hull);
Interval wall_range(const WallSpec& w, const Box& t_box, const Box& hull_prefix);

// Per-coordinate hull of the cell over a parameter box (walls replaced by
// their certified range hull).
Box cell_hull(const Family& fam, const Box& t_box);

// Deterministic interior samples of the cell at a fixed parameter, walking
// the walls coordinate by coordinate.
std::vector<std::vector<double>> sample_cell(const Family& fam, const std::vector<double>& t,
                                             int count, double margin = 1e-3,
                                             uint64_t seed = 0);

// Certified uniform bound on the first x-derivatives of every monomial term
// of every component and prepared wall, or a witness of a blow-up.
struct C1Entry {
    std::string where; // "component 3" or "upper wall of x2"
    int term = 0;      // 0-based
    int dir = 0;       // 0-based x-direction
    double bound = 0.0;
};
struct C1Result {
    bool ok = true;
    double max_bound = 0.0;
    std::vector<C1Entry> entries;
    std::string failure;
    std::vector<double> witness_t, witness_x;
    double witness_value = 0.0;
};
C1Result check_c1_bounded(const Family& fam, const Box& t_box, int t_depth = 6);
C1Result check_c1_bounded(const Family& fam, int t_depth = 6); // over the whole T

// Structural and boundedness diagnostics for the cell walls.
struct WallDiagnostics {
    bool ok = true;
    std::vector<std::string> notes;      // per-wall structural summary
    std::vector<std::string> violations; // failures, empty when ok
};
WallDiagnostics wall_prepared_check(const Family& fam);

} // namespace mildatlas
