#pragma once

// Expression trees for coefficient functions, units and catalog functions:
// constants, variables, ring operations, reciprocal, exp, log1p and real
// powers. Partial operations (reciprocal, log1p, pow) carry a declared
// definedness interval for their argument once certified.

#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "interval.hpp"

namespace mildatlas {

enum class ExprKind { Const, Var, Add, Sub, Neg, Mul, Recip, Exp, Log1p, Pow, Compose };

struct ExprNode {
    ExprKind kind = ExprKind::Const;
    double value = 0.0;                // Const
    int var = -1;                      // Var
    double exponent = 0.0;             // Pow
    std::vector<Expr> args;            // children; Compose: [outer, inner_1..inner_d]
    std::optional<Interval> dom;       // certified argument range of a partial node
};

Expr ex_const(double v);
Expr ex_var(int index);
Expr ex_add(Expr a, Expr b);
Expr ex_sub(Expr a, Expr b);
Expr ex_neg(Expr a);
Expr ex_mul(Expr a, Expr b);
Expr ex_recip(Expr a, std::optional<Interval> dom = std::nullopt);
Expr ex_exp(Expr a);
Expr ex_log1p(Expr a, std::optional<Interval> dom = std::nullopt);
Expr ex_pow(Expr a, double mu, std::optional<Interval> dom = std::nullopt);
Expr ex_compose(Expr outer, std::vector<Expr> inners);

// Number of variables the tree references (1 + max var index), 0 if none.
int expr_arity(const Expr& e);

double eval_value(const Expr& e, const std::vector<double>& x);

// Recomputes declared definedness intervals over the box and returns an
// annotated copy. Throws when a partial node's argument enclosure touches
// its singular set, i.e. the expression is not total on the box.
Expr certify_definedness(const Expr& e, const Box& b);

// --- fixed text grammar -----------------------------------------------------
//
//   expr   := term (('+'|'-') term)*
//   term   := factor (('*'|'/') factor)*
//   factor := '-' factor | power
//   power  := atom ('^' exponent)?
//   atom   := number | ident | '(' expr ')'
//           | 'exp' '(' expr ')' | 'log1p' '(' expr ')'
//           | 'pow' '(' expr ',' exponent ')'
//   exponent := number | number '/' number | '(' exponent ')' | '-' exponent
//
// Identifiers are resolved through `vars` (e.g. t1..tk, x1..xm, b1..bN).

Expr parse_expr(const std::string& text, const std::map<std::string, int>& vars);

// Prints in the grammar above; numbers use shortest round-trip form.
std::string print_expr(const Expr& e, const std::vector<std::string>& var_names);

std::string format_double(double v);

} // namespace mildatlas
