#include "expr.hpp"

#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstring>

namespace mildatlas {

namespace {

Expr make(ExprKind k) {
    auto n = std::make_shared<ExprNode>();
    n->kind = k;
    return n;
}

} // namespace

Expr ex_const(double v) {
    auto n = std::make_shared<ExprNode>();
    n->kind = ExprKind::Const;
    n->value = v;
    return n;
}

Expr ex_var(int index) {
    if (index < 0) fail_input("variable index must be >= 0");
    auto n = std::make_shared<ExprNode>();
    n->kind = ExprKind::Var;
    n->var = index;
    return n;
}

Expr ex_add(Expr a, Expr b) {
    auto n = make(ExprKind::Add);
    std::const_pointer_cast<ExprNode>(n)->args = {std::move(a), std::move(b)};
    return n;
}

Expr ex_sub(Expr a, Expr b) {
    auto n = make(ExprKind::Sub);
    std::const_pointer_cast<ExprNode>(n)->args = {std::move(a), std::move(b)};
    return n;
}

Expr ex_neg(Expr a) {
    auto n = make(ExprKind::Neg);
    std::const_pointer_cast<ExprNode>(n)->args = {std::move(a)};
    return n;
}

Expr ex_mul(Expr a, Expr b) {
    auto n = make(ExprKind::Mul);
    std::const_pointer_cast<ExprNode>(n)->args = {std::move(a), std::move(b)};
    return n;
}

Expr ex_recip(Expr a, std::optional<Interval> dom) {
    auto n = std::make_shared<ExprNode>();
    n->kind = ExprKind::Recip;
    n->args = {std::move(a)};
    n->dom = dom;
    return n;
}

Expr ex_exp(Expr a) {
    auto n = make(ExprKind::Exp);
    std::const_pointer_cast<ExprNode>(n)->args = {std::move(a)};
    return n;
}

Expr ex_log1p(Expr a, std::optional<Interval> dom) {
    auto n = std::make_shared<ExprNode>();
    n->kind = ExprKind::Log1p;
    n->args = {std::move(a)};
    n->dom = dom;
    return n;
}

Expr ex_pow(Expr a, double mu, std::optional<Interval> dom) {
    auto n = std::make_shared<ExprNode>();
    n->kind = ExprKind::Pow;
    n->args = {std::move(a)};
    n->exponent = mu;
    n->dom = dom;
    return n;
}

Expr ex_compose(Expr outer, std::vector<Expr> inners) {
    if (inners.empty()) fail_input("composition needs at least one inner function");
    auto n = std::make_shared<ExprNode>();
    n->kind = ExprKind::Compose;
    n->args.push_back(std::move(outer));
    for (auto& g : inners) n->args.push_back(std::move(g));
    return n;
}

int expr_arity(const Expr& e) {
    if (!e) fail_internal("null expression");
    switch (e->kind) {
    case ExprKind::Const: return 0;
    case ExprKind::Var: return e->var + 1;
    case ExprKind::Compose: {
        int a = 0;
        for (size_t i = 1; i < e->args.size(); ++i)
            a = std::max(a, expr_arity(e->args[i]));
        return a;
    }
    default: {
        int a = 0;
        for (const auto& c : e->args) a = std::max(a, expr_arity(c));
        return a;
    }
    }
}

double eval_value(const Expr& e, const std::vector<double>& x) {
    if (!e) fail_internal("null expression");
    switch (e->kind) {
    case ExprKind::Const: return e->value;
    case ExprKind::Var:
        if (e->var >= static_cast<int>(x.size()))
            fail_input("evaluation point has too few coordinates");
        return x[static_cast<size_t>(e->var)];
    case ExprKind::Add: return eval_value(e->args[0], x) + eval_value(e->args[1], x);
    case ExprKind::Sub: return eval_value(e->args[0], x) - eval_value(e->args[1], x);
    case ExprKind::Neg: return -eval_value(e->args[0], x);
    case ExprKind::Mul: return eval_value(e->args[0], x) * eval_value(e->args[1], x);
    case ExprKind::Recip: {
        const double u = eval_value(e->args[0], x);
        if (u == 0.0) fail_input("division by zero");
        if (e->dom && !e->dom->contains(u))
            fail_input("reciprocal argument outside declared definedness box");
        return 1.0 / u;
    }
    case ExprKind::Exp: return std::exp(eval_value(e->args[0], x));
    case ExprKind::Log1p: {
        const double u = eval_value(e->args[0], x);
        if (u <= -1.0) fail_input("log1p argument <= -1");
        if (e->dom && !e->dom->contains(u))
            fail_input("log1p argument outside declared definedness box");
        return std::log1p(u);
    }
    case ExprKind::Pow: {
        const double u = eval_value(e->args[0], x);
        if (u <= 0.0) fail_input("real power of a non-positive base");
        if (e->dom && !e->dom->contains(u))
            fail_input("power argument outside declared definedness box");
        return std::pow(u, e->exponent);
    }
    case ExprKind::Compose: {
        std::vector<double> inner;
        inner.reserve(e->args.size() - 1);
        for (size_t i = 1; i < e->args.size(); ++i)
            inner.push_back(eval_value(e->args[i], x));
        return eval_value(e->args[0], inner);
    }
    }
    fail_internal("unhandled expression kind");
}

Expr certify_definedness(const Expr& e, const Box& b) {
    if (!e) fail_internal("null expression");
    std::vector<Expr> kids;
    kids.reserve(e->args.size());
    if (e->kind == ExprKind::Compose) {
        kids.push_back(e->args[0]); // outer certified against the inner ranges below
        std::vector<Interval> inner_ranges;
        for (size_t i = 1; i < e->args.size(); ++i) {
            kids.push_back(certify_definedness(e->args[i], b));
            inner_ranges.push_back(enclose(kids.back(), b));
        }
        kids[0] = certify_definedness(e->args[0], Box(std::move(inner_ranges)));
    } else {
        for (const auto& c : e->args) kids.push_back(certify_definedness(c, b));
    }
    auto n = std::make_shared<ExprNode>(*e);
    n->args = std::move(kids);
    switch (e->kind) {
    case ExprKind::Recip:
    case ExprKind::Log1p:
    case ExprKind::Pow: {
        const Interval arg = enclose(n->args[0], b);
        if (e->kind == ExprKind::Recip && arg.contains_zero())
            fail_input("cannot certify reciprocal: argument enclosure contains zero");
        if (e->kind == ExprKind::Log1p && arg.lo <= -1.0)
            fail_input("cannot certify log1p: argument enclosure reaches -1");
        if (e->kind == ExprKind::Pow && arg.lo <= 0.0)
            fail_input("cannot certify real power: argument enclosure reaches 0");
        n->dom = arg;
        break;
    }
    default:
        break;
    }
    return n;
}

// --- parser ------------------------------------------------------------------

namespace {

struct Parser {
    const std::string& text;
    const std::map<std::string, int>& vars;
    size_t pos = 0;

    void skip_ws() {
        while (pos < text.size() && std::isspace(static_cast<unsigned char>(text[pos]))) ++pos;
    }

    bool eat(char c) {
        skip_ws();
        if (pos < text.size() && text[pos] == c) {
            ++pos;
            return true;
        }
        return false;
    }

    void expect(char c) {
        if (!eat(c)) fail_input(std::string("expected '") + c + "' at position " + std::to_string(pos) + " in expression");
    }

    bool peek_is(char c) {
        skip_ws();
        return pos < text.size() && text[pos] == c;
    }

    [[noreturn]] void error(const std::string& msg) {
        fail_input("expression parse error at position " + std::to_string(pos) + ": " + msg);
    }

    double parse_number() {
        skip_ws();
        const char* begin = text.c_str() + pos;
        char* end = nullptr;
        const double v = std::strtod(begin, &end);
        if (end == begin) error("expected a number");
        pos += static_cast<size_t>(end - begin);
        return v;
    }

    bool number_ahead() {
        skip_ws();
        if (pos >= text.size()) return false;
        const char c = text[pos];
        return std::isdigit(static_cast<unsigned char>(c)) || c == '.';
    }

    // number, p/q, parenthesized, possibly negated
    double parse_exponent() {
        skip_ws();
        if (eat('(')) {
            const double v = parse_exponent();
            expect(')');
            return v;
        }
        if (eat('-')) return -parse_exponent();
        const double num = parse_number();
        skip_ws();
        if (pos < text.size() && text[pos] == '/') {
            ++pos;
            const double den = parse_number();
            if (den == 0.0) error("zero denominator in rational exponent");
            return num / den;
        }
        return num;
    }

    std::string parse_ident() {
        skip_ws();
        size_t start = pos;
        while (pos < text.size() &&
               (std::isalnum(static_cast<unsigned char>(text[pos])) || text[pos] == '_'))
            ++pos;
        if (start == pos) error("expected an identifier");
        return text.substr(start, pos - start);
    }

    bool ident_ahead() {
        skip_ws();
        return pos < text.size() &&
               (std::isalpha(static_cast<unsigned char>(text[pos])) || text[pos] == '_');
    }

    Expr parse_atom() {
        skip_ws();
        if (eat('(')) {
            Expr e = parse_sum();
            expect(')');
            return e;
        }
        if (number_ahead()) return ex_const(parse_number());
        if (!ident_ahead()) error("expected a number, identifier or '('");
        const std::string id = parse_ident();
        if (id == "exp") {
            expect('(');
            Expr a = parse_sum();
            expect(')');
            return ex_exp(std::move(a));
        }
        if (id == "log1p") {
            expect('(');
            Expr a = parse_sum();
            expect(')');
            return ex_log1p(std::move(a));
        }
        if (id == "pow") {
            expect('(');
            Expr a = parse_sum();
            expect(',');
            const double mu = parse_exponent();
            expect(')');
            return make_power(std::move(a), mu);
        }
        auto it = vars.find(id);
        if (it == vars.end()) error("unknown identifier '" + id + "'");
        return ex_var(it->second);
    }

    // Natural powers lower to products so they stay total on any domain.
    static Expr make_power(Expr base, double mu) {
        const double r = std::round(mu);
        if (r == mu && r >= 0.0 && r <= 32.0) {
            const int n = static_cast<int>(r);
            if (n == 0) return ex_const(1.0);
            Expr acc = base;
            for (int i = 1; i < n; ++i) acc = ex_mul(acc, base);
            return acc;
        }
        return ex_pow(std::move(base), mu);
    }

    Expr parse_power() {
        Expr base = parse_atom();
        skip_ws();
        if (peek_is('^')) {
            ++pos;
            const double mu = parse_exponent();
            return make_power(std::move(base), mu);
        }
        return base;
    }

    Expr parse_factor() {
        skip_ws();
        if (eat('-')) return ex_neg(parse_factor());
        return parse_power();
    }

    Expr parse_term() {
        Expr e = parse_factor();
        for (;;) {
            skip_ws();
            if (peek_is('*')) {
                ++pos;
                e = ex_mul(std::move(e), parse_factor());
            } else if (peek_is('/')) {
                ++pos;
                e = ex_mul(std::move(e), ex_recip(parse_factor()));
            } else {
                return e;
            }
        }
    }

    Expr parse_sum() {
        Expr e = parse_term();
        for (;;) {
            skip_ws();
            if (peek_is('+')) {
                ++pos;
                e = ex_add(std::move(e), parse_term());
            } else if (peek_is('-')) {
                ++pos;
                e = ex_sub(std::move(e), parse_term());
            } else {
                return e;
            }
        }
    }
};

} // namespace

Expr parse_expr(const std::string& text, const std::map<std::string, int>& vars) {
    Parser p{text, vars};
    Expr e = p.parse_sum();
    p.skip_ws();
    if (p.pos != text.size())
        fail_input("unexpected trailing characters in expression at position " +
                   std::to_string(p.pos));
    return e;
}

std::string format_double(double v) {
    char buf[40];
    // Shortest representation that round-trips.
    for (int prec = 1; prec <= 17; ++prec) {
        std::snprintf(buf, sizeof(buf), "%.*g", prec, v);
        double back = 0.0;
        std::sscanf(buf, "%lf", &back);
        if (back == v) break;
    }
    return std::string(buf);
}

namespace {

// precedence: 0 sum, 1 product, 2 unary, 3 atom
std::string print_rec(const Expr& e, const std::vector<std::string>& names, int parent_prec) {
    std::string s;
    int prec = 3;
    switch (e->kind) {
    case ExprKind::Const:
        s = format_double(e->value);
        if (e->value < 0) prec = 2;
        break;
    case ExprKind::Var:
        if (e->var >= static_cast<int>(names.size())) fail_internal("variable index without a name");
        s = names[static_cast<size_t>(e->var)];
        break;
    case ExprKind::Add:
        s = print_rec(e->args[0], names, 0) + " + " + print_rec(e->args[1], names, 1);
        prec = 0;
        break;
    case ExprKind::Sub:
        s = print_rec(e->args[0], names, 0) + " - " + print_rec(e->args[1], names, 1);
        prec = 0;
        break;
    case ExprKind::Neg:
        s = "-" + print_rec(e->args[0], names, 2);
        prec = 2;
        break;
    case ExprKind::Mul:
        s = print_rec(e->args[0], names, 1) + " * " + print_rec(e->args[1], names, 2);
        prec = 1;
        break;
    case ExprKind::Recip:
        s = "1 / " + print_rec(e->args[0], names, 2);
        prec = 1;
        break;
    case ExprKind::Exp:
        s = "exp(" + print_rec(e->args[0], names, 0) + ")";
        break;
    case ExprKind::Log1p:
        s = "log1p(" + print_rec(e->args[0], names, 0) + ")";
        break;
    case ExprKind::Pow:
        s = "pow(" + print_rec(e->args[0], names, 0) + ", " + format_double(e->exponent) + ")";
        break;
    case ExprKind::Compose:
        fail_input("composition nodes have no textual form");
    }
    if (prec < parent_prec) return "(" + s + ")";
    return s;
}

} // namespace

std::string print_expr(const Expr& e, const std::vector<std::string>& var_names) {
    return print_rec(e, var_names, 0);
}

} // namespace mildatlas
