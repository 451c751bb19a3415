#pragma once

// The algebra of derivative-bound certificates. A certificate asserts, for
// the function it travels with,
//
//   |f^(nu)(x)| <= B^(C+1) * A^|nu| * |nu|!^(C+1)      for 1 <= |nu| <= order
//   |f(x)|      <= value_bound
//
// multiplied by 1/x^nu on (0,1)^d when the weak flag is set. Operations
// return new certificates whose constants come from closed-form composition,
// product, sum and power-substitution rules; soundness of every rule is
// checked against jet measurements in the test harness.

#include <optional>
#include <string>
#include <vector>

#include "common.hpp"
#include "interval.hpp"

namespace mildatlas {

struct MildCert {
    double A = 1.0;
    double B = 1.0;
    double C = 0.0;
    Order order = kOrderInf;
    bool weak = false;
    int arity = 1;
    // Certified bound on |f| itself (the order-zero claim). Defaults to
    // B^(C+1); composition rules keep it separate because their (A, B)
    // constants only govern derivatives of order >= 1.
    double value_bound = 1.0;

    std::string to_string() const;
};

MildCert make_cert(double A, double B, double C, Order order, bool weak, int arity);
MildCert make_cert(double A, double B, double C, Order order, bool weak, int arity,
                   double value_bound);

// Bound claimed for derivative order n (weak certificates additionally divide
// by x^nu; the caller applies that factor pointwise).
double claimed_bound(const MildCert& c, int n);

struct GevreyCert {
    double M = 1.0;
    double R = 1.0;
    double alpha = 1.0;
};

// A record of every certificate-producing call, for reporting.
struct AuditEntry {
    std::string op;
    std::vector<MildCert> inputs;
    MildCert output;
    std::string note;
};
struct Audit {
    std::vector<AuditEntry> entries;
};

// Class change between the two equivalent bound families; requires non-weak.
GevreyCert to_gevrey(const MildCert& c);
MildCert from_gevrey(const GevreyCert& g, int arity, Order order = kOrderInf);

// Certificate for f(g(x)) from certificates of f (over d variables) and of
// the map g into f's domain. Requires equal C; f must not be weak; the weak
// flag of g carries over (the mild-after-weak composition rule).
MildCert compose(const MildCert& f, const MildCert& g, Audit* audit = nullptr);

// Same constants, with the weak flag demanded on g and set on the output.
MildCert compose_weak(const MildCert& f, const MildCert& g, Audit* audit = nullptr);

// Product of l functions on one domain: (sum A_i, prod B_i, C), which for
// identical factors is the (lA, B^l, C) rule.
MildCert product(const std::vector<MildCert>& certs, Audit* audit = nullptr);

// Sum rule: A' = max A_i, B' = (sum B_i^(C+1))^(1/(C+1)).
MildCert sum(const std::vector<MildCert>& certs, Audit* audit = nullptr);

// Monotone weakening to a higher smoothness class C2 >= C.
MildCert lift_C(const MildCert& c, double C2, Audit* audit = nullptr);

// Certificate for factor * f given one for f.
MildCert scale_cert(const MildCert& c, double factor, Audit* audit = nullptr);

// Certificate for any first partial d f / d x_i of a non-weak function:
// (2^(C+1) A, B A^(1/(C+1)), C), order one lower.
MildCert derivative_cert(const MildCert& c, Audit* audit = nullptr);

// Certificate for f(x_1^{n_1}, ..., x_d^{n_d}) up to order r, given weak
// certificates for f and all of its first partial derivatives and n_i >= r.
// Output constants: A~ = N * A * (d+1)^(C+1) with N = max n_i and A the
// unified constant (enlarged to at least 1), B unchanged; non-weak.
MildCert power_substitute(const MildCert& f, const std::vector<MildCert>& first_derivs,
                          const std::vector<int>& n, int r, Audit* audit = nullptr);

// Substitution step that brings the norm of an order-r certified function
// down to 1: h = 1/(A r^C). Requires B <= 1 and order >= r.
double rescale_step(const MildCert& c, int r);

// Weak certificate of a bounded monomial a * x^mu from a certified sup:
// (max(1, |mu_i|), supB, 0), all orders.
MildCert monomial_weak(const std::vector<double>& mu, double supB, Audit* audit = nullptr);

// Certificate for (b o phi)^(1/r^(l-1)) up to order r, where b = a x^mu is a
// monomial with certified first-derivative bounds c1 over its domain and phi
// raises coordinates to powers n_i >= r^l. Constants depend on mu, the sup
// of |b| and the c1 bounds only, not on r or l.
MildCert root_power(const std::vector<double>& mu, double sup_b,
                    const std::vector<double>& c1_bounds, const std::vector<int>& n, int r,
                    int l, Audit* audit = nullptr);

// Folds B into A so the certificate takes the (A, C)-mild form required by
// the rescale step. Needs a certified bound |f| <= 1.
MildCert fold_to_unit_B(const MildCert& c, double certified_sup, Audit* audit = nullptr);

// Weak certificate for a prepared value b_j * F(b) assembled from the unit
// certificate and per-term weak certificates, together with weak certificates
// for its first x-derivatives when every term of the monomial map has
// bounded first derivatives (certs supplied per term and direction).
struct PreparedWeakResult {
    MildCert value;
    std::vector<MildCert> derivs; // one per x-direction; empty when unavailable
    std::string failure;          // reason derivatives are unavailable
};
PreparedWeakResult prepared_weak(
    const MildCert& unit_cert, const std::vector<MildCert>& term_certs, int j, int x_arity,
    const std::vector<std::vector<std::optional<MildCert>>>& term_deriv_certs,
    Audit* audit = nullptr);

// --- primitive catalog --------------------------------------------------------
// Closed-form C = 0 certificates for the analytic building blocks, each over
// a certified argument range. Univariate (arity 1) unless noted.

MildCert catalog_exp(double sup_arg);                    // exp on (-inf, s]
MildCert catalog_recip(double delta, double sup_abs);    // 1/u with delta <= |u| <= M
MildCert catalog_pow(double mu, double lo, double hi);   // u^mu with 0 < lo <= u <= hi
MildCert catalog_log1p(double lo, double hi);            // log(1+u) with -1 < lo <= u <= hi
MildCert catalog_const(double c, int arity);
MildCert catalog_coordinate(double sup_abs, int arity);

// Certificate for an analytic expression over a box, assembled structurally
// from the catalog through the composition, product and sum rules. The
// expression must be total on the box (interval-certified along the way).
MildCert unit_certificate(const Expr& e, const Box& b, Audit* audit = nullptr);

} // namespace mildatlas
