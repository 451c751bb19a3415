#pragma once

// Exact multi-index combinatorics: graded-lexicographic ordering, factorials,
// ordered decompositions with multinomial weights, and the partition index
// sets that drive the multivariate chain rule for higher derivatives.

#include <cstdint>
#include <memory>
#include <unordered_map>
#include <vector>

#include <boost/multiprecision/cpp_int.hpp>

#include "common.hpp"

namespace mildatlas {

using BigInt = boost::multiprecision::cpp_int;

// Exponent vector of a mixed partial derivative. Entries are naturals; the
// length is the ambient arity (>= 1).
class MultiIndex {
public:
    MultiIndex() = default;
    explicit MultiIndex(std::vector<int> entries);
    static MultiIndex zeros(int dim);
    static MultiIndex unit(int dim, int axis);

    int dim() const { return static_cast<int>(entries_.size()); }
    int operator[](int i) const { return entries_[static_cast<size_t>(i)]; }
    const std::vector<int>& entries() const { return entries_; }

    int order() const;
    BigInt factorial() const;

    bool operator==(const MultiIndex& o) const { return entries_ == o.entries_; }
    bool operator!=(const MultiIndex& o) const { return entries_ != o.entries_; }

    // Componentwise sum/difference; difference requires componentwise >=.
    MultiIndex plus(const MultiIndex& o) const;
    MultiIndex minus(const MultiIndex& o) const;
    bool dominates(const MultiIndex& o) const; // this >= o componentwise

    std::string to_string() const;

private:
    std::vector<int> entries_;
};

std::pair<int, BigInt> order_and_factorial(const MultiIndex& v);

// Strict graded-lexicographic order: lower total order first; ties broken so
// that weight concentrated on earlier coordinates comes first, e.g. for two
// variables (1,0) precedes (0,1).
bool precedes(const MultiIndex& a, const MultiIndex& b);

// All multi-indices of the given arity with order <= max_order, enumerated
// in the `precedes` order (each exactly once).
std::vector<MultiIndex> enumerate_up_to(int dim, int max_order);

// Shared enumeration + rank lookup for one (dim, max_order) shape. Jets use
// this to store coefficients densely.
class IndexSpace {
public:
    static std::shared_ptr<const IndexSpace> get(int dim, int max_order);

    int dim() const { return dim_; }
    int max_order() const { return max_order_; }
    int size() const { return static_cast<int>(list_.size()); }
    const std::vector<MultiIndex>& list() const { return list_; }
    const MultiIndex& at(int rank) const { return list_[static_cast<size_t>(rank)]; }
    int rank(const MultiIndex& v) const;
    // factorial(nu) and order(nu)! as doubles, indexed by rank.
    double factorial_d(int rank) const { return fact_d_[static_cast<size_t>(rank)]; }
    double order_factorial_d(int rank) const { return ofact_d_[static_cast<size_t>(rank)]; }
    int order_of(int rank) const { return order_[static_cast<size_t>(rank)]; }

private:
    IndexSpace(int dim, int max_order);
    int dim_;
    int max_order_;
    std::vector<MultiIndex> list_;
    std::unordered_map<std::string, int> rank_;
    std::vector<double> fact_d_;
    std::vector<double> ofact_d_;
    std::vector<int> order_;
};

// One ordered decomposition v = v_1 + ... + v_l together with its multinomial
// weight v!/(v_1! ... v_l!), the coefficient of the generalized Leibniz rule.
struct Decomposition {
    std::vector<MultiIndex> parts;
    BigInt weight;
};

std::vector<Decomposition> decompositions(const MultiIndex& v, int l);

// One term of the higher-order chain rule index set: inner exponents k_i
// paired with strictly increasing outer derivative orders l_i such that
// sum k_i = lambda and sum |k_i| l_i = nu.
struct FaaPartition {
    int s = 0;
    std::vector<MultiIndex> ks; // over the inner arity (arity of lambda)
    std::vector<MultiIndex> ls; // over the outer arity (arity of nu), increasing
};

// Union over s = 1..|nu| of the partition sets for (nu, lambda).
// Requires 1 <= |lambda| <= |nu|.
std::vector<FaaPartition> faa_partitions(const MultiIndex& nu, const MultiIndex& lambda);

bool validate_faa_partition(const FaaPartition& p, const MultiIndex& nu, const MultiIndex& lambda);

} // namespace mildatlas
