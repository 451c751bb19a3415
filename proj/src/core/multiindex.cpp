#include "multiindex.hpp"

#include <algorithm>
#include <mutex>
#include <sstream>

namespace mildatlas {

MultiIndex::MultiIndex(std::vector<int> entries) : entries_(std::move(entries)) {
    if (entries_.empty()) fail_input("multi-index must have length >= 1");
    for (int e : entries_)
        if (e < 0) fail_input("multi-index entries must be >= 0");
}

MultiIndex MultiIndex::zeros(int dim) {
    return MultiIndex(std::vector<int>(static_cast<size_t>(dim), 0));
}

MultiIndex MultiIndex::unit(int dim, int axis) {
    std::vector<int> e(static_cast<size_t>(dim), 0);
    e[static_cast<size_t>(axis)] = 1;
    return MultiIndex(std::move(e));
}

int MultiIndex::order() const {
    int s = 0;
    for (int e : entries_) s += e;
    return s;
}

BigInt MultiIndex::factorial() const {
    BigInt f = 1;
    for (int e : entries_)
        for (int i = 2; i <= e; ++i) f *= i;
    return f;
}

MultiIndex MultiIndex::plus(const MultiIndex& o) const {
    if (dim() != o.dim()) fail_input("multi-index length mismatch");
    std::vector<int> e(entries_);
    for (int i = 0; i < dim(); ++i) e[static_cast<size_t>(i)] += o[i];
    return MultiIndex(std::move(e));
}

MultiIndex MultiIndex::minus(const MultiIndex& o) const {
    if (dim() != o.dim()) fail_input("multi-index length mismatch");
    std::vector<int> e(entries_);
    for (int i = 0; i < dim(); ++i) {
        e[static_cast<size_t>(i)] -= o[i];
        if (e[static_cast<size_t>(i)] < 0) fail_input("multi-index difference is negative");
    }
    return MultiIndex(std::move(e));
}

bool MultiIndex::dominates(const MultiIndex& o) const {
    if (dim() != o.dim()) fail_input("multi-index length mismatch");
    for (int i = 0; i < dim(); ++i)
        if (entries_[static_cast<size_t>(i)] < o[i]) return false;
    return true;
}

std::string MultiIndex::to_string() const {
    std::ostringstream os;
    os << '(';
    for (int i = 0; i < dim(); ++i) {
        if (i) os << ',';
        os << entries_[static_cast<size_t>(i)];
    }
    os << ')';
    return os.str();
}

std::pair<int, BigInt> order_and_factorial(const MultiIndex& v) {
    return {v.order(), v.factorial()};
}

bool precedes(const MultiIndex& a, const MultiIndex& b) {
    if (a.dim() != b.dim()) fail_input("multi-index length mismatch in order comparison");
    const int oa = a.order(), ob = b.order();
    if (oa != ob) return oa < ob;
    for (int i = 0; i < a.dim(); ++i) {
        if (a[i] != b[i]) return a[i] > b[i];
    }
    return false;
}

namespace {

void enumerate_grade(int dim, int grade, std::vector<int>& cur, int pos,
                     std::vector<MultiIndex>& out) {
    if (pos == dim - 1) {
        cur[static_cast<size_t>(pos)] = grade;
        out.emplace_back(cur);
        return;
    }
    // First coordinate takes the largest share first, matching `precedes`.
    for (int e = grade; e >= 0; --e) {
        cur[static_cast<size_t>(pos)] = e;
        enumerate_grade(dim, grade - e, cur, pos + 1, out);
    }
}

} // namespace

std::vector<MultiIndex> enumerate_up_to(int dim, int max_order) {
    if (dim < 1) fail_input("arity must be >= 1");
    if (max_order < 0) fail_input("order must be >= 0");
    std::vector<MultiIndex> out;
    std::vector<int> cur(static_cast<size_t>(dim), 0);
    for (int grade = 0; grade <= max_order; ++grade)
        enumerate_grade(dim, grade, cur, 0, out);
    return out;
}

IndexSpace::IndexSpace(int dim, int max_order) : dim_(dim), max_order_(max_order) {
    list_ = enumerate_up_to(dim, max_order);
    rank_.reserve(list_.size());
    fact_d_.reserve(list_.size());
    ofact_d_.reserve(list_.size());
    order_.reserve(list_.size());
    for (size_t i = 0; i < list_.size(); ++i) {
        rank_[list_[i].to_string()] = static_cast<int>(i);
        fact_d_.push_back(static_cast<double>(list_[i].factorial()));
        const int n = list_[i].order();
        double of = 1.0;
        for (int k = 2; k <= n; ++k) of *= k;
        ofact_d_.push_back(of);
        order_.push_back(n);
    }
}

std::shared_ptr<const IndexSpace> IndexSpace::get(int dim, int max_order) {
    static std::mutex mu;
    static std::unordered_map<int64_t, std::shared_ptr<const IndexSpace>> cache;
    const int64_t key = static_cast<int64_t>(dim) * 1000 + max_order;
    std::lock_guard<std::mutex> lock(mu);
    auto it = cache.find(key);
    if (it != cache.end()) return it->second;
    auto sp = std::shared_ptr<const IndexSpace>(new IndexSpace(dim, max_order));
    cache[key] = sp;
    return sp;
}

int IndexSpace::rank(const MultiIndex& v) const {
    auto it = rank_.find(v.to_string());
    if (it == rank_.end()) fail_internal("multi-index outside index space: " + v.to_string());
    return it->second;
}

namespace {

// Enumerate all mu <= bound componentwise, in `precedes` order.
std::vector<MultiIndex> dominated_by(const MultiIndex& bound) {
    std::vector<MultiIndex> all = enumerate_up_to(bound.dim(), bound.order());
    std::vector<MultiIndex> out;
    for (auto& m : all)
        if (bound.dominates(m)) out.push_back(m);
    return out;
}

void decompose_rec(const MultiIndex& remaining, int slots,
                   std::vector<MultiIndex>& parts, std::vector<Decomposition>& out) {
    if (slots == 1) {
        parts.push_back(remaining);
        Decomposition d;
        d.parts = parts;
        // multinomial weight: v! / prod parts!
        MultiIndex total = parts[0];
        for (size_t i = 1; i < parts.size(); ++i) total = total.plus(parts[i]);
        BigInt w = total.factorial();
        for (auto& p : parts) w /= p.factorial();
        d.weight = w;
        out.push_back(std::move(d));
        parts.pop_back();
        return;
    }
    // Give the leading slot the largest part first.
    auto cands = dominated_by(remaining);
    for (auto it = cands.rbegin(); it != cands.rend(); ++it) {
        parts.push_back(*it);
        decompose_rec(remaining.minus(*it), slots - 1, parts, out);
        parts.pop_back();
    }
}

} // namespace

std::vector<Decomposition> decompositions(const MultiIndex& v, int l) {
    if (l < 1) fail_input("decompositions: need l >= 1");
    std::vector<Decomposition> out;
    std::vector<MultiIndex> parts;
    decompose_rec(v, l, parts, out);
    return out;
}

namespace {

struct FaaEnumState {
    std::vector<MultiIndex> pool;  // candidate outer orders, in precedes order
    std::vector<MultiIndex> kpool; // candidate inner exponents (all <= lambda)
    std::vector<FaaPartition>* out;
};

// Walk strictly increasing chains l_1 < l_2 < ... through the pool, choosing
// for each l a nonzero inner exponent k with k <= remaining lambda and
// |k| * l <= remaining nu.
void faa_rec(FaaEnumState& st, size_t pool_from, MultiIndex rem_nu, MultiIndex rem_lambda,
             std::vector<MultiIndex>& ks, std::vector<MultiIndex>& ls) {
    if (rem_nu.order() == 0) {
        if (rem_lambda.order() == 0 && !ks.empty()) {
            FaaPartition p;
            p.s = static_cast<int>(ks.size());
            p.ks = ks;
            p.ls = ls;
            st.out->push_back(std::move(p));
        }
        return;
    }
    if (rem_lambda.order() == 0) return;
    for (size_t pi = pool_from; pi < st.pool.size(); ++pi) {
        const MultiIndex& l = st.pool[pi];
        if (!rem_nu.dominates(l)) continue;
        const int max_mult = rem_nu.order() / l.order();
        // Nonzero k <= rem_lambda with |k| <= max usable multiplicity.
        for (auto& k : st.kpool) {
            const int ko = k.order();
            if (ko == 0 || ko > max_mult || !rem_lambda.dominates(k)) continue;
            // |k| * l must fit inside rem_nu componentwise.
            bool fits = true;
            std::vector<int> scaled(static_cast<size_t>(l.dim()));
            for (int i = 0; i < l.dim(); ++i) {
                scaled[static_cast<size_t>(i)] = ko * l[i];
                if (scaled[static_cast<size_t>(i)] > rem_nu[i]) { fits = false; break; }
            }
            if (!fits) continue;
            ks.push_back(k);
            ls.push_back(l);
            faa_rec(st, pi + 1, rem_nu.minus(MultiIndex(scaled)), rem_lambda.minus(k), ks, ls);
            ks.pop_back();
            ls.pop_back();
        }
    }
}

} // namespace

std::vector<FaaPartition> faa_partitions(const MultiIndex& nu, const MultiIndex& lambda) {
    const int n = nu.order();
    const int lo = lambda.order();
    if (lo < 1 || lo > n)
        fail_input("faa_partitions: need 1 <= |lambda| <= |nu| (empty domain)");
    FaaEnumState st;
    // Outer orders are nonzero and componentwise <= nu.
    for (auto& m : enumerate_up_to(nu.dim(), n)) {
        if (m.order() >= 1 && nu.dominates(m)) st.pool.push_back(m);
    }
    st.kpool = dominated_by(lambda);
    std::vector<FaaPartition> out;
    st.out = &out;
    std::vector<MultiIndex> ks, ls;
    faa_rec(st, 0, nu, lambda, ks, ls);
    return out;
}

bool validate_faa_partition(const FaaPartition& p, const MultiIndex& nu, const MultiIndex& lambda) {
    if (p.s <= 0) return false;
    if (p.ks.size() != static_cast<size_t>(p.s) || p.ls.size() != static_cast<size_t>(p.s))
        return false;
    MultiIndex ksum = MultiIndex::zeros(lambda.dim());
    MultiIndex wsum = MultiIndex::zeros(nu.dim());
    for (int j = 0; j < p.s; ++j) {
        if (p.ks[static_cast<size_t>(j)].order() == 0) return false;
        ksum = ksum.plus(p.ks[static_cast<size_t>(j)]);
        std::vector<int> scaled(static_cast<size_t>(nu.dim()));
        for (int i = 0; i < nu.dim(); ++i)
            scaled[static_cast<size_t>(i)] = p.ks[static_cast<size_t>(j)].order() * p.ls[static_cast<size_t>(j)][i];
        wsum = wsum.plus(MultiIndex(scaled));
        if (j > 0 && !precedes(p.ls[static_cast<size_t>(j - 1)], p.ls[static_cast<size_t>(j)]))
            return false;
    }
    return ksum == lambda && wsum == nu;
}

} // namespace mildatlas
