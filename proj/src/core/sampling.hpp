#pragma once

// Deterministic low-discrepancy sampling (Halton). The sequence index acts
// as the seed recorded in reports, so verification runs are reproducible.

#include <cstdint>
#include <vector>

namespace mildatlas {

inline double halton(uint64_t index, int base) {
    double f = 1.0, r = 0.0;
    uint64_t i = index + 1; // skip the zero point
    while (i > 0) {
        f /= base;
        r += f * static_cast<double>(i % static_cast<uint64_t>(base));
        i /= static_cast<uint64_t>(base);
    }
    return r;
}

inline std::vector<double> halton_point(uint64_t index, int dim) {
    static const int primes[] = {2, 3, 5, 7, 11, 13, 17, 19, 23, 29};
    std::vector<double> p(static_cast<size_t>(dim));
    for (int i = 0; i < dim; ++i) p[static_cast<size_t>(i)] = halton(index, primes[i % 10]);
    return p;
}

} // namespace mildatlas
