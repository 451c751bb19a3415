#pragma once

#include <string>
#include <vector>

namespace mildatlas {

struct SelftestResult {
    int passed = 0;
    int failed = 0;
    std::vector<std::string> failures;
    std::string log; // one line per check
};

// Runs the built-in example suite covering every module operation with its
// frozen expected values and independent oracles.
SelftestResult run_selftest();

} // namespace mildatlas
