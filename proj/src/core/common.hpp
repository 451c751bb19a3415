#pragma once

#include <limits>
#include <stdexcept>
#include <string>

namespace mildatlas {

// Error taxonomy mirrored by the C API status codes and the CLI exit codes:
// bad input / precondition violations vs. internal invariant breakage.
enum class ErrorKind { Input, Internal };

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& msg)
        : std::runtime_error(msg), kind_(kind) {}
    ErrorKind kind() const { return kind_; }

private:
    ErrorKind kind_;
};

[[noreturn]] inline void fail_input(const std::string& msg) {
    throw Error(ErrorKind::Input, msg);
}
[[noreturn]] inline void fail_internal(const std::string& msg) {
    throw Error(ErrorKind::Internal, msg);
}

// Truncation order of a certificate; kOrderInf encodes "all orders".
using Order = int;
constexpr Order kOrderInf = std::numeric_limits<int>::max();

inline Order min_order(Order a, Order b) { return a < b ? a : b; }

} // namespace mildatlas
