#pragma once

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <stdexcept>
#include <string>

namespace choreo {

// Error taxonomy. Callers that surface errors to a process boundary map
// ValidationError/DataError/ParameterError to exit code 2 and the rest to 3.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct DimensionError : Error {
    using Error::Error;
};
struct ValidationError : Error {
    using Error::Error;
};
struct ParameterError : Error {
    using Error::Error;
};
struct DataError : Error {
    using Error::Error;
};
struct StateError : Error {
    using Error::Error;
};
struct IndexError : Error {
    using Error::Error;
};

// Deterministic RNG. mt19937_64's stream is pinned by the standard; the
// distribution transforms are hand-rolled because std::*_distribution is
// implementation-defined and would break byte-identical corpora across
// toolchains.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : state_(seed ? seed : 0x9e3779b97f4a7c15ull) {}

    std::uint64_t next_u64() {
        // xorshift* keeps the header self-contained and the stream portable.
        std::uint64_t x = state_;
        x ^= x >> 12;
        x ^= x << 25;
        x ^= x >> 27;
        state_ = x;
        return x * 0x2545f4914f6cdd1dull;
    }

    // uniform in [0, 1)
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // standard normal via Box-Muller on the portable uniform stream
    double normal() {
        double u1 = uniform();
        double u2 = uniform();
        while (u1 <= 1e-300) u1 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925286766559 * u2);
    }

    // integer in [0, n)
    std::uint64_t below(std::uint64_t n) { return n ? next_u64() % n : 0; }

    std::uint64_t fork() { return next_u64(); }

private:
    std::uint64_t state_;
};

// Shortest round-trippable decimal for a double; used by every text format so
// that write->read->write is byte identical.
inline std::string fmt_double(double v) {
    char buf[40];
    for (int prec = 15; prec <= 17; ++prec) {
        std::snprintf(buf, sizeof(buf), "%.*g", prec, v);
        if (std::strtod(buf, nullptr) == v) break;
    }
    return buf;
}

}  // namespace choreo
