#pragma once

#include <cmath>
#include <cstdint>

namespace specstat {

// Counter-friendly 64-bit generator (splitmix64). Chosen over std::mt19937_64
// because every draw path in the toolkit must be reproducible bit-for-bit from
// an explicit seed, including the per-pixel streams used by the phantom
// generator; the std distributions are implementation-defined and would break
// that contract.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next_u64() {
        std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ull);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
        return z ^ (z >> 31);
    }

    // Uniform on the open interval (0, 1); never returns 0 or 1, so log(u)
    // and log(1-u) are always finite.
    double uniform01() {
        return (static_cast<double>(next_u64() >> 12) + 0.5) * 0x1.0p-52;
    }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

    // Box-Muller; consumes exactly two uniforms per call.
    double normal() {
        double u1 = uniform01();
        double u2 = uniform01();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925286766559 * u2);
    }

    // Uniform integer in [0, n).
    std::uint64_t below(std::uint64_t n) { return next_u64() % n; }

private:
    std::uint64_t state_;
};

// splitmix64 finalizer as a standalone hash, used to derive independent
// sub-stream seeds (per pixel, per tree, per Monte Carlo replicate).
inline std::uint64_t mix64(std::uint64_t x) {
    x ^= x >> 30;
    x *= 0xbf58476d1ce4e5b9ull;
    x ^= x >> 27;
    x *= 0x94d049bb133111ebull;
    x ^= x >> 31;
    return x;
}

inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t index) {
    return mix64(seed + 0x9e3779b97f4a7c15ull * (index + 1));
}

} // namespace specstat
