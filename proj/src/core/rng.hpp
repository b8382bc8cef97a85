#pragma once

#include <cmath>
#include <cstdint>

namespace oandet {

// Deterministic splitmix64 generator. std::mt19937 plus the standard
// distributions would work too, but the distributions are not pinned by the
// standard, and we want bitwise reproducible streams everywhere (weight init,
// scene synthesis, epoch shuffles), so the mapping from bits to values lives
// here as well.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next_u64() {
        std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    // Uniform in [0, 1), 53 bits of mantissa.
    double next_double() {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    double next_range(double lo, double hi) {
        return lo + (hi - lo) * next_double();
    }

    // Uniform integer in [lo, hi], both ends inclusive.
    int next_int(int lo, int hi) {
        const std::uint64_t span = static_cast<std::uint64_t>(hi - lo) + 1;
        return lo + static_cast<int>(next_u64() % span);
    }

    // Standard normal via Box-Muller. One value per call keeps the stream
    // position independent of call history.
    double next_normal() {
        const double u1 = 1.0 - next_double(); // (0, 1], keeps log finite
        const double u2 = next_double();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
    }

    // Derives an independent stream seed, e.g. per-scene from a run seed.
    static std::uint64_t mix(std::uint64_t a, std::uint64_t b) {
        Rng r(a ^ (0x9e3779b97f4a7c15ULL + (b << 6) + (b >> 2)));
        r.next_u64();
        return r.next_u64();
    }

private:
    std::uint64_t state_;
};

} // namespace oandet
