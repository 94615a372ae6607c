#pragma once
#include <cstdint>
#include <cmath>

namespace chaostats {

// Deterministic splittable RNG. We avoid std:: distributions on purpose:
// their output sequences are implementation-defined, and dataset manifests /
// trained weights must reproduce bit-for-bit from a seed.
struct Rng {
    uint64_t state;

    explicit Rng(uint64_t seed) : state(seed + 0x9e3779b97f4a7c15ull) {}

    // splitmix64
    uint64_t next_u64() {
        uint64_t z = (state += 0x9e3779b97f4a7c15ull);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
        return z ^ (z >> 31);
    }

    // uniform in [0,1)
    double uniform() {
        return double(next_u64() >> 11) * 0x1.0p-53;
    }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Box-Muller; one value per call, no cached spare (keeps replay trivial)
    double normal() {
        double u1 = 0.0;
        do { u1 = uniform(); } while (u1 <= 0.0);
        double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925286766559 * u2);
    }

    // derive an independent stream, e.g. per trajectory index
    static Rng child(uint64_t seed, uint64_t index) {
        Rng mix(seed);
        mix.state ^= (index + 1) * 0xd1342543de82ef95ull;
        mix.next_u64();
        return mix;
    }
};

} // namespace chaostats
