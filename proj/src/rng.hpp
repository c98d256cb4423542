#pragma once

#include <cmath>
#include <cstdint>

namespace ct {

// Counter-based pseudo-random generator. Each draw hashes (seed, stream,
// counter) through the SplitMix64 finalizer, so streams are reproducible
// across platforms and independent of call order within a stream.
class Rng {
public:
    explicit Rng(std::uint64_t seed, std::uint64_t stream = 0)
        : seed_(seed), stream_(stream), counter_(0) {}

    Rng substream(std::uint64_t stream) const {
        return Rng(seed_, mix(stream_ * 0x9E3779B97F4A7C15ULL + stream + 1));
    }

    std::uint64_t next_u64() {
        std::uint64_t z = seed_ ^ mix(stream_ ^ 0xA5A5A5A5A5A5A5A5ULL);
        z += 0x9E3779B97F4A7C15ULL * (++counter_);
        return mix(z);
    }

    // Uniform in (0, 1), never exactly 0 or 1.
    double uniform() {
        return (static_cast<double>(next_u64() >> 11) + 0.5) * (1.0 / 9007199254740992.0);
    }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Standard normal via inverse-CDF transform (deterministic, no state
    // beyond the counter).
    double normal();
    double normal(double mu, double sigma) { return mu + sigma * normal(); }

    double cauchy(double location, double scale) {
        return location + scale * std::tan(3.14159265358979323846 * (uniform() - 0.5));
    }

    // Knuth inversion; fine for the small rates used by the generators.
    int poisson(double rate) {
        double l = std::exp(-rate), p = 1.0;
        int k = 0;
        do {
            ++k;
            p *= uniform();
        } while (p > l);
        return k - 1;
    }

    int uniform_int(int n) { return static_cast<int>(next_u64() % static_cast<std::uint64_t>(n)); }

    bool bernoulli(double p) { return uniform() < p; }

private:
    static std::uint64_t mix(std::uint64_t z) {
        z ^= z >> 30;
        z *= 0xBF58476D1CE4E5B9ULL;
        z ^= z >> 27;
        z *= 0x94D049BB133111EBULL;
        z ^= z >> 31;
        return z;
    }

    std::uint64_t seed_;
    std::uint64_t stream_;
    std::uint64_t counter_;
};

}  // namespace ct
