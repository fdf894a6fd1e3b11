#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace microtrap {

// Deterministic RNG built on mt19937_64 raw output only. The std distribution
// adaptors are implementation-defined, which would break the byte-identical
// rerun guarantee across toolchains, so uniforms and normals are derived here.
class Rng {
  public:
    explicit Rng(std::uint64_t seed) : gen_(seed) {}

    // Uniform in [0, 1) with 53-bit resolution.
    double uniform() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Standard normal via Box-Muller, spare value cached.
    double normal()
    {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        double u1 = uniform();
        while (u1 <= 0.0) u1 = uniform();
        const double u2 = uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double a = 6.28318530717958647692 * u2;
        spare_ = r * std::sin(a);
        has_spare_ = true;
        return r * std::cos(a);
    }

    // Binomial by explicit Bernoulli count; n is small in all uses here.
    long binomial(long n, double p)
    {
        long k = 0;
        for (long i = 0; i < n; ++i)
            if (uniform() < p) ++k;
        return k;
    }

    std::uint64_t raw() { return gen_(); }

    // Derive an independent per-task stream (scans, Monte Carlo ensembles).
    static Rng substream(std::uint64_t seed, std::uint64_t task)
    {
        // SplitMix64 mixing of (seed, task) into the child seed.
        std::uint64_t z = seed + 0x9e3779b97f4a7c15ull * (task + 1);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
        return Rng(z ^ (z >> 31));
    }

  private:
    std::mt19937_64 gen_;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

}  // namespace microtrap
