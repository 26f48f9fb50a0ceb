#pragma once
// Seeded randomness. Normal draws use Box-Muller over mt19937_64 so that
// sequences are identical across standard library implementations.

#include <cstdint>
#include <random>
#include <vector>

namespace fregan {

// splitmix64 finalizer; mixes (seed, stream, index) into an engine seed.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream, std::uint64_t index = 0);

class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    // Uniform in [0, 1) with 53 random bits.
    double uniform();
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
    // Uniform integer in [lo, hi].
    int uniform_int(int lo, int hi);
    double normal();
    std::vector<float> normal_vector(std::size_t n, float mean = 0.0f, float stddev = 1.0f);
    std::vector<float> uniform_vector(std::size_t n, float lo, float hi);

    std::mt19937_64& engine() { return engine_; }

private:
    std::mt19937_64 engine_;
    bool has_spare_ = false;
    double spare_ = 0.0;
};

}  // namespace fregan
