#pragma once

#include <cstdint>
#include <random>

namespace seglab {

// Independent stream identifiers derived from the single global seed.
enum class Stream : std::uint64_t {
    dataset_train = 1,
    dataset_val = 2,
    dataset_test = 3,
    init = 4,
    shuffle = 5,
    augment = 6,
    audit = 7,
};

std::uint64_t splitmix64(std::uint64_t x);

// Seed for element `index` of `stream`, fully determined by `base`.
std::uint64_t derive_seed(std::uint64_t base, Stream stream, std::uint64_t index = 0);

// mt19937_64 wrapper with portable distributions. The std:: distributions are
// implementation-defined, so uniform/normal are computed from raw engine output.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t next_u64() { return engine_(); }

    // Uniform on [0, 1) with 53 random bits.
    double uniform();
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
    // Uniform integer on [0, n).
    std::uint64_t below(std::uint64_t n);
    // Standard normal via Box-Muller (cached second value).
    double normal();
    double normal(double mean, double sigma) { return mean + sigma * normal(); }

private:
    std::mt19937_64 engine_;
    bool has_spare_ = false;
    double spare_ = 0.0;
};

}  // namespace seglab
