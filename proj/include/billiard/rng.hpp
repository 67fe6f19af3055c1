#pragma once

#include <cstdint>
#include <random>

namespace billiard {

inline std::uint64_t splitmix64(std::uint64_t& state) {
    std::uint64_t z = (state += 0x9E3779B97F4A7C15ULL);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

// Independent stream keyed by (seed, sample index). Results are a pure
// function of the key, so ensembles are reproducible under any scheduling.
class RngStream {
  public:
    RngStream(std::uint64_t seed, std::uint64_t index) {
        std::uint64_t s = seed ^ (0xD1B54A32D192ED03ULL * (index + 1));
        std::uint64_t a = splitmix64(s);
        std::uint64_t b = splitmix64(s);
        eng_.seed(a ^ (b << 1));
    }

    double uniform() { return dist_(eng_); }  // [0, 1)
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
    std::uint64_t bits() { return eng_(); }

    std::mt19937_64& engine() { return eng_; }

  private:
    std::mt19937_64 eng_;
    std::uniform_real_distribution<double> dist_{0.0, 1.0};
};

}  // namespace billiard
