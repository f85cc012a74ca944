#pragma once

#include <cstdint>

namespace pnmf {

inline std::uint64_t splitmix64(std::uint64_t& state) {
    std::uint64_t z = (state += 0x9e3779b97f4a7c15ull);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
}

// Small deterministic generator. std::uniform_real_distribution is
// implementation-defined, so the uniform mapping is done by hand to keep
// generated data reproducible across standard libraries.
class Rng {
  public:
    explicit Rng(std::uint64_t seed) : state_(seed) {
        // Warm up so seeds 0 and 1 do not produce correlated leading draws.
        splitmix64(state_);
        splitmix64(state_);
    }

    std::uint64_t next_u64() { return splitmix64(state_); }

    // Uniform on [0, 1).
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    // Uniform on [lo, hi).
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Derive an independent stream, e.g. one per matrix cell.
    static std::uint64_t derive(std::uint64_t seed, std::uint64_t stream) {
        std::uint64_t s = seed ^ (0x9e3779b97f4a7c15ull * (stream + 1));
        return splitmix64(s);
    }

  private:
    std::uint64_t state_;
};

}  // namespace pnmf
