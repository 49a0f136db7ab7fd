#pragma once

#include <cstdint>
#include <string_view>

namespace noisecast {

// Counter-based random numbers built on the SplitMix64 finalizer.  Every
// draw is a pure function of (seed, stream, counter), so replications,
// columns and grid cells can be generated independently on any worker
// without shared state, and regenerating a single column or row block
// reproduces exactly the same values.

inline constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ULL;

inline std::uint64_t mix64(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

inline std::uint64_t hash_at(std::uint64_t key, std::uint64_t index) {
    return mix64(key + (index + 1) * kGolden);
}

inline std::uint64_t fnv1a(std::string_view s) {
    std::uint64_t h = 0xCBF29CE484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001B3ULL;
    }
    return h;
}

// Hierarchical seed derivation: command -> module -> cell.  Children with
// distinct tags have independent-looking streams.
struct SeedPath {
    std::uint64_t value = 0;

    SeedPath child(std::uint64_t tag) const {
        return SeedPath{mix64(value ^ mix64(tag + 0x632BE59BD9B4E019ULL))};
    }
    SeedPath child(std::string_view name) const { return child(fnv1a(name)); }
    SeedPath child(std::string_view name, std::uint64_t i) const {
        return child(name).child(i);
    }
};

// Inverse normal CDF, Wichura's algorithm AS 241 (PPND16).  Accurate to
// about 1e-15 over (0,1); used to turn counter-based uniforms into
// normals one draw at a time.
double inverse_normal_cdf(double p);

// One logical stream of i.i.d. draws addressed by counter.
class RandomStream {
  public:
    RandomStream(std::uint64_t seed, std::uint64_t stream)
        : key_(mix64(seed ^ mix64(stream * kGolden + 0x9E6C63D0876A9ULL))) {}

    explicit RandomStream(SeedPath path) : RandomStream(path.value, 0) {}

    std::uint64_t bits(std::uint64_t i) const { return hash_at(key_, i); }

    // Uniform on the open interval (0,1).
    double uniform(std::uint64_t i) const {
        return (static_cast<double>(bits(i) >> 11) + 0.5) *
               (1.0 / 9007199254740992.0);
    }

    double normal(std::uint64_t i) const {
        return inverse_normal_cdf(uniform(i));
    }

    // Uniform integer in [0, n) without modulo bias worth caring about at
    // 64-bit width (n is always tiny compared to 2^64 here).
    std::uint64_t below(std::uint64_t i, std::uint64_t n) const {
        return bits(i) % n;
    }

  private:
    std::uint64_t key_;
};

}  // namespace noisecast
