#pragma once

#include <cstddef>
#include <cstdint>
#include <random>

namespace rome {

using Rng = std::mt19937_64;

constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

/// Mixes a base seed with any number of stream identifiers. Each part is
/// folded through splitmix64 so that (base, 1, 2) and (base, 2, 1) differ.
template <typename... Parts>
constexpr std::uint64_t derive_seed(std::uint64_t base, Parts... parts) noexcept {
    std::uint64_t h = splitmix64(base);
    ((h = splitmix64(h ^ splitmix64(static_cast<std::uint64_t>(parts) + 0x632BE59BD9B4E019ULL))), ...);
    return h;
}

/// Counter-based splitmix64 engine. Seeding is free, so it backs the
/// per-tree streams where an mt19937_64 state setup would dominate.
class SplitMixRng {
public:
    using result_type = std::uint64_t;
    explicit SplitMixRng(std::uint64_t seed) noexcept : state_(seed) {}
    static constexpr result_type min() noexcept { return 0; }
    static constexpr result_type max() noexcept { return ~result_type{0}; }
    result_type operator()() noexcept {
        const std::uint64_t out = splitmix64(state_);
        state_ += 0x9E3779B97F4A7C15ULL;
        return out;
    }

private:
    std::uint64_t state_;
};

template <typename Engine>
std::size_t uniform_index(Engine& rng, std::size_t n) {
    return std::uniform_int_distribution<std::size_t>(0, n - 1)(rng);
}

inline double uniform01(Rng& rng) {
    return std::uniform_real_distribution<double>(0.0, 1.0)(rng);
}

}  // namespace rome
