#include "rng.hpp"

#include <cmath>
#include <limits>
#include <numbers>

namespace fsel {

std::uint64_t mix64(std::uint64_t x) noexcept {
    // splitmix64 finaliser
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

std::uint64_t fnv1a64(std::string_view text) noexcept {
    std::uint64_t h = 0xCBF29CE484222325ULL;
    for (unsigned char c : text) {
        h ^= c;
        h *= 0x100000001B3ULL;
    }
    return h;
}

std::uint64_t derive_seed(std::uint64_t a, std::uint64_t b) noexcept { return mix64(mix64(a) ^ b); }

std::uint64_t derive_seed(std::uint64_t a, std::uint64_t b, std::uint64_t c) noexcept {
    return mix64(derive_seed(a, b) ^ c);
}

double uniform_open0(Engine& engine) noexcept {
    return static_cast<double>((engine() >> 11) + 1) * 0x1.0p-53;
}

double standard_normal(Engine& engine) noexcept {
    const double u1 = uniform_open0(engine);
    const double u2 = uniform_open0(engine);
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

std::uint64_t uniform_below(Engine& engine, std::uint64_t bound) noexcept {
    if (bound <= 1) return 0;
    const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() - std::numeric_limits<std::uint64_t>::max() % bound;
    std::uint64_t x;
    do {
        x = engine();
    } while (x >= limit);
    return x % bound;
}

}  // namespace fsel
