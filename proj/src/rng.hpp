#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace fsel {

// std::mt19937_64 is bit-exact across standard libraries; the distributions
// are not, so the transforms below are implemented here.
using Engine = std::mt19937_64;

std::uint64_t mix64(std::uint64_t x) noexcept;
std::uint64_t fnv1a64(std::string_view text) noexcept;
std::uint64_t derive_seed(std::uint64_t a, std::uint64_t b) noexcept;
std::uint64_t derive_seed(std::uint64_t a, std::uint64_t b, std::uint64_t c) noexcept;

// Uniform in (0, 1], 53-bit resolution.
double uniform_open0(Engine& engine) noexcept;

// Box-Muller, one normal per pair of uniforms (the sine branch is dropped so
// every draw consumes exactly two engine outputs).
double standard_normal(Engine& engine) noexcept;

// Unbiased integer in [0, bound) by rejection.
std::uint64_t uniform_below(Engine& engine, std::uint64_t bound) noexcept;

}  // namespace fsel
