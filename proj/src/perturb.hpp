#pragma once

#include <cstdint>
#include <string_view>
#include <vector>

#include "types.hpp"

namespace fsel {

struct NoiseConfig {
    double mu = 0.0;
    double sigma = 0.1;
    std::size_t variants = 20;
    std::uint64_t base_seed = 0;

    void validate() const;
};

// Seed of the noise field for one (anchor, variant). Counter-based so the
// field does not depend on call order.
std::uint64_t noise_seed(std::uint64_t base_seed, std::string_view anchor_id, std::size_t variant_index);

// out = clamp(image + Z, 0, 1), Z i.i.d. Normal(mu, sigma^2) per pixel and
// channel.
ImageTensor gaussian_noise(const ImageTensor& image, std::string_view anchor_id, const NoiseConfig& config,
                           std::size_t variant_index);

std::vector<ImageTensor> noise_variants(const ImageTensor& image, std::string_view anchor_id, const NoiseConfig& config);

}  // namespace fsel
