#include "perturb.hpp"

#include <algorithm>
#include <cmath>

#include "error.hpp"
#include "rng.hpp"

namespace fsel {

void NoiseConfig::validate() const {
    if (!(sigma > 0.0) || !std::isfinite(sigma)) throw Error(ErrorCode::InvalidArgument, "noise sigma must be > 0");
    if (!std::isfinite(mu)) throw Error(ErrorCode::InvalidArgument, "noise mu must be finite");
    if (variants < 1) throw Error(ErrorCode::InvalidArgument, "noise variants must be >= 1");
}

std::uint64_t noise_seed(std::uint64_t base_seed, std::string_view anchor_id, std::size_t variant_index) {
    return derive_seed(base_seed, fnv1a64(anchor_id), variant_index);
}

ImageTensor gaussian_noise(const ImageTensor& image, std::string_view anchor_id, const NoiseConfig& config,
                           std::size_t variant_index) {
    config.validate();
    if (variant_index >= config.variants) {
        throw Error(ErrorCode::InvalidArgument, "variant index " + std::to_string(variant_index) + " outside [0, " +
                                                    std::to_string(config.variants) + ")");
    }
    Engine engine(noise_seed(config.base_seed, anchor_id, variant_index));
    std::vector<double> pixels(image.pixels().begin(), image.pixels().end());
    for (double& p : pixels) p = std::clamp(p + config.mu + config.sigma * standard_normal(engine), 0.0, 1.0);
    return ImageTensor(image.height(), image.width(), image.channels(), std::move(pixels));
}

std::vector<ImageTensor> noise_variants(const ImageTensor& image, std::string_view anchor_id, const NoiseConfig& config) {
    config.validate();
    std::vector<ImageTensor> out;
    out.reserve(config.variants);
    for (std::size_t t = 0; t < config.variants; ++t) out.push_back(gaussian_noise(image, anchor_id, config, t));
    return out;
}

}  // namespace fsel
