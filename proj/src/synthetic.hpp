#pragma once

#include <cstdint>
#include <string_view>

#include <json.hpp>

#include "manifest.hpp"

namespace fsel {

struct SyntheticSpec {
    int num_classes = 5;
    std::size_t dim = 64;
    std::size_t pool_per_class = 40;
    std::size_t validation_per_class = 20;
    std::size_t test_per_class = 100;
    double separation = 3.0;
    double within_std = 1.0;
    double outlier_fraction = 0.15;
    double outlier_multiplier = 4.0;
    std::uint64_t seed = 7;

    void validate() const;
    // The outlier benchmark used for the strategy comparisons.
    static SyntheticSpec std_bench() { return {}; }
};

nlohmann::json to_json(const SyntheticSpec& spec);
// Missing keys keep their std-bench defaults.
SyntheticSpec synthetic_spec_from_json(const nlohmann::json& j);
// "std-bench" or a path to a JSON spec file.
SyntheticSpec load_synthetic_spec(std::string_view name_or_path);

// Orthonormal class directions scaled by `separation`, isotropic Gaussian
// clusters, exactly round(fraction * n) outliers per (class, split).
DatasetManifest generate_synthetic(const SyntheticSpec& spec);

}  // namespace fsel
