#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <json.hpp>

namespace fsel {

inline constexpr double kNormTolerance = 1e-6;

// Fixed-dimension real vector. `normalized` is only ever set when the L2 norm
// is within kNormTolerance of 1.
class Embedding {
public:
    Embedding() = default;
    explicit Embedding(std::vector<double> values, bool normalized = false);

    static Embedding normalized_from(std::vector<double> values);

    std::size_t dim() const noexcept { return values_.size(); }
    std::span<const double> values() const noexcept { return values_; }
    bool is_normalized() const noexcept { return normalized_; }
    double norm() const noexcept;
    double operator[](std::size_t i) const { return values_[i]; }

    bool operator==(const Embedding&) const = default;

private:
    std::vector<double> values_;
    bool normalized_ = false;
};

double dot(std::span<const double> a, std::span<const double> b);
double l2_norm(std::span<const double> v);
double cosine(std::span<const double> a, std::span<const double> b);
inline double cosine_distance(std::span<const double> a, std::span<const double> b) { return 1.0 - cosine(a, b); }
double euclidean_distance(std::span<const double> a, std::span<const double> b);

// Height x width x channels, row-major HWC, values in [0,1].
class ImageTensor {
public:
    ImageTensor() = default;
    ImageTensor(std::size_t height, std::size_t width, std::size_t channels, std::vector<double> pixels);
    static ImageTensor filled(std::size_t height, std::size_t width, std::size_t channels, double value);

    std::size_t height() const noexcept { return height_; }
    std::size_t width() const noexcept { return width_; }
    std::size_t channels() const noexcept { return channels_; }
    std::span<const double> pixels() const noexcept { return pixels_; }
    double at(std::size_t row, std::size_t col, std::size_t ch) const {
        return pixels_[(row * width_ + col) * channels_ + ch];
    }

    bool operator==(const ImageTensor&) const = default;

private:
    std::size_t height_ = 0;
    std::size_t width_ = 0;
    std::size_t channels_ = 0;
    std::vector<double> pixels_;
};

enum class Split { Pool, Validation, Test };

std::string_view to_string(Split split);
std::optional<Split> parse_split(std::string_view text);

struct ImagePath {
    std::string path;
    bool operator==(const ImagePath&) const = default;
};
struct RawFeatures {
    std::vector<double> values;
    bool operator==(const RawFeatures&) const = default;
};

struct DatasetItem {
    std::string id;
    std::variant<ImagePath, RawFeatures> source;
    int label = 0;
    Split split = Split::Pool;
    // Synthetic generator marks inflated-variance draws.
    bool outlier = false;

    bool has_features() const noexcept { return std::holds_alternative<RawFeatures>(source); }
    bool operator==(const DatasetItem&) const = default;
};

struct SelectionBudget {
    std::size_t shots_per_class = 1;
    int num_classes = 1;
};

struct ScoredId {
    std::string id;
    double score = 0.0;
    bool operator==(const ScoredId&) const = default;
};

struct SelectionResult {
    std::string strategy;
    std::uint64_t seed = 0;
    std::string config_hash;
    // Echo of every knob that produced this selection, serialized as-is.
    nlohmann::json config = nlohmann::json::object();
    // class id -> chosen items in preference order.
    std::map<int, std::vector<ScoredId>> classes;

    std::vector<std::string> ids_for_class(int class_id) const;
    bool operator==(const SelectionResult&) const = default;
};

}  // namespace fsel
