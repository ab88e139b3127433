#include "types.hpp"

#include <algorithm>
#include <cmath>

#include "error.hpp"

namespace fsel {

namespace {

void require_finite(std::span<const double> values, const char* what) {
    for (std::size_t i = 0; i < values.size(); ++i) {
        if (!std::isfinite(values[i])) {
            throw Error(ErrorCode::InvalidArgument,
                        std::string(what) + " has non-finite value at index " + std::to_string(i));
        }
    }
}

}  // namespace

Embedding::Embedding(std::vector<double> values, bool normalized) : values_(std::move(values)), normalized_(normalized) {
    if (values_.empty()) throw Error(ErrorCode::InvalidArgument, "embedding must have positive dimension");
    require_finite(values_, "embedding");
    if (normalized_ && std::abs(norm() - 1.0) > kNormTolerance) {
        throw Error(ErrorCode::InvalidArgument, "embedding flagged normalized but has norm " + std::to_string(norm()));
    }
}

Embedding Embedding::normalized_from(std::vector<double> values) {
    if (values.empty()) throw Error(ErrorCode::InvalidArgument, "embedding must have positive dimension");
    require_finite(values, "embedding");
    const double n = l2_norm(values);
    if (!(n > 0.0) || !std::isfinite(n)) throw Error(ErrorCode::Degenerate, "degenerate embedding");
    for (double& v : values) v /= n;
    return Embedding(std::move(values), true);
}

double Embedding::norm() const noexcept { return l2_norm(values_); }

double dot(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) {
        throw Error(ErrorCode::DimMismatch,
                    "dimension mismatch: " + std::to_string(a.size()) + " vs " + std::to_string(b.size()));
    }
    double acc = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
    return acc;
}

double l2_norm(std::span<const double> v) {
    double acc = 0.0;
    for (double x : v) acc += x * x;
    return std::sqrt(acc);
}

double cosine(std::span<const double> a, std::span<const double> b) {
    const double num = dot(a, b);
    const double den = l2_norm(a) * l2_norm(b);
    const double c = num / den;
    if (!std::isfinite(c)) throw Error(ErrorCode::Degenerate, "cosine undefined for zero-norm vector");
    return std::clamp(c, -1.0, 1.0);
}

double euclidean_distance(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) throw Error(ErrorCode::DimMismatch, "dimension mismatch");
    double acc = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) acc += (a[i] - b[i]) * (a[i] - b[i]);
    return std::sqrt(acc);
}

ImageTensor::ImageTensor(std::size_t height, std::size_t width, std::size_t channels, std::vector<double> pixels)
    : height_(height), width_(width), channels_(channels), pixels_(std::move(pixels)) {
    if (height_ == 0 || width_ == 0) throw Error(ErrorCode::InvalidArgument, "image dimensions must be positive");
    if (channels_ != 1 && channels_ != 3) throw Error(ErrorCode::InvalidArgument, "image must have 1 or 3 channels");
    if (pixels_.size() != height_ * width_ * channels_) {
        throw Error(ErrorCode::InvalidArgument, "pixel count does not match declared shape");
    }
    for (double p : pixels_) {
        if (!(p >= 0.0 && p <= 1.0)) throw Error(ErrorCode::InvalidArgument, "pixel value outside [0,1]");
    }
}

ImageTensor ImageTensor::filled(std::size_t height, std::size_t width, std::size_t channels, double value) {
    return ImageTensor(height, width, channels, std::vector<double>(height * width * channels, value));
}

std::string_view to_string(Split split) {
    switch (split) {
        case Split::Pool: return "pool";
        case Split::Validation: return "validation";
        case Split::Test: return "test";
    }
    return "pool";
}

std::optional<Split> parse_split(std::string_view text) {
    if (text == "pool") return Split::Pool;
    if (text == "validation") return Split::Validation;
    if (text == "test") return Split::Test;
    return std::nullopt;
}

std::vector<std::string> SelectionResult::ids_for_class(int class_id) const {
    std::vector<std::string> out;
    if (auto it = classes.find(class_id); it != classes.end()) {
        for (const auto& s : it->second) out.push_back(s.id);
    }
    return out;
}

}  // namespace fsel
