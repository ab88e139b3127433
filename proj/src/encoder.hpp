#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <shared_mutex>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "manifest.hpp"
#include "types.hpp"

namespace fsel {

// Maps images to fixed-dimension embeddings. Implementations must be safe
// for concurrent calls.
class EmbeddingProvider {
public:
    virtual ~EmbeddingProvider() = default;

    virtual std::string name() const = 0;
    virtual std::size_t dim() const = 0;
    virtual bool normalizes() const = 0;
    virtual bool can_encode_images() const { return true; }

    // One embedding per image, order preserved.
    virtual std::vector<Embedding> encode_images(std::span<const ImageTensor> images) const = 0;
    Embedding encode_image(const ImageTensor& image) const;

    // Precomputed embedding by item id, if the provider carries one.
    virtual const Embedding* lookup(std::string_view /*id*/) const { return nullptr; }
};

struct ReferenceEncoderConfig {
    std::uint64_t proj_seed = 42;
    std::size_t out_dim = 64;
};

inline constexpr std::size_t kPooledSide = 8;
inline constexpr std::size_t kPooledSize = kPooledSide * kPooledSide;

// Grayscale -> 8x8 average pool -> fixed seeded Gaussian projection -> L2
// normalize. Linear up to the final normalization.
class ReferenceEncoder final : public EmbeddingProvider {
public:
    explicit ReferenceEncoder(ReferenceEncoderConfig config = {});

    std::string name() const override { return "reference"; }
    std::size_t dim() const override { return config_.out_dim; }
    bool normalizes() const override { return true; }
    std::vector<Embedding> encode_images(std::span<const ImageTensor> images) const override;

    Embedding encode(const ImageTensor& image) const;
    const ReferenceEncoderConfig& config() const noexcept { return config_; }
    // Row-major out_dim x 64.
    std::span<const double> projection() const noexcept { return projection_; }

    static std::vector<double> pool_grayscale(const ImageTensor& image);

private:
    ReferenceEncoderConfig config_;
    std::vector<double> projection_;
};

// id -> embedding map sharing one dimension. Insertion order is kept so the
// written file is deterministic.
class EmbeddingCache {
public:
    explicit EmbeddingCache(std::size_t dim, std::string provenance = {});

    std::size_t dim() const noexcept { return dim_; }
    std::size_t size() const;
    const std::string& provenance() const noexcept { return provenance_; }

    bool contains(std::string_view id) const;
    // Pointer stays valid for the cache's lifetime.
    const Embedding* find(std::string_view id) const;
    // Stored values are rounded to f32, matching the on-disk precision.
    void insert(const std::string& id, const Embedding& embedding);
    std::vector<std::string> ids() const;

    static constexpr std::uint32_t kVersion = 1;
    void write(const std::filesystem::path& path) const;
    static EmbeddingCache read(const std::filesystem::path& path);
    void write(std::ostream& out) const;
    static EmbeddingCache read(std::istream& in);

private:
    std::size_t dim_;
    std::string provenance_;
    std::unique_ptr<std::shared_mutex> mutex_ = std::make_unique<std::shared_mutex>();
    std::vector<std::string> order_;
    std::unordered_map<std::string, std::unique_ptr<Embedding>> entries_;
};

// A cache attached in front of an optional image-capable fallback.
class CacheProvider final : public EmbeddingProvider {
public:
    CacheProvider(std::shared_ptr<const EmbeddingCache> cache, std::shared_ptr<const EmbeddingProvider> fallback = {});

    std::string name() const override { return "cache"; }
    std::size_t dim() const override { return cache_->dim(); }
    bool normalizes() const override { return fallback_ ? fallback_->normalizes() : true; }
    bool can_encode_images() const override { return fallback_ && fallback_->can_encode_images(); }
    std::vector<Embedding> encode_images(std::span<const ImageTensor> images) const override;
    const Embedding* lookup(std::string_view id) const override { return cache_->find(id); }

    const EmbeddingCache& cache() const noexcept { return *cache_; }

private:
    std::shared_ptr<const EmbeddingCache> cache_;
    std::shared_ptr<const EmbeddingProvider> fallback_;
};

// Synthetic feature vectors tiled row-major into a 16x16 grayscale image and
// min-max mapped to [0,1].
inline constexpr std::size_t kPseudoImageSide = 16;
ImageTensor pseudo_image(std::span<const double> features);

// The image an item stands for: its decoded PNG, or the pseudo-image of its
// features. Relative paths resolve against base_dir.
ImageTensor item_image(const DatasetItem& item, const std::filesystem::path& base_dir = {});

// Cache hit, then raw features (normalized when the provider normalizes),
// then image encoding.
Embedding embed_item(const EmbeddingProvider& provider, const DatasetItem& item,
                     const std::filesystem::path& base_dir = {});

// Batched form of embed_item for a set of manifest indices; image items are
// sent to the provider in batches of batch_size.
std::vector<Embedding> embed_items(const EmbeddingProvider& provider, const DatasetManifest& manifest,
                                   std::span<const std::size_t> indices, const std::filesystem::path& base_dir = {},
                                   std::size_t batch_size = 16);

}  // namespace fsel
