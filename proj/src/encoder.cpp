#include "encoder.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <fstream>
#include <istream>
#include <mutex>
#include <ostream>

#include "error.hpp"
#include "image_io.hpp"
#include "rng.hpp"

namespace fsel {

Embedding EmbeddingProvider::encode_image(const ImageTensor& image) const {
    auto out = encode_images(std::span<const ImageTensor>(&image, 1));
    if (out.size() != 1) throw Error(ErrorCode::Provider, name() + " returned " + std::to_string(out.size()) + " embeddings for 1 image");
    return std::move(out.front());
}

// ---------------------------------------------------------------------------
// Reference encoder

ReferenceEncoder::ReferenceEncoder(ReferenceEncoderConfig config) : config_(config) {
    if (config_.out_dim == 0) throw Error(ErrorCode::InvalidArgument, "out_dim must be positive");
    Engine engine(config_.proj_seed);
    projection_.resize(config_.out_dim * kPooledSize);
    for (double& w : projection_) w = standard_normal(engine);
}

std::vector<double> ReferenceEncoder::pool_grayscale(const ImageTensor& image) {
    const std::size_t rows = image.height();
    const std::size_t cols = image.width();
    const std::size_t channels = image.channels();

    std::vector<double> gray(rows * cols);
    for (std::size_t i = 0; i < rows * cols; ++i) {
        double acc = 0.0;
        for (std::size_t c = 0; c < channels; ++c) acc += image.pixels()[i * channels + c];
        gray[i] = acc / static_cast<double>(channels);
    }

    // Cell a spans [floor(a*M/8), ceil((a+1)*M/8)); exact blocks when 8 | M.
    std::vector<double> pooled(kPooledSize);
    for (std::size_t a = 0; a < kPooledSide; ++a) {
        const std::size_t r0 = a * rows / kPooledSide;
        const std::size_t r1 = ((a + 1) * rows + kPooledSide - 1) / kPooledSide;
        for (std::size_t b = 0; b < kPooledSide; ++b) {
            const std::size_t c0 = b * cols / kPooledSide;
            const std::size_t c1 = ((b + 1) * cols + kPooledSide - 1) / kPooledSide;
            double acc = 0.0;
            for (std::size_t r = r0; r < r1; ++r) {
                for (std::size_t c = c0; c < c1; ++c) acc += gray[r * cols + c];
            }
            pooled[a * kPooledSide + b] = acc / static_cast<double>((r1 - r0) * (c1 - c0));
        }
    }
    return pooled;
}

Embedding ReferenceEncoder::encode(const ImageTensor& image) const {
    const auto pooled = pool_grayscale(image);
    std::vector<double> out(config_.out_dim, 0.0);
    for (std::size_t r = 0; r < config_.out_dim; ++r) {
        const double* row = projection_.data() + r * kPooledSize;
        double acc = 0.0;
        for (std::size_t k = 0; k < kPooledSize; ++k) acc += row[k] * pooled[k];
        out[r] = acc;
    }
    if (!(l2_norm(out) > 0.0)) throw Error(ErrorCode::Degenerate, "degenerate embedding");
    return Embedding::normalized_from(std::move(out));
}

std::vector<Embedding> ReferenceEncoder::encode_images(std::span<const ImageTensor> images) const {
    std::vector<Embedding> out;
    out.reserve(images.size());
    for (std::size_t i = 0; i < images.size(); ++i) {
        try {
            out.push_back(encode(images[i]));
        } catch (const Error& e) {
            throw BatchItemError(e.code(), i, e.what());
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Embedding cache

namespace {

constexpr std::array<char, 4> kMagic{'F', 'S', 'E', 'C'};

void put_u16(std::ostream& out, std::uint16_t v) {
    const char b[2] = {static_cast<char>(v & 0xFF), static_cast<char>(v >> 8)};
    out.write(b, 2);
}

void put_u32(std::ostream& out, std::uint32_t v) {
    char b[4];
    for (int i = 0; i < 4; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xFF);
    out.write(b, 4);
}

std::uint32_t get_u32(std::istream& in, const char* what) {
    unsigned char b[4];
    if (!in.read(reinterpret_cast<char*>(b), 4)) throw Error(ErrorCode::Parse, std::string("cache truncated reading ") + what);
    return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
           (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

std::uint16_t get_u16(std::istream& in) {
    unsigned char b[2];
    if (!in.read(reinterpret_cast<char*>(b), 2)) throw Error(ErrorCode::Parse, "cache truncated reading id length");
    return static_cast<std::uint16_t>(b[0] | (b[1] << 8));
}

std::vector<double> round_to_f32(std::span<const double> values) {
    std::vector<double> out(values.size());
    for (std::size_t i = 0; i < values.size(); ++i) out[i] = static_cast<double>(static_cast<float>(values[i]));
    return out;
}

}  // namespace

EmbeddingCache::EmbeddingCache(std::size_t dim, std::string provenance) : dim_(dim), provenance_(std::move(provenance)) {
    if (dim_ == 0) throw Error(ErrorCode::InvalidArgument, "cache dim must be positive");
}

std::size_t EmbeddingCache::size() const {
    std::shared_lock lock(*mutex_);
    return order_.size();
}

bool EmbeddingCache::contains(std::string_view id) const { return find(id) != nullptr; }

const Embedding* EmbeddingCache::find(std::string_view id) const {
    std::shared_lock lock(*mutex_);
    auto it = entries_.find(std::string(id));
    return it == entries_.end() ? nullptr : it->second.get();
}

void EmbeddingCache::insert(const std::string& id, const Embedding& embedding) {
    if (embedding.dim() != dim_) {
        throw Error(ErrorCode::DimMismatch, "embedding for '" + id + "' has dim " + std::to_string(embedding.dim()) +
                                                ", cache dim is " + std::to_string(dim_));
    }
    if (id.empty() || id.size() > 0xFFFF) throw Error(ErrorCode::InvalidArgument, "cache id length out of range");
    auto rounded = round_to_f32(embedding.values());
    // f32 rounding can move the norm by ~1e-8, well inside the normalized tolerance.
    auto stored = std::make_unique<Embedding>(std::move(rounded), embedding.is_normalized());
    std::unique_lock lock(*mutex_);
    auto [it, inserted] = entries_.try_emplace(id);
    if (inserted) order_.push_back(id);
    it->second = std::move(stored);
}

std::vector<std::string> EmbeddingCache::ids() const {
    std::shared_lock lock(*mutex_);
    return order_;
}

void EmbeddingCache::write(std::ostream& out) const {
    std::shared_lock lock(*mutex_);
    out.write(kMagic.data(), kMagic.size());
    put_u32(out, kVersion);
    put_u32(out, static_cast<std::uint32_t>(dim_));
    put_u32(out, static_cast<std::uint32_t>(order_.size()));
    for (const auto& id : order_) {
        put_u16(out, static_cast<std::uint16_t>(id.size()));
        out.write(id.data(), static_cast<std::streamsize>(id.size()));
        for (double v : entries_.at(id)->values()) put_u32(out, std::bit_cast<std::uint32_t>(static_cast<float>(v)));
    }
    if (!out) throw Error(ErrorCode::Io, "failed writing embedding cache");
}

void EmbeddingCache::write(const std::filesystem::path& path) const {
    // Write-then-rename so a crash never leaves a half-written cache behind.
    auto tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw Error(ErrorCode::Io, "cannot write cache '" + path.string() + "'");
        write(out);
    }
    std::filesystem::rename(tmp, path);
}

EmbeddingCache EmbeddingCache::read(std::istream& in) {
    std::array<char, 4> magic{};
    if (!in.read(magic.data(), magic.size()) || magic != kMagic) throw Error(ErrorCode::Parse, "not an embedding cache (bad magic)");
    const auto version = get_u32(in, "version");
    if (version != kVersion) throw Error(ErrorCode::Parse, "unsupported cache version " + std::to_string(version));
    const auto dim = get_u32(in, "dim");
    const auto count = get_u32(in, "count");
    if (dim == 0) throw Error(ErrorCode::Parse, "cache dim must be positive");

    EmbeddingCache cache(dim);
    std::vector<double> values(dim);
    for (std::uint32_t r = 0; r < count; ++r) {
        const auto len = get_u16(in);
        std::string id(len, '\0');
        if (!in.read(id.data(), len)) throw Error(ErrorCode::Parse, "cache truncated reading id of record " + std::to_string(r));
        for (std::uint32_t k = 0; k < dim; ++k) {
            const float f = std::bit_cast<float>(get_u32(in, "values"));
            if (!std::isfinite(f)) throw Error(ErrorCode::Parse, "non-finite value in cache record '" + id + "'");
            values[k] = f;
        }
        if (cache.contains(id)) throw Error(ErrorCode::DuplicateId, "duplicate id '" + id + "' in cache");
        const bool unit = std::abs(l2_norm(values) - 1.0) <= kNormTolerance;
        cache.insert(id, Embedding(values, unit));
    }
    if (in.peek() != std::char_traits<char>::eof()) throw Error(ErrorCode::Parse, "trailing bytes after cache records");
    return cache;
}

EmbeddingCache EmbeddingCache::read(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::Io, "cannot open cache '" + path.string() + "'");
    auto cache = read(in);
    cache.provenance_ = path.string();
    return cache;
}

// ---------------------------------------------------------------------------
// Cache provider

CacheProvider::CacheProvider(std::shared_ptr<const EmbeddingCache> cache, std::shared_ptr<const EmbeddingProvider> fallback)
    : cache_(std::move(cache)), fallback_(std::move(fallback)) {
    if (!cache_) throw Error(ErrorCode::InvalidArgument, "cache provider needs a cache");
    if (fallback_ && fallback_->dim() != cache_->dim()) {
        throw Error(ErrorCode::DimMismatch, "cache dim " + std::to_string(cache_->dim()) + " does not match provider '" +
                                                fallback_->name() + "' dim " + std::to_string(fallback_->dim()));
    }
}

std::vector<Embedding> CacheProvider::encode_images(std::span<const ImageTensor> images) const {
    if (!fallback_) throw Error(ErrorCode::Provider, "cache miss with no fallback provider");
    return fallback_->encode_images(images);
}

// ---------------------------------------------------------------------------
// Items

ImageTensor pseudo_image(std::span<const double> features) {
    if (features.empty()) throw Error(ErrorCode::InvalidArgument, "pseudo-image needs at least one feature");
    const auto [lo_it, hi_it] = std::minmax_element(features.begin(), features.end());
    const double lo = *lo_it;
    const double span = *hi_it - lo;
    constexpr std::size_t n = kPseudoImageSide * kPseudoImageSide;
    std::vector<double> pixels(n);
    for (std::size_t p = 0; p < n; ++p) {
        const double x = features[p % features.size()];
        pixels[p] = span > 0.0 ? std::clamp((x - lo) / span, 0.0, 1.0) : 0.5;
    }
    return ImageTensor(kPseudoImageSide, kPseudoImageSide, 1, std::move(pixels));
}

ImageTensor item_image(const DatasetItem& item, const std::filesystem::path& base_dir) {
    if (const auto* f = std::get_if<RawFeatures>(&item.source)) return pseudo_image(f->values);
    std::filesystem::path p = std::get<ImagePath>(item.source).path;
    if (p.is_relative() && !base_dir.empty()) p = base_dir / p;
    try {
        return read_png(p);
    } catch (const Error& e) {
        throw Error(ErrorCode::Io, "item '" + item.id + "' (" + p.string() + "): " + e.what());
    }
}

namespace {

Embedding embed_features(const EmbeddingProvider& provider, const DatasetItem& item) {
    const auto& values = std::get<RawFeatures>(item.source).values;
    if (values.size() != provider.dim()) {
        throw Error(ErrorCode::DimMismatch, "item '" + item.id + "' has " + std::to_string(values.size()) +
                                                " features, provider dim is " + std::to_string(provider.dim()));
    }
    if (provider.normalizes()) {
        try {
            return Embedding::normalized_from(values);
        } catch (const Error&) {
            throw Error(ErrorCode::Degenerate, "degenerate embedding for item '" + item.id + "'");
        }
    }
    return Embedding(values);
}

void check_dim(const EmbeddingProvider& provider, const Embedding& e, const std::string& id) {
    if (e.dim() != provider.dim()) {
        throw Error(ErrorCode::DimMismatch, "embedding for '" + id + "' has dim " + std::to_string(e.dim()) +
                                                ", provider dim is " + std::to_string(provider.dim()));
    }
}

}  // namespace

Embedding embed_item(const EmbeddingProvider& provider, const DatasetItem& item, const std::filesystem::path& base_dir) {
    if (const auto* hit = provider.lookup(item.id)) {
        check_dim(provider, *hit, item.id);
        return *hit;
    }
    if (item.has_features()) return embed_features(provider, item);
    if (!provider.can_encode_images()) throw Error(ErrorCode::Provider, "cache miss for '" + item.id + "' with no fallback");
    auto e = provider.encode_image(item_image(item, base_dir));
    check_dim(provider, e, item.id);
    return e;
}

std::vector<Embedding> embed_items(const EmbeddingProvider& provider, const DatasetManifest& manifest,
                                   std::span<const std::size_t> indices, const std::filesystem::path& base_dir,
                                   std::size_t batch_size) {
    if (batch_size == 0) batch_size = 1;
    std::vector<Embedding> out(indices.size());
    std::vector<std::size_t> pending;
    for (std::size_t k = 0; k < indices.size(); ++k) {
        const auto& item = manifest.items()[indices[k]];
        if (provider.lookup(item.id) || item.has_features()) {
            out[k] = embed_item(provider, item, base_dir);
        } else {
            pending.push_back(k);
        }
    }
    if (!pending.empty() && !provider.can_encode_images()) {
        throw Error(ErrorCode::Provider,
                    "cache miss for '" + manifest.items()[indices[pending.front()]].id + "' with no fallback");
    }
    for (std::size_t start = 0; start < pending.size(); start += batch_size) {
        const std::size_t end = std::min(pending.size(), start + batch_size);
        std::vector<ImageTensor> images;
        images.reserve(end - start);
        for (std::size_t j = start; j < end; ++j) images.push_back(item_image(manifest.items()[indices[pending[j]]], base_dir));
        std::vector<Embedding> batch;
        try {
            batch = provider.encode_images(images);
        } catch (const BatchItemError& e) {
            const auto& item = manifest.items()[indices[pending[start + std::min(e.index(), end - start - 1)]]];
            throw Error(e.code(), "item '" + item.id + "': " + e.what());
        } catch (const Error& e) {
            throw Error(e.code(), "batch starting at item '" + manifest.items()[indices[pending[start]]].id + "': " + e.what());
        }
        if (batch.size() != images.size()) throw Error(ErrorCode::Provider, "provider returned wrong batch size");
        for (std::size_t j = start; j < end; ++j) {
            check_dim(provider, batch[j - start], manifest.items()[indices[pending[j]]].id);
            out[pending[j]] = std::move(batch[j - start]);
        }
    }
    return out;
}

}  // namespace fsel
