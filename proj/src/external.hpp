#pragma once

#include <chrono>
#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

#include "encoder.hpp"

namespace fsel {

struct ExternalConfig {
    // scheme://host:port[/prefix]; requests go to <prefix>/embed.
    std::string url;
    std::size_t dim = 512;
    bool normalize = true;
    int max_retries = 3;
    std::chrono::milliseconds initial_backoff{50};
    std::chrono::milliseconds timeout{30000};
    std::size_t batch_size = 16;
    std::size_t max_in_flight = 1;
};

// FSEL_EMBED_TIMEOUT_MS, or `fallback` when unset or unparsable.
std::chrono::milliseconds embed_timeout_from_env(std::chrono::milliseconds fallback = std::chrono::milliseconds(30000));

std::string build_embed_request(std::span<const ImageTensor> images);

// Validates a response body against the declared dim and the batch size.
// Throws ErrorCode::Validation naming the offending index.
std::vector<std::vector<double>> parse_embed_response(std::string_view body, std::size_t expected_dim,
                                                      std::size_t expected_count);

// HTTP client for the /embed protocol. Retries transport failures and 5xx
// responses with exponential backoff; validation failures are not retried.
class ExternalEmbeddingClient final : public EmbeddingProvider {
public:
    explicit ExternalEmbeddingClient(ExternalConfig config);

    std::string name() const override { return "external"; }
    std::size_t dim() const override { return config_.dim; }
    bool normalizes() const override { return config_.normalize; }
    std::vector<Embedding> encode_images(std::span<const ImageTensor> images) const override;

    const ExternalConfig& config() const noexcept { return config_; }

private:
    std::vector<Embedding> post_batch(std::span<const ImageTensor> images) const;

    ExternalConfig config_;
    std::string host_;
    std::string path_;
};

}  // namespace fsel
