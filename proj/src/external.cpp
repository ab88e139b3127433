#include "external.hpp"

#include <cmath>
#include <cstdlib>
#include <future>
#include <thread>

#include <httplib.h>
#include <json.hpp>

#include "error.hpp"
#include "image_io.hpp"

namespace fsel {

using nlohmann::json;

std::chrono::milliseconds embed_timeout_from_env(std::chrono::milliseconds fallback) {
    const char* raw = std::getenv("FSEL_EMBED_TIMEOUT_MS");
    if (raw == nullptr || *raw == '\0') return fallback;
    char* end = nullptr;
    const long long v = std::strtoll(raw, &end, 10);
    if (end == raw || *end != '\0' || v <= 0) return fallback;
    return std::chrono::milliseconds(v);
}

std::string build_embed_request(std::span<const ImageTensor> images) {
    json images_json = json::array();
    for (const auto& image : images) images_json.push_back({{"b64", base64_encode(encode_png(image))}});
    return json{{"images", std::move(images_json)}}.dump();
}

std::vector<std::vector<double>> parse_embed_response(std::string_view body, std::size_t expected_dim,
                                                      std::size_t expected_count) {
    json doc;
    try {
        doc = json::parse(body);
    } catch (const json::parse_error& e) {
        throw Error(ErrorCode::Validation, std::string("malformed response: ") + e.what());
    }
    if (!doc.is_object() || !doc.contains("dim") || !doc.contains("embeddings")) {
        throw Error(ErrorCode::Validation, "malformed response: expected keys 'dim' and 'embeddings'");
    }
    if (!doc["dim"].is_number_integer()) throw Error(ErrorCode::Validation, "malformed response: 'dim' is not an integer");
    const auto dim = doc["dim"].get<std::int64_t>();
    if (dim != static_cast<std::int64_t>(expected_dim)) {
        throw Error(ErrorCode::Validation, "response dim " + std::to_string(dim) + " does not match provider dim " +
                                               std::to_string(expected_dim));
    }
    const auto& rows = doc["embeddings"];
    if (!rows.is_array()) throw Error(ErrorCode::Validation, "malformed response: 'embeddings' is not an array");
    if (rows.size() != expected_count) {
        throw Error(ErrorCode::Validation, "response has " + std::to_string(rows.size()) + " embeddings for " +
                                               std::to_string(expected_count) + " images");
    }
    std::vector<std::vector<double>> out;
    out.reserve(rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
        const auto& row = rows[i];
        if (!row.is_array() || row.size() != expected_dim) {
            throw BatchItemError(ErrorCode::Validation, i,
                                 "embedding " + std::to_string(i) + " does not have dim " + std::to_string(expected_dim));
        }
        std::vector<double> values(expected_dim);
        for (std::size_t j = 0; j < expected_dim; ++j) {
            const double v = row[j].is_number() ? row[j].get<double>() : std::nan("");
            if (!std::isfinite(v)) {
                throw BatchItemError(ErrorCode::Validation, i,
                                     "non-finite value at embedding " + std::to_string(i) + " component " + std::to_string(j));
            }
            values[j] = v;
        }
        out.push_back(std::move(values));
    }
    return out;
}

ExternalEmbeddingClient::ExternalEmbeddingClient(ExternalConfig config) : config_(std::move(config)) {
    if (config_.dim == 0) throw Error(ErrorCode::InvalidArgument, "external provider dim must be positive");
    if (config_.batch_size == 0) config_.batch_size = 1;
    if (config_.max_in_flight == 0) config_.max_in_flight = 1;
    const auto scheme = config_.url.find("://");
    if (scheme == std::string::npos) throw Error(ErrorCode::InvalidArgument, "external URL needs a scheme: '" + config_.url + "'");
    const auto slash = config_.url.find('/', scheme + 3);
    host_ = config_.url.substr(0, slash);
    std::string prefix = slash == std::string::npos ? std::string() : config_.url.substr(slash);
    while (!prefix.empty() && prefix.back() == '/') prefix.pop_back();
    path_ = prefix + "/embed";
}

std::vector<Embedding> ExternalEmbeddingClient::post_batch(std::span<const ImageTensor> images) const {
    const std::string body = build_embed_request(images);
    httplib::Client client(host_);
    const auto secs = std::chrono::duration_cast<std::chrono::seconds>(config_.timeout);
    const auto usecs = std::chrono::duration_cast<std::chrono::microseconds>(config_.timeout - secs);
    client.set_connection_timeout(secs.count(), usecs.count());
    client.set_read_timeout(secs.count(), usecs.count());
    client.set_write_timeout(secs.count(), usecs.count());

    auto backoff = config_.initial_backoff;
    std::string last_error;
    for (int attempt = 0; attempt <= config_.max_retries; ++attempt) {
        if (attempt > 0) {
            std::this_thread::sleep_for(backoff);
            backoff *= 2;
        }
        auto res = client.Post(path_, body, "application/json");
        if (!res) {
            last_error = "transport error: " + httplib::to_string(res.error());
            continue;
        }
        if (res->status >= 500) {
            last_error = "server returned status " + std::to_string(res->status);
            continue;
        }
        if (res->status != 200) {
            throw Error(ErrorCode::Provider, "embedding service returned status " + std::to_string(res->status));
        }
        auto rows = parse_embed_response(res->body, config_.dim, images.size());
        std::vector<Embedding> out;
        out.reserve(rows.size());
        for (std::size_t i = 0; i < rows.size(); ++i) {
            try {
                out.push_back(config_.normalize ? Embedding::normalized_from(std::move(rows[i])) : Embedding(std::move(rows[i])));
            } catch (const Error& e) {
                throw BatchItemError(e.code(), i, std::string(e.what()) + " at embedding " + std::to_string(i));
            }
        }
        return out;
    }
    throw Error(ErrorCode::Provider, "embedding service at " + config_.url + " failed after " +
                                         std::to_string(config_.max_retries + 1) + " attempts: " + last_error);
}

std::vector<Embedding> ExternalEmbeddingClient::encode_images(std::span<const ImageTensor> images) const {
    if (images.empty()) throw Error(ErrorCode::InvalidArgument, "external_embed needs a non-empty batch");
    std::vector<std::span<const ImageTensor>> batches;
    for (std::size_t start = 0; start < images.size(); start += config_.batch_size) {
        batches.push_back(images.subspan(start, std::min(config_.batch_size, images.size() - start)));
    }
    std::vector<Embedding> out;
    out.reserve(images.size());
    // At most max_in_flight requests outstanding; results are consumed in order.
    for (std::size_t start = 0; start < batches.size(); start += config_.max_in_flight) {
        const std::size_t end = std::min(batches.size(), start + config_.max_in_flight);
        std::vector<std::future<std::vector<Embedding>>> inflight;
        for (std::size_t b = start; b < end; ++b) {
            inflight.push_back(std::async(std::launch::async, [this, span = batches[b]] { return post_batch(span); }));
        }
        for (std::size_t b = start; b < end; ++b) {
            const std::size_t offset = static_cast<std::size_t>(batches[b].data() - images.data());
            try {
                for (auto& e : inflight[b - start].get()) out.push_back(std::move(e));
            } catch (const BatchItemError& e) {
                for (std::size_t rest = b - start + 1; rest < inflight.size(); ++rest) inflight[rest].wait();
                throw BatchItemError(e.code(), offset + e.index(), e.what());
            }
        }
    }
    return out;
}

}  // namespace fsel
