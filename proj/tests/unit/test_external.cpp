#include <doctest.h>

#include <cstdlib>
#include <random>

#include "error.hpp"
#include "external.hpp"
#include "mock_server.hpp"
#include "test_support.hpp"

using namespace fsel;
using fsel::mock::Fault;

namespace {

std::vector<ImageTensor> images(std::size_t n) {
    std::mt19937_64 rng(17);
    std::vector<ImageTensor> out;
    for (std::size_t i = 0; i < n; ++i) out.push_back(fsel::testing::random_image(rng, 16, 16, 3));
    return out;
}

ExternalConfig client_config(const std::string& url) {
    ExternalConfig cfg;
    cfg.url = url;
    cfg.dim = 64;
    cfg.initial_backoff = std::chrono::milliseconds(1);
    cfg.timeout = std::chrono::milliseconds(5000);
    cfg.batch_size = 4;
    return cfg;
}

ErrorCode code_of(const ExternalEmbeddingClient& client, std::span<const ImageTensor> imgs, std::string* msg = nullptr) {
    try {
        client.encode_images(imgs);
    } catch (const Error& e) {
        if (msg) *msg = e.what();
        return e.code();
    }
    FAIL("expected an error");
    return ErrorCode::InvalidArgument;
}

}  // namespace

TEST_CASE("response parsing validates shape and values") {
    CHECK(parse_embed_response(R"({"dim":2,"embeddings":[[1,2],[3,4]]})", 2, 2)[1][0] == 3.0);
    CHECK_THROWS_WITH_AS(parse_embed_response(R"({"dim":2,"embeddings":[[1,null],[3,4]]})", 2, 2),
                         "non-finite value at embedding 0 component 1", Error);
    CHECK_THROWS_AS(parse_embed_response(R"({"dim":3,"embeddings":[[1,2,3]]})", 2, 1), Error);
    CHECK_THROWS_AS(parse_embed_response(R"({"dim":2,"embeddings":[[1,2]]})", 2, 2), Error);
    CHECK_THROWS_AS(parse_embed_response(R"({"dim":2,"embeddings":[[1,2,3]]})", 2, 1), Error);
    CHECK_THROWS_AS(parse_embed_response(R"({"dim":2,"embeddings":[[1,2]])", 2, 1), Error);
    CHECK_THROWS_AS(parse_embed_response(R"([1,2])", 2, 1), Error);
}

TEST_CASE("request body carries base64 PNGs") {
    const auto body = nlohmann::json::parse(build_embed_request(images(2)));
    REQUIRE(body["images"].size() == 2);
    const auto decoded = decode_png(base64_decode(body["images"][0]["b64"].get<std::string>()));
    CHECK(decoded == images(1)[0]);
}

TEST_CASE("timeout comes from the environment") {
    ::setenv("FSEL_EMBED_TIMEOUT_MS", "1234", 1);
    CHECK(embed_timeout_from_env().count() == 1234);
    ::setenv("FSEL_EMBED_TIMEOUT_MS", "garbage", 1);
    CHECK(embed_timeout_from_env().count() == 30000);
    ::unsetenv("FSEL_EMBED_TIMEOUT_MS");
    CHECK(embed_timeout_from_env(std::chrono::milliseconds(7)).count() == 7);
}

TEST_CASE("client against the mock server") {
    fsel::mock::MockEmbeddingServer server;
    server.start();
    const auto imgs = images(10);
    ReferenceEncoder local;

    SUBCASE("healthy server matches the local reference encoder") {
        ExternalEmbeddingClient client(client_config(server.url()));
        const auto out = client.encode_images(imgs);
        REQUIRE(out.size() == 10);
        for (std::size_t i = 0; i < 10; ++i) {
            const auto ref = local.encode(imgs[i]);
            for (std::size_t k = 0; k < 64; ++k) CHECK(out[i][k] == doctest::Approx(ref[k]).epsilon(1e-12));
        }
        CHECK(server.requests() == 3);
    }
    SUBCASE("transient 5xx is retried") {
        server.set_fault(Fault::Transient, 2);
        ExternalEmbeddingClient client(client_config(server.url()));
        CHECK(client.encode_images(std::span(imgs).first(3)).size() == 3);
        CHECK(server.requests() == 3);
    }
    SUBCASE("persistent 5xx gives up after the retry budget") {
        server.set_fault(Fault::Transient, 100);
        auto cfg = client_config(server.url());
        cfg.max_retries = 2;
        ExternalEmbeddingClient client(cfg);
        CHECK(code_of(client, std::span(imgs).first(1)) == ErrorCode::Provider);
        CHECK(server.requests() == 3);
    }
    SUBCASE("validation failures are not retried") {
        std::string msg;
        server.set_fault(Fault::NullComponent);
        ExternalEmbeddingClient client(client_config(server.url()));
        CHECK(code_of(client, std::span(imgs).first(2), &msg) == ErrorCode::Validation);
        CHECK(msg == "non-finite value at embedding 1 component 3");
        CHECK(server.requests() == 1);
    }
    SUBCASE("wrong dim, count mismatch and malformed JSON") {
        ExternalEmbeddingClient client(client_config(server.url()));
        for (auto fault : {Fault::WrongDim, Fault::CountMismatch, Fault::Malformed}) {
            CAPTURE(fsel::mock::to_string(fault));
            server.set_fault(fault);
            CHECK(code_of(client, std::span(imgs).first(2)) == ErrorCode::Validation);
        }
    }
    SUBCASE("4xx is a provider error") {
        server.set_fault(Fault::BadRequest);
        ExternalEmbeddingClient client(client_config(server.url()));
        CHECK(code_of(client, std::span(imgs).first(1)) == ErrorCode::Provider);
        CHECK(server.requests() == 1);
    }
    SUBCASE("several requests in flight keep order") {
        auto cfg = client_config(server.url());
        cfg.batch_size = 1;
        cfg.max_in_flight = 4;
        ExternalEmbeddingClient client(cfg);
        const auto out = client.encode_images(imgs);
        for (std::size_t i = 0; i < 10; ++i) CHECK(out[i] == client.encode_image(imgs[i]));
    }
}

TEST_CASE("unreachable server is a provider error after retries") {
    int port;
    {
        fsel::mock::MockEmbeddingServer probe;
        port = probe.start();
    }
    auto cfg = client_config("http://127.0.0.1:" + std::to_string(port));
    cfg.max_retries = 1;
    cfg.timeout = std::chrono::milliseconds(500);
    ExternalEmbeddingClient client(cfg);
    std::string msg;
    CHECK(code_of(client, images(1), &msg) == ErrorCode::Provider);
    CHECK(msg.find("transport error") != std::string::npos);
}
