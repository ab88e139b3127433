#include "mock_server.hpp"

#include <stdexcept>

#include <httplib.h>
#include <json.hpp>

#include "encoder.hpp"
#include "image_io.hpp"

namespace fsel::mock {

using nlohmann::json;

Fault parse_fault(const std::string& name) {
    if (name == "none") return Fault::None;
    if (name == "wrong-dim") return Fault::WrongDim;
    if (name == "null") return Fault::NullComponent;
    if (name == "malformed") return Fault::Malformed;
    if (name == "count-mismatch") return Fault::CountMismatch;
    if (name == "transient") return Fault::Transient;
    if (name == "bad-request") return Fault::BadRequest;
    throw std::invalid_argument("unknown fault '" + name + "'");
}

std::string to_string(Fault fault) {
    switch (fault) {
        case Fault::None: return "none";
        case Fault::WrongDim: return "wrong-dim";
        case Fault::NullComponent: return "null";
        case Fault::Malformed: return "malformed";
        case Fault::CountMismatch: return "count-mismatch";
        case Fault::Transient: return "transient";
        case Fault::BadRequest: return "bad-request";
    }
    return "none";
}

struct MockEmbeddingServer::Impl {
    MockConfig config;
    ReferenceEncoder encoder;
    ReferenceEncoder wide;
    std::mutex mutex;
    int transient_left = 0;

    explicit Impl(MockConfig c)
        : config(c),
          encoder({c.proj_seed, c.dim}),
          wide({c.proj_seed, c.dim + 1}),
          transient_left(c.fault == Fault::Transient ? c.transient_failures : 0) {}
};

MockEmbeddingServer::MockEmbeddingServer(MockConfig config)
    : impl_(std::make_unique<Impl>(config)), server_(std::make_unique<httplib::Server>()) {
    server_->Post("/embed", [this](const httplib::Request& req, httplib::Response& res) {
        ++requests_;
        Fault fault;
        {
            std::lock_guard lock(impl_->mutex);
            fault = impl_->config.fault;
            if (fault == Fault::Transient) {
                if (impl_->transient_left > 0) {
                    --impl_->transient_left;
                    res.status = 503;
                    res.set_content("{\"error\":\"warming up\"}", "application/json");
                    return;
                }
            }
        }
        if (fault == Fault::BadRequest) {
            res.status = 400;
            res.set_content("{\"error\":\"rejected\"}", "application/json");
            return;
        }
        if (fault == Fault::Malformed) {
            res.set_content("{\"dim\": 64, \"embeddings\": [[0.1, 0.2", "application/json");
            return;
        }

        std::vector<ImageTensor> images;
        try {
            const auto doc = json::parse(req.body);
            for (const auto& entry : doc.at("images")) images.push_back(decode_png(base64_decode(entry.at("b64").get<std::string>())));
        } catch (const std::exception& e) {
            res.status = 400;
            res.set_content(json{{"error", e.what()}}.dump(), "application/json");
            return;
        }
        images_ += images.size();

        const auto& encoder = fault == Fault::WrongDim ? impl_->wide : impl_->encoder;
        json rows = json::array();
        try {
            for (const auto& image : images) rows.push_back(encoder.encode(image).values());
        } catch (const std::exception& e) {
            res.status = 422;
            res.set_content(json{{"error", e.what()}}.dump(), "application/json");
            return;
        }
        if (fault == Fault::NullComponent && !rows.empty()) rows.back()[3] = nullptr;
        if (fault == Fault::CountMismatch && !rows.empty()) rows.erase(rows.size() - 1);
        res.set_content(json{{"dim", encoder.dim()}, {"embeddings", std::move(rows)}}.dump(), "application/json");
    });
}

MockEmbeddingServer::~MockEmbeddingServer() { stop(); }

int MockEmbeddingServer::start(const std::string& host, int port) {
    host_ = host;
    port_ = port == 0 ? server_->bind_to_any_port(host) : (server_->bind_to_port(host, port) ? port : -1);
    if (port_ < 0) throw std::runtime_error("mock server cannot bind " + host + ":" + std::to_string(port));
    thread_ = std::thread([this] { server_->listen_after_bind(); });
    server_->wait_until_ready();
    return port_;
}

void MockEmbeddingServer::listen_blocking(const std::string& host, int port) {
    host_ = host;
    port_ = port;
    if (!server_->listen(host, port)) throw std::runtime_error("mock server cannot listen on " + host + ":" + std::to_string(port));
}

void MockEmbeddingServer::stop() {
    if (server_) server_->stop();
    if (thread_.joinable()) thread_.join();
}

std::string MockEmbeddingServer::url() const { return "http://" + host_ + ":" + std::to_string(port_); }

void MockEmbeddingServer::set_fault(Fault fault, int transient_failures) {
    std::lock_guard lock(impl_->mutex);
    impl_->config.fault = fault;
    impl_->transient_left = fault == Fault::Transient ? transient_failures : 0;
}

}  // namespace fsel::mock
