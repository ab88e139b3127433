#pragma once

#include <atomic>
#include <cstdint>
#include <memory>
#include <mutex>
#include <string>
#include <thread>

namespace httplib {
class Server;
}

namespace fsel::mock {

// Ways the server can misbehave, for exercising client validation.
enum class Fault {
    None,
    WrongDim,       // declares and returns dim+1 components
    NullComponent,  // one component of the last embedding is null
    Malformed,      // body is not JSON
    CountMismatch,  // one embedding fewer than images sent
    Transient,      // the first `transient_failures` requests get 503
    BadRequest,     // every request gets 400
};

Fault parse_fault(const std::string& name);
std::string to_string(Fault fault);

struct MockConfig {
    std::size_t dim = 64;
    std::uint64_t proj_seed = 42;
    Fault fault = Fault::None;
    int transient_failures = 2;
};

// /embed server backed by the reference encoder.
class MockEmbeddingServer {
public:
    explicit MockEmbeddingServer(MockConfig config = {});
    ~MockEmbeddingServer();
    MockEmbeddingServer(const MockEmbeddingServer&) = delete;
    MockEmbeddingServer& operator=(const MockEmbeddingServer&) = delete;

    // Binds (port 0 picks a free one) and serves on a background thread.
    int start(const std::string& host = "127.0.0.1", int port = 0);
    void stop();
    // Serves on the calling thread until stop().
    void listen_blocking(const std::string& host, int port);

    std::string url() const;
    std::size_t requests() const noexcept { return requests_.load(); }
    std::size_t images_served() const noexcept { return images_.load(); }
    void set_fault(Fault fault, int transient_failures = 2);

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
    std::unique_ptr<httplib::Server> server_;
    std::thread thread_;
    std::string host_;
    int port_ = 0;
    std::atomic<std::size_t> requests_{0};
    std::atomic<std::size_t> images_{0};
};

}  // namespace fsel::mock
