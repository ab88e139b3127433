#include <cstdio>

#include <CLI11.hpp>

#include "mock_server.hpp"

int main(int argc, char** argv) {
    CLI::App app{"Reference-encoder /embed server for integration tests"};
    std::string host = "127.0.0.1";
    int port = 8765;
    fsel::mock::MockConfig config;
    std::string fault = "none";
    app.add_option("--host", host, "Listen address")->capture_default_str();
    app.add_option("--port", port, "Listen port")->capture_default_str();
    app.add_option("--dim", config.dim, "Embedding dimension")->capture_default_str();
    app.add_option("--proj-seed", config.proj_seed, "Reference encoder projection seed")->capture_default_str();
    app.add_option("--fault", fault, "none | wrong-dim | null | malformed | count-mismatch | transient | bad-request")
        ->capture_default_str();
    app.add_option("--transient-failures", config.transient_failures, "503 responses before success in transient mode")
        ->capture_default_str();
    CLI11_PARSE(app, argc, argv);

    try {
        config.fault = fsel::mock::parse_fault(fault);
        fsel::mock::MockEmbeddingServer server(config);
        std::printf("serving /embed on http://%s:%d (dim %zu, fault %s)\n", host.c_str(), port, config.dim, fault.c_str());
        std::fflush(stdout);
        server.listen_blocking(host, port);
    } catch (const std::exception& e) {
        std::fprintf(stderr, "fsel-mock-server: %s\n", e.what());
        return 1;
    }
    return 0;
}
