#pragma once

#include <filesystem>
#include <memory>
#include <optional>
#include <string>

#include "m3/service.hpp"

namespace m3::service {

struct HttpOptions {
    // Where /study/comparison finds persona genomes; absent disables it.
    std::optional<std::filesystem::path> genomes_dir;
    SearchConfig search;
    int comparison_repeats = 1;
    std::uint64_t comparison_seed = 0;
};

/// HTTP front end for a SessionManager.
///
///   POST /sessions                 {"participant": "...", "metadata": {...}}
///   GET  /sessions/{id}
///   POST /sessions/{id}/moves      {"a": [r, c], "b": [r, c]}
///   GET  /sessions/{id}/traces     closed sessions only
///   GET  /presets
///   GET  /study/summary
///   GET  /study/comparison
///
/// Errors come back as {"error": token, "message": text} with status 400
/// (input_error, config_error), 404 (not_found), 409 (state_error),
/// 503 (run_error) or 500.
class HttpServer {
public:
    HttpServer(SessionManager& sessions, HttpOptions options = {});
    ~HttpServer();
    HttpServer(const HttpServer&) = delete;
    HttpServer& operator=(const HttpServer&) = delete;

    /// Binds to `port` (0 picks a free one) and returns the bound port.
    int bind(const std::string& host, int port);
    /// Serves until stop(); call after bind().
    void serve();
    void stop();

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

}  // namespace m3::service
