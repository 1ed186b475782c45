#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <ostream>
#include <string>
#include <thread>

#include "rangekit/core/error.hpp"
#include "rangekit/orchestrator/orchestrator.hpp"

namespace httplib {
class Server;
}

namespace rangekit::orchestrator {

struct ApiOptions {
    std::map<std::string, Principal> bearer_tokens;
    std::function<Timestamp()> clock = system_now;
    /// One line per request: time, client, method, path, status, principal.
    std::ostream* access_log = nullptr;
    /// Static files (e.g. the dashboard build) served under /ui/ when set.
    std::string static_dir;
};

/// HTTP status for an error code.
int http_status(ErrorCode code);

/// JSON/HTTP front end of an Orchestrator. Requests authenticate with
/// `Authorization: Bearer <token>`; tokens map to principals.
class ApiServer {
public:
    ApiServer(Orchestrator& orchestrator, ApiOptions options);
    ~ApiServer();
    ApiServer(const ApiServer&) = delete;
    ApiServer& operator=(const ApiServer&) = delete;

    /// Binds; port 0 picks a free one. Returns the bound port.
    int bind(const std::string& host, int port);
    /// Serves on the calling thread until stop().
    void serve();
    /// Serves on a background thread.
    void start();
    void stop();

private:
    void routes();
    Principal authenticate(const std::string& header) const;

    Orchestrator& orch_;
    ApiOptions options_;
    std::unique_ptr<httplib::Server> server_;
    std::thread thread_;
    std::mutex log_mutex_;
};

}  // namespace rangekit::orchestrator
