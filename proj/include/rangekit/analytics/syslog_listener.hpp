#pragma once

#include <atomic>
#include <cstdint>
#include <functional>
#include <list>
#include <mutex>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

#include "rangekit/analytics/store.hpp"

namespace rangekit::analytics {

/// Receives newline-delimited log lines over UDP (one or more lines per
/// datagram) and TCP. Each line goes to the handler together with a source
/// label such as "udp:10.10.40.5:514".
class SyslogListener {
public:
    using Handler = std::function<void(std::string_view line, const std::string& source)>;

    explicit SyslogListener(Handler handler);
    ~SyslogListener();
    SyslogListener(const SyslogListener&) = delete;
    SyslogListener& operator=(const SyslogListener&) = delete;

    /// Binds and starts serving; port 0 picks a free port. Returns the bound port.
    std::uint16_t listen_udp(const std::string& host, std::uint16_t port);
    std::uint16_t listen_tcp(const std::string& host, std::uint16_t port);

    void stop();

private:
    void serve_udp(int fd);
    void serve_tcp(int fd);
    void serve_connection(int fd, std::string source);

    Handler handler_;
    std::atomic<bool> stopping_{false};
    std::mutex mutex_;
    std::vector<int> fds_;
    std::list<std::thread> threads_;
};

/// Handler that parses each line and stores it; rejected lines increment
/// `rejected` when given.
SyslogListener::Handler store_handler(EventStore& store, UtcOffset zone, std::atomic<std::uint64_t>* rejected = nullptr);

}  // namespace rangekit::analytics
