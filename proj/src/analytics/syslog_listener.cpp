#include "rangekit/analytics/syslog_listener.hpp"

#include <arpa/inet.h>
#include <netinet/in.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cstring>

#include "rangekit/core/error.hpp"

namespace rangekit::analytics {

namespace {

constexpr int kPollMs = 100;

std::string peer_label(const char* proto, const sockaddr_in& addr) {
    char ip[INET_ADDRSTRLEN] = {};
    inet_ntop(AF_INET, &addr.sin_addr, ip, sizeof ip);
    return std::string(proto) + ":" + ip + ":" + std::to_string(ntohs(addr.sin_port));
}

int bind_socket(int type, const std::string& host, std::uint16_t port, std::uint16_t& bound) {
    int fd = ::socket(AF_INET, type, 0);
    if (fd < 0) throw Error(ErrorCode::Io, std::string("socket: ") + std::strerror(errno));
    int one = 1;
    ::setsockopt(fd, SOL_SOCKET, SO_REUSEADDR, &one, sizeof one);
    sockaddr_in addr{};
    addr.sin_family = AF_INET;
    addr.sin_port = htons(port);
    if (::inet_pton(AF_INET, host.c_str(), &addr.sin_addr) != 1) {
        ::close(fd);
        throw Error(ErrorCode::InvalidValue, "bad listen address '" + host + "'");
    }
    if (::bind(fd, reinterpret_cast<sockaddr*>(&addr), sizeof addr) != 0) {
        auto err = std::string(std::strerror(errno));
        ::close(fd);
        throw Error(ErrorCode::Io, "bind " + host + ":" + std::to_string(port) + ": " + err);
    }
    if (type == SOCK_STREAM && ::listen(fd, 64) != 0) {
        ::close(fd);
        throw Error(ErrorCode::Io, std::string("listen: ") + std::strerror(errno));
    }
    socklen_t len = sizeof addr;
    ::getsockname(fd, reinterpret_cast<sockaddr*>(&addr), &len);
    bound = ntohs(addr.sin_port);
    return fd;
}

bool wait_readable(int fd) {
    pollfd p{fd, POLLIN, 0};
    return ::poll(&p, 1, kPollMs) > 0;
}

void split_lines(std::string& buffer, const std::function<void(std::string_view)>& emit) {
    std::size_t start = 0;
    for (std::size_t nl; (nl = buffer.find('\n', start)) != std::string::npos; start = nl + 1) {
        std::string_view line(buffer.data() + start, nl - start);
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
        if (!line.empty()) emit(line);
    }
    buffer.erase(0, start);
}

}  // namespace

SyslogListener::SyslogListener(Handler handler) : handler_(std::move(handler)) {}

SyslogListener::~SyslogListener() { stop(); }

std::uint16_t SyslogListener::listen_udp(const std::string& host, std::uint16_t port) {
    std::uint16_t bound = 0;
    int fd = bind_socket(SOCK_DGRAM, host, port, bound);
    std::lock_guard lock(mutex_);
    fds_.push_back(fd);
    threads_.emplace_back([this, fd] { serve_udp(fd); });
    return bound;
}

std::uint16_t SyslogListener::listen_tcp(const std::string& host, std::uint16_t port) {
    std::uint16_t bound = 0;
    int fd = bind_socket(SOCK_STREAM, host, port, bound);
    std::lock_guard lock(mutex_);
    fds_.push_back(fd);
    threads_.emplace_back([this, fd] { serve_tcp(fd); });
    return bound;
}

void SyslogListener::stop() {
    stopping_ = true;
    std::list<std::thread> threads;
    {
        std::lock_guard lock(mutex_);
        threads.swap(threads_);
    }
    for (auto& t : threads) t.join();
    threads.clear();
    // Connection threads may have been added while joining.
    {
        std::lock_guard lock(mutex_);
        threads.swap(threads_);
    }
    for (auto& t : threads) t.join();
    std::lock_guard lock(mutex_);
    for (int fd : fds_) ::close(fd);
    fds_.clear();
}

void SyslogListener::serve_udp(int fd) {
    std::vector<char> buf(65536);
    while (!stopping_) {
        if (!wait_readable(fd)) continue;
        sockaddr_in peer{};
        socklen_t len = sizeof peer;
        auto n = ::recvfrom(fd, buf.data(), buf.size(), 0, reinterpret_cast<sockaddr*>(&peer), &len);
        if (n <= 0) continue;
        std::string datagram(buf.data(), static_cast<std::size_t>(n));
        datagram += '\n';
        auto source = peer_label("udp", peer);
        split_lines(datagram, [&](std::string_view line) { handler_(line, source); });
    }
}

void SyslogListener::serve_tcp(int fd) {
    while (!stopping_) {
        if (!wait_readable(fd)) continue;
        sockaddr_in peer{};
        socklen_t len = sizeof peer;
        int conn = ::accept(fd, reinterpret_cast<sockaddr*>(&peer), &len);
        if (conn < 0) continue;
        auto source = peer_label("tcp", peer);
        std::lock_guard lock(mutex_);
        threads_.emplace_back([this, conn, source] { serve_connection(conn, source); });
    }
}

void SyslogListener::serve_connection(int fd, std::string source) {
    std::string pending;
    char buf[8192];
    while (!stopping_) {
        if (!wait_readable(fd)) continue;
        auto n = ::recv(fd, buf, sizeof buf, 0);
        if (n <= 0) break;
        pending.append(buf, static_cast<std::size_t>(n));
        split_lines(pending, [&](std::string_view line) { handler_(line, source); });
    }
    if (!pending.empty()) handler_(pending, source);
    ::close(fd);
}

SyslogListener::Handler store_handler(EventStore& store, UtcOffset zone, std::atomic<std::uint64_t>* rejected) {
    return [&store, zone, rejected](std::string_view line, const std::string& source) {
        try {
            store.ingest(parse_syslog_line(line, zone), source);
        } catch (const Error&) {
            if (rejected) ++*rejected;
        }
    };
}

}  // namespace rangekit::analytics
