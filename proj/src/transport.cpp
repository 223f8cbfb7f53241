#include "sns/transport.hpp"

#include <arpa/inet.h>
#include <fcntl.h>
#include <netinet/tcp.h>
#include <poll.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>

namespace sns::net {

namespace {

[[noreturn]] void fail(const std::string& what) {
    throw SocketError(what + ": " + std::strerror(errno));
}

void set_nonblocking(int fd) {
    const int flags = fcntl(fd, F_GETFL, 0);
    if (flags < 0 || fcntl(fd, F_SETFL, flags | O_NONBLOCK) < 0)
        fail("fcntl");
}

// -1 timeout blocks; returns false on timeout
bool wait_fd(int fd, short events, int timeout_ms) {
    pollfd p{fd, events, 0};
    for (;;) {
        const int rc = ::poll(&p, 1, timeout_ms);
        if (rc > 0)
            return true;
        if (rc == 0)
            return false;
        if (errno != EINTR)
            fail("poll");
    }
}

} // namespace

std::optional<Endpoint> Endpoint::resolve(const std::string& host, std::uint16_t port) {
    Endpoint ep;
    auto* v4 = reinterpret_cast<sockaddr_in*>(&ep.ss);
    if (inet_pton(AF_INET, host.c_str(), &v4->sin_addr) == 1) {
        v4->sin_family = AF_INET;
        v4->sin_port = htons(port);
        ep.len = sizeof(sockaddr_in);
        return ep;
    }
    auto* v6 = reinterpret_cast<sockaddr_in6*>(&ep.ss);
    std::string h = host;
    if (h.size() >= 2 && h.front() == '[' && h.back() == ']')
        h = h.substr(1, h.size() - 2);
    if (inet_pton(AF_INET6, h.c_str(), &v6->sin6_addr) == 1) {
        v6->sin6_family = AF_INET6;
        v6->sin6_port = htons(port);
        ep.len = sizeof(sockaddr_in6);
        return ep;
    }
    return std::nullopt;
}

std::string Endpoint::to_string() const {
    char buf[INET6_ADDRSTRLEN] = {};
    if (ss.ss_family == AF_INET) {
        const auto* v4 = reinterpret_cast<const sockaddr_in*>(&ss);
        inet_ntop(AF_INET, &v4->sin_addr, buf, sizeof buf);
        return std::string(buf) + ":" + std::to_string(ntohs(v4->sin_port));
    }
    const auto* v6 = reinterpret_cast<const sockaddr_in6*>(&ss);
    inet_ntop(AF_INET6, &v6->sin6_addr, buf, sizeof buf);
    return "[" + std::string(buf) + "]:" + std::to_string(ntohs(v6->sin6_port));
}

std::pair<const std::uint8_t*, std::size_t> Endpoint::addr_bytes() const {
    if (ss.ss_family == AF_INET) {
        const auto* v4 = reinterpret_cast<const sockaddr_in*>(&ss);
        return {reinterpret_cast<const std::uint8_t*>(&v4->sin_addr), 4};
    }
    const auto* v6 = reinterpret_cast<const sockaddr_in6*>(&ss);
    const auto* p = reinterpret_cast<const std::uint8_t*>(&v6->sin6_addr);
    static const std::uint8_t mapped_prefix[12] = {0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0xff, 0xff};
    if (std::memcmp(p, mapped_prefix, 12) == 0)
        return {p + 12, 4}; // v4-mapped
    return {p, 16};
}

bool Endpoint::is_loopback() const {
    const auto [p, n] = addr_bytes();
    if (n == 4)
        return p[0] == 127;
    static const std::uint8_t v6_loop[16] = {0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 1};
    return std::memcmp(p, v6_loop, 16) == 0;
}

// --- UdpSocket ---------------------------------------------------------------

UdpSocket::~UdpSocket() {
    if (fd_ >= 0)
        ::close(fd_);
}

UdpSocket& UdpSocket::operator=(UdpSocket&& other) noexcept {
    if (this != &other) {
        if (fd_ >= 0)
            ::close(fd_);
        fd_ = std::exchange(other.fd_, -1);
    }
    return *this;
}

UdpSocket UdpSocket::bind(const std::string& host, std::uint16_t port) {
    const auto ep = Endpoint::resolve(host, port);
    if (!ep)
        throw SocketError("cannot parse bind address " + host);
    const int fd = ::socket(ep->family(), SOCK_DGRAM, 0);
    if (fd < 0)
        fail("socket");
    const int one = 1;
    setsockopt(fd, SOL_SOCKET, SO_REUSEADDR, &one, sizeof one);
    if (::bind(fd, reinterpret_cast<const sockaddr*>(&ep->ss), ep->len) < 0) {
        const int err = errno;
        ::close(fd);
        errno = err;
        fail("bind udp " + host + ":" + std::to_string(port));
    }
    set_nonblocking(fd);
    return UdpSocket(fd);
}

UdpSocket UdpSocket::unbound(int family) {
    const int fd = ::socket(family, SOCK_DGRAM, 0);
    if (fd < 0)
        fail("socket");
    set_nonblocking(fd);
    return UdpSocket(fd);
}

void UdpSocket::send_to(std::span<const std::uint8_t> data, const Endpoint& peer) {
    const ssize_t n = ::sendto(fd_, data.data(), data.size(), 0,
                               reinterpret_cast<const sockaddr*>(&peer.ss), peer.len);
    if (n < 0 && errno != EAGAIN && errno != EWOULDBLOCK && errno != ECONNREFUSED &&
        errno != EPERM && errno != ENOBUFS)
        fail("sendto");
}

std::optional<std::pair<std::vector<std::uint8_t>, Endpoint>> UdpSocket::recv_from(
    int timeout_ms) {
    if (!wait_fd(fd_, POLLIN, timeout_ms))
        return std::nullopt;
    std::vector<std::uint8_t> buf(65536);
    Endpoint peer;
    peer.len = sizeof peer.ss;
    const ssize_t n = ::recvfrom(fd_, buf.data(), buf.size(), 0,
                                 reinterpret_cast<sockaddr*>(&peer.ss), &peer.len);
    if (n < 0) {
        if (errno == EAGAIN || errno == EWOULDBLOCK || errno == EINTR ||
            errno == ECONNREFUSED)
            return std::nullopt;
        fail("recvfrom");
    }
    buf.resize(static_cast<std::size_t>(n));
    return std::make_pair(std::move(buf), peer);
}

std::uint16_t UdpSocket::local_port() const {
    sockaddr_storage ss{};
    socklen_t len = sizeof ss;
    if (getsockname(fd_, reinterpret_cast<sockaddr*>(&ss), &len) < 0)
        fail("getsockname");
    if (ss.ss_family == AF_INET)
        return ntohs(reinterpret_cast<const sockaddr_in*>(&ss)->sin_port);
    return ntohs(reinterpret_cast<const sockaddr_in6*>(&ss)->sin6_port);
}

// --- TcpConnection ------------------------------------------------------------

TcpConnection::~TcpConnection() {
    if (fd_ >= 0)
        ::close(fd_);
}

TcpConnection& TcpConnection::operator=(TcpConnection&& other) noexcept {
    if (this != &other) {
        if (fd_ >= 0)
            ::close(fd_);
        fd_ = std::exchange(other.fd_, -1);
        peer_ = other.peer_;
    }
    return *this;
}

TcpConnection TcpConnection::connect(const Endpoint& peer, int timeout_ms) {
    const int fd = ::socket(peer.family(), SOCK_STREAM, 0);
    if (fd < 0)
        fail("socket");
    set_nonblocking(fd);
    const int one = 1;
    setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof one);
    if (::connect(fd, reinterpret_cast<const sockaddr*>(&peer.ss), peer.len) < 0 &&
        errno != EINPROGRESS) {
        const int err = errno;
        ::close(fd);
        errno = err;
        fail("connect");
    }
    if (!wait_fd(fd, POLLOUT, timeout_ms)) {
        ::close(fd);
        throw TimedOut("connect timed out");
    }
    int so_error = 0;
    socklen_t len = sizeof so_error;
    getsockopt(fd, SOL_SOCKET, SO_ERROR, &so_error, &len);
    if (so_error != 0) {
        ::close(fd);
        errno = so_error;
        fail("connect");
    }
    return TcpConnection(fd, peer);
}

void TcpConnection::send_frame(std::span<const std::uint8_t> data, int timeout_ms) {
    std::vector<std::uint8_t> frame;
    frame.reserve(4 + data.size());
    const auto n = static_cast<std::uint32_t>(data.size());
    frame.push_back(static_cast<std::uint8_t>(n >> 24));
    frame.push_back(static_cast<std::uint8_t>(n >> 16));
    frame.push_back(static_cast<std::uint8_t>(n >> 8));
    frame.push_back(static_cast<std::uint8_t>(n));
    frame.insert(frame.end(), data.begin(), data.end());

    std::size_t sent = 0;
    while (sent < frame.size()) {
        if (!wait_fd(fd_, POLLOUT, timeout_ms))
            throw TimedOut("send timed out");
        const ssize_t rc = ::send(fd_, frame.data() + sent, frame.size() - sent, MSG_NOSIGNAL);
        if (rc < 0) {
            if (errno == EAGAIN || errno == EWOULDBLOCK || errno == EINTR)
                continue;
            fail("send");
        }
        sent += static_cast<std::size_t>(rc);
    }
}

std::optional<std::vector<std::uint8_t>> TcpConnection::recv_frame(int timeout_ms,
                                                                   std::size_t max_frame) {
    std::uint8_t header[4];
    std::size_t got = 0;
    while (got < 4) {
        if (!wait_fd(fd_, POLLIN, timeout_ms))
            throw TimedOut("receive timed out");
        const ssize_t rc = ::recv(fd_, header + got, 4 - got, 0);
        if (rc == 0) {
            if (got == 0)
                return std::nullopt; // clean EOF between frames
            throw SocketError("connection closed mid-frame");
        }
        if (rc < 0) {
            if (errno == EAGAIN || errno == EWOULDBLOCK || errno == EINTR)
                continue;
            fail("recv");
        }
        got += static_cast<std::size_t>(rc);
    }
    const std::uint32_t len = (std::uint32_t{header[0]} << 24) | (std::uint32_t{header[1]} << 16) |
                              (std::uint32_t{header[2]} << 8) | std::uint32_t{header[3]};
    if (len > max_frame)
        throw SocketError("frame exceeds limit");
    std::vector<std::uint8_t> payload(len);
    std::size_t off = 0;
    while (off < len) {
        if (!wait_fd(fd_, POLLIN, timeout_ms))
            throw TimedOut("receive timed out");
        const ssize_t rc = ::recv(fd_, payload.data() + off, len - off, 0);
        if (rc == 0)
            throw SocketError("connection closed mid-frame");
        if (rc < 0) {
            if (errno == EAGAIN || errno == EWOULDBLOCK || errno == EINTR)
                continue;
            fail("recv");
        }
        off += static_cast<std::size_t>(rc);
    }
    return payload;
}

// --- TcpListener --------------------------------------------------------------

TcpListener::~TcpListener() {
    if (fd_ >= 0)
        ::close(fd_);
}

TcpListener& TcpListener::operator=(TcpListener&& other) noexcept {
    if (this != &other) {
        if (fd_ >= 0)
            ::close(fd_);
        fd_ = std::exchange(other.fd_, -1);
    }
    return *this;
}

TcpListener TcpListener::listen(const std::string& host, std::uint16_t port, int backlog) {
    const auto ep = Endpoint::resolve(host, port);
    if (!ep)
        throw SocketError("cannot parse bind address " + host);
    const int fd = ::socket(ep->family(), SOCK_STREAM, 0);
    if (fd < 0)
        fail("socket");
    const int one = 1;
    setsockopt(fd, SOL_SOCKET, SO_REUSEADDR, &one, sizeof one);
    if (::bind(fd, reinterpret_cast<const sockaddr*>(&ep->ss), ep->len) < 0 ||
        ::listen(fd, backlog) < 0) {
        const int err = errno;
        ::close(fd);
        errno = err;
        fail("bind tcp " + host + ":" + std::to_string(port));
    }
    set_nonblocking(fd);
    return TcpListener(fd);
}

std::optional<TcpConnection> TcpListener::accept(int timeout_ms) {
    if (!wait_fd(fd_, POLLIN, timeout_ms))
        return std::nullopt;
    Endpoint peer;
    peer.len = sizeof peer.ss;
    const int fd = ::accept(fd_, reinterpret_cast<sockaddr*>(&peer.ss), &peer.len);
    if (fd < 0) {
        if (errno == EAGAIN || errno == EWOULDBLOCK || errno == EINTR ||
            errno == ECONNABORTED)
            return std::nullopt;
        fail("accept");
    }
    set_nonblocking(fd);
    const int one = 1;
    setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof one);
    return TcpConnection(fd, peer);
}

std::uint16_t TcpListener::local_port() const {
    sockaddr_storage ss{};
    socklen_t len = sizeof ss;
    if (getsockname(fd_, reinterpret_cast<sockaddr*>(&ss), &len) < 0)
        fail("getsockname");
    if (ss.ss_family == AF_INET)
        return ntohs(reinterpret_cast<const sockaddr_in*>(&ss)->sin_port);
    return ntohs(reinterpret_cast<const sockaddr_in6*>(&ss)->sin6_port);
}

} // namespace sns::net
