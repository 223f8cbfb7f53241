#pragma once

#include <netinet/in.h>
#include <sys/socket.h>

#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

// Thin POSIX socket wrappers: UDP datagrams and length-prefixed TCP frames,
// both with poll-based timeouts.

namespace sns::net {

class SocketError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class TimedOut : public SocketError {
public:
    using SocketError::SocketError;
};

// A resolved peer or bind address.
struct Endpoint {
    sockaddr_storage ss{};
    socklen_t len = 0;

    // Numeric host only (no DNS), IPv4 or IPv6.
    static std::optional<Endpoint> resolve(const std::string& host, std::uint16_t port);

    std::string to_string() const; // "ip:port" / "[ip]:port"
    int family() const { return ss.ss_family; }
    bool is_loopback() const;

    // Raw address bytes (4 or 16) for prefix matching; v4-mapped v6
    // addresses are unwrapped to plain v4.
    std::pair<const std::uint8_t*, std::size_t> addr_bytes() const;
};

class UdpSocket {
public:
    UdpSocket() = default;
    ~UdpSocket();
    UdpSocket(UdpSocket&& other) noexcept : fd_(std::exchange(other.fd_, -1)) {}
    UdpSocket& operator=(UdpSocket&& other) noexcept;
    UdpSocket(const UdpSocket&) = delete;
    UdpSocket& operator=(const UdpSocket&) = delete;

    static UdpSocket bind(const std::string& host, std::uint16_t port);
    static UdpSocket unbound(int family); // client side

    void send_to(std::span<const std::uint8_t> data, const Endpoint& peer);
    // nullopt on timeout; throws SocketError on hard failure
    std::optional<std::pair<std::vector<std::uint8_t>, Endpoint>> recv_from(int timeout_ms);

    std::uint16_t local_port() const;
    bool valid() const { return fd_ >= 0; }

private:
    explicit UdpSocket(int fd) : fd_(fd) {}
    int fd_ = -1;
};

class TcpConnection {
public:
    TcpConnection() = default;
    ~TcpConnection();
    TcpConnection(TcpConnection&& other) noexcept
        : fd_(std::exchange(other.fd_, -1)), peer_(other.peer_) {}
    TcpConnection& operator=(TcpConnection&& other) noexcept;
    TcpConnection(const TcpConnection&) = delete;
    TcpConnection& operator=(const TcpConnection&) = delete;

    static TcpConnection connect(const Endpoint& peer, int timeout_ms);

    // Frames are a 32-bit big-endian length followed by the payload.
    void send_frame(std::span<const std::uint8_t> data, int timeout_ms);
    // nullopt on clean EOF before a frame starts; throws on timeout/overrun
    std::optional<std::vector<std::uint8_t>> recv_frame(int timeout_ms, std::size_t max_frame);

    const Endpoint& peer() const { return peer_; }
    bool valid() const { return fd_ >= 0; }

private:
    friend class TcpListener;
    TcpConnection(int fd, Endpoint peer) : fd_(fd), peer_(peer) {}
    int fd_ = -1;
    Endpoint peer_{};
};

class TcpListener {
public:
    TcpListener() = default;
    ~TcpListener();
    TcpListener(TcpListener&& other) noexcept : fd_(std::exchange(other.fd_, -1)) {}
    TcpListener& operator=(TcpListener&& other) noexcept;
    TcpListener(const TcpListener&) = delete;
    TcpListener& operator=(const TcpListener&) = delete;

    static TcpListener listen(const std::string& host, std::uint16_t port, int backlog = 64);

    std::optional<TcpConnection> accept(int timeout_ms);
    std::uint16_t local_port() const;
    bool valid() const { return fd_ >= 0; }

private:
    explicit TcpListener(int fd) : fd_(fd) {}
    int fd_ = -1;
};

inline constexpr std::size_t kMaxTcpFrame = 1 << 20;

} // namespace sns::net
