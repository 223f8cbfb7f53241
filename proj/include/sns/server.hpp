#pragma once

#include <atomic>
#include <condition_variable>
#include <cstdint>
#include <deque>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <thread>
#include <variant>
#include <vector>

#include "sns/protocol.hpp"
#include "sns/registry.hpp"
#include "sns/transport.hpp"

namespace sns {

class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class SurveyError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct ServerConfig {
    std::string bind_address = "0.0.0.0";
    std::uint16_t port = 4700; // 5353 belongs to mDNS; stay clear of it
    CellId cell_id = 0;
    std::uint32_t grid_order = 8;
    std::int64_t cell_size_cm = 100;
    std::int64_t origin_x_cm = 0;
    std::int64_t origin_y_cm = 0;
    std::uint32_t max_results = 32;
    std::string auth_token; // empty disables request authentication
    // Peers inside these networks bypass auth; local physical presence is
    // the trust anchor.
    std::vector<std::string> trusted_prefixes{"127.0.0.0/8", "::1/128"};
    std::string survey_file;
    std::string snapshot_file;
    std::uint32_t snapshot_interval_s = 60;
    std::string log_level = "info";
    std::uint32_t workers = 4;

    GridConfig grid() const {
        return GridConfig{grid_order, cell_size_cm, origin_x_cm, origin_y_cm, 2};
    }

    void validate() const; // throws ConfigError

    // Applies one "key = value" assignment; throws ConfigError on unknown
    // keys or bad values. Shared by the file loader and SNS_* environment
    // variables.
    void set(const std::string& key, const std::string& value);

    // Line-oriented key = value file with # comments.
    static ServerConfig from_file(const std::string& path);

    // Overrides from SNS_<KEY> environment variables.
    void apply_env();
};

// Registers immobile devices from a human-edited text file, one per line:
//   <device-id-hex32> <ip:port> circle <x> <y> <radius>
//   <device-id-hex32> <ip:port> rect <x0> <y0> <x1> <y1>
//   <device-id-hex32> <ip:port> intervals <low[-high]>...
// Coordinates are meters with up to 2 decimals. '#' starts a comment.
// Every device registers at version 0; devices already present (from a
// snapshot) are skipped. Returns the number registered. Throws SurveyError
// naming the offending line on parse errors or in-file duplicates.
std::size_t load_survey(Registry& registry, const std::string& path);

// The SNS daemon: a UDP socket and a TCP listener answering queries and
// updates against one registry, with survey/snapshot lifecycle and an
// amplification guard on the UDP side.
class Server {
public:
    explicit Server(ServerConfig cfg);
    ~Server();
    Server(const Server&) = delete;
    Server& operator=(const Server&) = delete;

    // Binds both sockets and spawns the worker pool. Throws on bind failure.
    void start();

    // Graceful shutdown: stops accepting, drains in-flight work, writes a
    // final snapshot when configured. Idempotent.
    void stop();

    bool running() const { return running_.load(); }

    // Actual bound port (useful when configured with port 0).
    std::uint16_t port() const { return bound_port_; }

    Registry& registry() { return *registry_; }
    const ServerConfig& config() const { return cfg_; }

    // One request through the full decode/dispatch/guard path; exposed so
    // tests can drive the protocol surface without sockets. Returns the
    // encoded reply, or nullopt when the amplification guard drops it.
    std::optional<std::vector<std::uint8_t>> handle_packet(std::span<const std::uint8_t> data,
                                                           const net::Endpoint& peer,
                                                           Transport transport);

private:
    struct UdpTask {
        std::vector<std::uint8_t> data;
        net::Endpoint peer;
    };
    struct TcpTask {
        net::TcpConnection conn;
    };
    using Task = std::variant<UdpTask, TcpTask>;

    Message dispatch(const Message& request, const net::Endpoint& peer, std::string& outcome);
    bool peer_trusted(const net::Endpoint& peer) const;

    void udp_loop();
    void tcp_loop();
    void worker_loop();
    void snapshot_loop();
    void serve_connection(net::TcpConnection& conn);
    void write_snapshot(const char* reason);

    bool queue_push(Task task);
    std::optional<Task> queue_pop();

    ServerConfig cfg_;
    std::unique_ptr<Registry> registry_;
    ResponseCache cache_;

    struct Cidr {
        int family;
        std::array<std::uint8_t, 16> bytes{};
        unsigned prefix_len = 0;
        bool matches(const net::Endpoint& ep) const;
    };
    std::vector<Cidr> trusted_;

    net::UdpSocket udp_;
    net::TcpListener tcp_;
    std::uint16_t bound_port_ = 0;

    std::atomic<bool> running_{false};
    std::mutex queue_mu_;
    std::condition_variable queue_cv_;
    std::deque<Task> queue_;
    bool queue_closed_ = false;
    std::size_t queue_capacity_ = 0;

    std::mutex stop_mu_;
    std::condition_variable stop_cv_;

    std::vector<std::thread> threads_;
};

} // namespace sns
