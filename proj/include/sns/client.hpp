#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "sns/protocol.hpp"
#include "sns/transport.hpp"

namespace sns {

struct ClientConfig {
    std::string host = "127.0.0.1";
    std::uint16_t port = 4700;
    CellId cell_id = 0;
    int timeout_ms = 200;
    int retries = 2; // UDP retransmits after the first attempt
    enum class TransportPref { udp_then_tcp, tcp } transport = TransportPref::udp_then_tcp;
    std::vector<std::uint8_t> auth; // optional token, 16..64 bytes
    // Requests larger than this go straight to TCP; responses that cannot fit
    // come back as RESPONSE_TOO_LARGE and trigger the TCP retry. Tests shrink
    // it to force the fallback.
    std::size_t max_udp_payload = kMaxUdpPayload;
};

// Client side of the resolution flow: builds queries, sends them over UDP
// with automatic TCP retry on oversized responses, and correlates replies by
// request id. One handle serves one thread; independent handles are
// independent.
class Client {
public:
    explicit Client(ClientConfig cfg);

    enum class Status {
        ok,              // decoded RESPONSE
        too_many,        // TOO_MANY_RESULTS, narrow the query
        stale,           // STALE_VERSION on announce
        error_reply,     // any other protocol error from the server
        transport_error, // timeout or socket failure
    };

    struct QueryOutcome {
        Status status = Status::transport_error;
        std::vector<ResponseResult> results;
        std::uint32_t total_found = 0; // populated for too_many
        std::optional<ErrorBody> error;
        std::string transport_detail;
    };

    struct AnnounceOutcome {
        Status status = Status::transport_error;
        std::uint64_t current_version = 0; // server's version when stale
        std::optional<ErrorBody> error;
        std::string transport_detail;
    };

    // Resolve a location. max_results 0 leaves the limit to the server.
    QueryOutcome query(const QueryGeometry& geometry, std::uint16_t max_results = 0);
    QueryOutcome query_intervals(const IntervalSet& intervals);

    // Register or move a device. An ack means the update is queryable
    // immediately; stale carries the server's current version for resync.
    AnnounceOutcome announce(const DeviceId& device_id, const NetworkAddress& address,
                             const QueryGeometry& geometry, std::uint64_t version);

    AnnounceOutcome deregister(const DeviceId& device_id);

private:
    struct Exchange {
        bool transport_failed = false;
        std::string detail;
        std::optional<Message> reply;
    };

    Exchange round_trip(const Message& request);
    Exchange udp_round_trip(const std::vector<std::uint8_t>& encoded, std::uint64_t request_id);
    Exchange tcp_round_trip(const std::vector<std::uint8_t>& encoded, std::uint64_t request_id);
    Message base_message();
    QueryOutcome finish_query(Exchange ex);
    AnnounceOutcome finish_announce(Exchange ex);

    ClientConfig cfg_;
    net::Endpoint server_;
    std::mt19937_64 rng_;
};

} // namespace sns
