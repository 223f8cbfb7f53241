#pragma once

#include <chrono>
#include <cstdint>
#include <deque>
#include <map>
#include <mutex>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "sns/hilbert.hpp"
#include "sns/interval.hpp"
#include "sns/net_address.hpp"

// Binary wire format for queries, updates, responses and errors. All
// integers are big-endian; layouts are normative and documented with hex
// examples in docs/protocol.md.

namespace sns {

inline constexpr std::uint8_t kProtocolVersion = 1;

// Encoded messages must fit this bound to travel over UDP; anything larger
// goes over TCP (length-prefixed frames).
inline constexpr std::size_t kMaxUdpPayload = 1400;

enum class MessageType : std::uint8_t {
    query_geom = 1,
    query_intervals = 2,
    update = 3,
    deregister = 4,
    response = 5,
    error = 6,
};

enum class ErrorCode : std::uint16_t {
    malformed = 1,
    unsupported_version = 2,
    too_many_results = 3,
    unauthorized = 4,
    response_too_large = 5,
    cell_mismatch = 6,
    stale_version = 7,
};

const char* error_code_name(ErrorCode code);

class CodecError : public std::runtime_error {
public:
    CodecError(ErrorCode code, const std::string& what)
        : std::runtime_error(what), code_(code) {}
    ErrorCode code() const { return code_; }

private:
    ErrorCode code_;
};

struct QueryGeomBody {
    QueryGeometry geometry; // circle or rect; raw intervals use QUERY_INTERVALS
    std::uint16_t max_results = 0; // 0 = server default

    friend bool operator==(const QueryGeomBody&, const QueryGeomBody&) = default;
};

struct QueryIntervalsBody {
    IntervalSet intervals;

    friend bool operator==(const QueryIntervalsBody&, const QueryIntervalsBody&) = default;
};

struct UpdateBody {
    DeviceId device_id{};
    std::uint64_t version = 0;
    NetworkAddress address;
    QueryGeometry location; // circle, rect, or raw intervals

    friend bool operator==(const UpdateBody&, const UpdateBody&) = default;
};

struct DeregisterBody {
    DeviceId device_id{};

    friend bool operator==(const DeregisterBody&, const DeregisterBody&) = default;
};

struct ResponseResult {
    DeviceId device_id{};
    NetworkAddress address;
    IntervalSet matched;

    friend bool operator==(const ResponseResult&, const ResponseResult&) = default;
};

struct ResponseBody {
    std::vector<ResponseResult> results;

    friend bool operator==(const ResponseBody&, const ResponseBody&) = default;
};

struct ErrorBody {
    ErrorCode code = ErrorCode::malformed;
    // UTF-8. For TOO_MANY_RESULTS and RESPONSE_TOO_LARGE this is the decimal
    // result count; for STALE_VERSION the server's current version.
    std::string detail;

    friend bool operator==(const ErrorBody&, const ErrorBody&) = default;
};

using MessageBody = std::variant<QueryGeomBody, QueryIntervalsBody, UpdateBody, DeregisterBody,
                                 ResponseBody, ErrorBody>;

struct Message {
    std::uint64_t request_id = 0;
    CellId cell_id = 0;
    std::optional<std::vector<std::uint8_t>> auth; // opaque token, 16..64 bytes
    MessageBody body;

    MessageType type() const { return static_cast<MessageType>(body.index() + 1); }

    friend bool operator==(const Message&, const Message&) = default;
};

// Throws std::invalid_argument when the message is structurally invalid
// (QUERY_GEOM carrying raw intervals, token length out of range, oversized
// counts).
std::vector<std::uint8_t> encode_message(const Message& m);

// Total: every byte string either decodes or throws CodecError, never
// crashes. Unknown version maps to UNSUPPORTED_VERSION; everything else
// (truncation, unknown type, bad ranges, trailing bytes) to MALFORMED.
Message decode_message(std::span<const std::uint8_t> data);

// Reads request_id/cell_id from a damaged datagram when enough of the
// header survives, so error replies can still correlate.
struct HeaderPeek {
    std::uint64_t request_id = 0;
    CellId cell_id = 0;
};
HeaderPeek peek_header(std::span<const std::uint8_t> data);

enum class Transport : std::uint8_t { udp, tcp };

// DoS amplification guard for UDP: when the encoded response would exceed
// the request, it is replaced by a RESPONSE_TOO_LARGE error carrying the
// true result count, directing the client to retry over TCP. The error is
// shrunk (detail dropped) to fit; nullopt means nothing can fit and the
// datagram should be dropped. TCP passes through untouched.
std::optional<Message> amplification_guard(Transport transport, std::size_t request_len,
                                           const Message& response);

// Bounded map of recently sent responses keyed by (peer, request_id);
// retransmitted requests inside the TTL window are answered from here so
// duplicated announces apply exactly once. Internally synchronized.
class ResponseCache {
public:
    explicit ResponseCache(std::chrono::milliseconds ttl = std::chrono::milliseconds(2000),
                           std::size_t capacity = 1024);

    std::optional<std::vector<std::uint8_t>> lookup(const std::string& peer,
                                                    std::uint64_t request_id);
    void store(const std::string& peer, std::uint64_t request_id,
               std::vector<std::uint8_t> response);

private:
    using Key = std::pair<std::string, std::uint64_t>;
    using Clock = std::chrono::steady_clock;

    void purge_expired_locked(Clock::time_point now);

    std::chrono::milliseconds ttl_;
    std::size_t capacity_;
    std::mutex mu_;
    std::map<Key, std::pair<std::vector<std::uint8_t>, Clock::time_point>> entries_;
    std::deque<std::pair<Key, Clock::time_point>> order_;
};

} // namespace sns
