#include "sns/protocol.hpp"

#include <algorithm>
#include <cstring>
#include <limits>

namespace sns {

namespace {

class ByteWriter {
public:
    void u8(std::uint8_t v) { buf_.push_back(v); }
    void u16(std::uint16_t v) {
        u8(static_cast<std::uint8_t>(v >> 8));
        u8(static_cast<std::uint8_t>(v));
    }
    void u32(std::uint32_t v) {
        u16(static_cast<std::uint16_t>(v >> 16));
        u16(static_cast<std::uint16_t>(v));
    }
    void u64(std::uint64_t v) {
        u32(static_cast<std::uint32_t>(v >> 32));
        u32(static_cast<std::uint32_t>(v));
    }
    void i32(std::int32_t v) { u32(static_cast<std::uint32_t>(v)); }
    void bytes(const std::uint8_t* p, std::size_t n) { buf_.insert(buf_.end(), p, p + n); }

    std::vector<std::uint8_t> take() && { return std::move(buf_); }

private:
    std::vector<std::uint8_t> buf_;
};

class ByteReader {
public:
    explicit ByteReader(std::span<const std::uint8_t> data) : data_(data) {}

    std::uint8_t u8() {
        need(1);
        return data_[pos_++];
    }
    std::uint16_t u16() {
        need(2);
        const auto v = static_cast<std::uint16_t>((data_[pos_] << 8) | data_[pos_ + 1]);
        pos_ += 2;
        return v;
    }
    std::uint32_t u32() {
        const std::uint32_t hi = u16();
        return (hi << 16) | u16();
    }
    std::uint64_t u64() {
        const std::uint64_t hi = u32();
        return (hi << 32) | u32();
    }
    std::int32_t i32() { return static_cast<std::int32_t>(u32()); }
    void bytes(std::uint8_t* dst, std::size_t n) {
        need(n);
        std::memcpy(dst, data_.data() + pos_, n);
        pos_ += n;
    }
    std::string str(std::size_t n) {
        need(n);
        std::string s(reinterpret_cast<const char*>(data_.data() + pos_), n);
        pos_ += n;
        return s;
    }
    std::size_t remaining() const { return data_.size() - pos_; }

private:
    void need(std::size_t n) const {
        if (data_.size() - pos_ < n)
            throw CodecError(ErrorCode::malformed, "message truncated");
    }
    std::span<const std::uint8_t> data_;
    std::size_t pos_ = 0;
};

[[noreturn]] void malformed(const std::string& what) {
    throw CodecError(ErrorCode::malformed, what);
}

bool utf8_valid(std::string_view s) {
    std::size_t i = 0;
    while (i < s.size()) {
        const auto c = static_cast<unsigned char>(s[i]);
        std::size_t extra;
        if (c < 0x80)
            extra = 0;
        else if ((c & 0xe0) == 0xc0 && c >= 0xc2)
            extra = 1;
        else if ((c & 0xf0) == 0xe0)
            extra = 2;
        else if ((c & 0xf8) == 0xf0 && c <= 0xf4)
            extra = 3;
        else
            return false;
        if (i + extra >= s.size() && extra > 0)
            return false;
        for (std::size_t k = 1; k <= extra; ++k) {
            if ((static_cast<unsigned char>(s[i + k]) & 0xc0) != 0x80)
                return false;
        }
        i += extra + 1;
    }
    return true;
}

constexpr std::int64_t kI32Min = std::numeric_limits<std::int32_t>::min();
constexpr std::int64_t kI32Max = std::numeric_limits<std::int32_t>::max();

std::int32_t to_wire_cm(std::int64_t v, const char* what) {
    if (v < kI32Min || v > kI32Max)
        throw std::invalid_argument(std::string(what) + " does not fit 32-bit centimeters");
    return static_cast<std::int32_t>(v);
}

void write_geometry(ByteWriter& w, const QueryGeometry& g, bool allow_intervals) {
    if (const auto* c = std::get_if<Circle>(&g)) {
        w.u8(1);
        w.i32(to_wire_cm(c->center_x_cm, "circle center x"));
        w.i32(to_wire_cm(c->center_y_cm, "circle center y"));
        if (c->radius_cm <= 0 || c->radius_cm > std::numeric_limits<std::uint32_t>::max())
            throw std::invalid_argument("circle radius does not fit 32-bit centimeters");
        w.u32(static_cast<std::uint32_t>(c->radius_cm));
        return;
    }
    if (const auto* r = std::get_if<Rect>(&g)) {
        w.u8(2);
        w.i32(to_wire_cm(r->min_x_cm, "rect min x"));
        w.i32(to_wire_cm(r->min_y_cm, "rect min y"));
        w.i32(to_wire_cm(r->max_x_cm, "rect max x"));
        w.i32(to_wire_cm(r->max_y_cm, "rect max y"));
        return;
    }
    if (!allow_intervals)
        throw std::invalid_argument("raw intervals are not valid in QUERY_GEOM");
    const auto& set = std::get<IntervalSet>(g);
    if (set.size() > std::numeric_limits<std::uint16_t>::max())
        throw std::invalid_argument("too many intervals for one message");
    w.u8(3);
    w.u16(static_cast<std::uint16_t>(set.size()));
    for (const Interval& iv : set) {
        w.u32(iv.low);
        w.u32(iv.high);
    }
}

IntervalSet read_interval_list(ByteReader& r) {
    const std::uint16_t count = r.u16();
    std::vector<Interval> ivs;
    ivs.reserve(count);
    for (std::uint16_t i = 0; i < count; ++i) {
        const std::uint32_t low = r.u32();
        const std::uint32_t high = r.u32();
        if (low > high)
            malformed("interval low exceeds high");
        ivs.push_back({low, high});
    }
    return IntervalSet::normalized(std::move(ivs));
}

QueryGeometry read_geometry(ByteReader& r, bool allow_intervals) {
    const std::uint8_t tag = r.u8();
    switch (tag) {
    case 1: {
        Circle c;
        c.center_x_cm = r.i32();
        c.center_y_cm = r.i32();
        c.radius_cm = r.u32();
        if (c.radius_cm == 0)
            malformed("circle radius must be positive");
        return c;
    }
    case 2: {
        Rect rect;
        rect.min_x_cm = r.i32();
        rect.min_y_cm = r.i32();
        rect.max_x_cm = r.i32();
        rect.max_y_cm = r.i32();
        if (rect.min_x_cm >= rect.max_x_cm || rect.min_y_cm >= rect.max_y_cm)
            malformed("rect must have min < max on both axes");
        return rect;
    }
    case 3:
        if (!allow_intervals)
            malformed("raw intervals are not valid in QUERY_GEOM");
        return read_interval_list(r);
    default:
        malformed("unknown geometry tag " + std::to_string(tag));
    }
}

void write_address(ByteWriter& w, const NetworkAddress& a) {
    a.validate();
    w.u8(static_cast<std::uint8_t>(a.family));
    w.bytes(a.bytes.data(), a.addr_len());
    w.u16(a.port);
    w.u8(static_cast<std::uint8_t>(a.label.size()));
    w.bytes(reinterpret_cast<const std::uint8_t*>(a.label.data()), a.label.size());
}

NetworkAddress read_address(ByteReader& r) {
    NetworkAddress a;
    const std::uint8_t family = r.u8();
    if (family != 4 && family != 6)
        malformed("unknown address family " + std::to_string(family));
    a.family = static_cast<NetworkAddress::Family>(family);
    r.bytes(a.bytes.data(), a.addr_len());
    a.port = r.u16();
    const std::uint8_t label_len = r.u8();
    if (label_len > 63)
        malformed("label exceeds 63 bytes");
    a.label = r.str(label_len);
    try {
        a.validate();
    } catch (const std::invalid_argument& e) {
        malformed(e.what());
    }
    return a;
}

} // namespace

const char* error_code_name(ErrorCode code) {
    switch (code) {
    case ErrorCode::malformed:
        return "MALFORMED";
    case ErrorCode::unsupported_version:
        return "UNSUPPORTED_VERSION";
    case ErrorCode::too_many_results:
        return "TOO_MANY_RESULTS";
    case ErrorCode::unauthorized:
        return "UNAUTHORIZED";
    case ErrorCode::response_too_large:
        return "RESPONSE_TOO_LARGE";
    case ErrorCode::cell_mismatch:
        return "CELL_MISMATCH";
    case ErrorCode::stale_version:
        return "STALE_VERSION";
    }
    return "UNKNOWN";
}

std::vector<std::uint8_t> encode_message(const Message& m) {
    ByteWriter w;
    w.u8(kProtocolVersion);
    w.u8(static_cast<std::uint8_t>(m.type()));
    w.u64(m.request_id);
    w.u64(m.cell_id);
    if (m.auth) {
        if (m.auth->size() < 16 || m.auth->size() > 64)
            throw std::invalid_argument("auth token must be 16..64 bytes");
        w.u8(1);
        w.u8(static_cast<std::uint8_t>(m.auth->size()));
        w.bytes(m.auth->data(), m.auth->size());
    } else {
        w.u8(0);
    }

    if (const auto* q = std::get_if<QueryGeomBody>(&m.body)) {
        write_geometry(w, q->geometry, /*allow_intervals=*/false);
        w.u16(q->max_results);
    } else if (const auto* qi = std::get_if<QueryIntervalsBody>(&m.body)) {
        if (qi->intervals.size() > std::numeric_limits<std::uint16_t>::max())
            throw std::invalid_argument("too many intervals for one message");
        w.u16(static_cast<std::uint16_t>(qi->intervals.size()));
        for (const Interval& iv : qi->intervals) {
            w.u32(iv.low);
            w.u32(iv.high);
        }
    } else if (const auto* u = std::get_if<UpdateBody>(&m.body)) {
        w.bytes(u->device_id.data(), u->device_id.size());
        w.u64(u->version);
        write_address(w, u->address);
        write_geometry(w, u->location, /*allow_intervals=*/true);
    } else if (const auto* d = std::get_if<DeregisterBody>(&m.body)) {
        w.bytes(d->device_id.data(), d->device_id.size());
    } else if (const auto* resp = std::get_if<ResponseBody>(&m.body)) {
        if (resp->results.size() > std::numeric_limits<std::uint16_t>::max())
            throw std::invalid_argument("too many results for one message");
        w.u16(static_cast<std::uint16_t>(resp->results.size()));
        for (const ResponseResult& res : resp->results) {
            w.bytes(res.device_id.data(), res.device_id.size());
            write_address(w, res.address);
            if (res.matched.size() > std::numeric_limits<std::uint16_t>::max())
                throw std::invalid_argument("too many intervals for one result");
            w.u16(static_cast<std::uint16_t>(res.matched.size()));
            for (const Interval& iv : res.matched) {
                w.u32(iv.low);
                w.u32(iv.high);
            }
        }
    } else {
        const auto& err = std::get<ErrorBody>(m.body);
        if (err.detail.size() > 512)
            throw std::invalid_argument("error detail exceeds 512 bytes");
        w.u16(static_cast<std::uint16_t>(err.code));
        w.u16(static_cast<std::uint16_t>(err.detail.size()));
        w.bytes(reinterpret_cast<const std::uint8_t*>(err.detail.data()), err.detail.size());
    }
    return std::move(w).take();
}

Message decode_message(std::span<const std::uint8_t> data) {
    ByteReader r(data);
    const std::uint8_t version = r.u8();
    if (version != kProtocolVersion)
        throw CodecError(ErrorCode::unsupported_version,
                         "unsupported protocol version " + std::to_string(version));
    const std::uint8_t type = r.u8();

    Message m;
    m.request_id = r.u64();
    m.cell_id = r.u64();
    const std::uint8_t auth_tag = r.u8();
    if (auth_tag == 1) {
        const std::uint8_t len = r.u8();
        if (len < 16 || len > 64)
            malformed("auth token length out of range");
        std::vector<std::uint8_t> token(len);
        r.bytes(token.data(), len);
        m.auth = std::move(token);
    } else if (auth_tag != 0) {
        malformed("unknown auth tag " + std::to_string(auth_tag));
    }

    switch (static_cast<MessageType>(type)) {
    case MessageType::query_geom: {
        QueryGeomBody body;
        body.geometry = read_geometry(r, /*allow_intervals=*/false);
        body.max_results = r.u16();
        m.body = std::move(body);
        break;
    }
    case MessageType::query_intervals: {
        QueryIntervalsBody body;
        try {
            body.intervals = read_interval_list(r);
        } catch (const std::invalid_argument& e) {
            malformed(e.what());
        }
        m.body = std::move(body);
        break;
    }
    case MessageType::update: {
        UpdateBody body;
        r.bytes(body.device_id.data(), body.device_id.size());
        body.version = r.u64();
        body.address = read_address(r);
        body.location = read_geometry(r, /*allow_intervals=*/true);
        m.body = std::move(body);
        break;
    }
    case MessageType::deregister: {
        DeregisterBody body;
        r.bytes(body.device_id.data(), body.device_id.size());
        m.body = std::move(body);
        break;
    }
    case MessageType::response: {
        ResponseBody body;
        const std::uint16_t count = r.u16();
        body.results.reserve(count);
        for (std::uint16_t i = 0; i < count; ++i) {
            ResponseResult res;
            r.bytes(res.device_id.data(), res.device_id.size());
            res.address = read_address(r);
            res.matched = read_interval_list(r);
            body.results.push_back(std::move(res));
        }
        m.body = std::move(body);
        break;
    }
    case MessageType::error: {
        ErrorBody body;
        const std::uint16_t code = r.u16();
        if (code < 1 || code > 7)
            malformed("unknown error code " + std::to_string(code));
        body.code = static_cast<ErrorCode>(code);
        const std::uint16_t len = r.u16();
        body.detail = r.str(len);
        if (!utf8_valid(body.detail))
            malformed("error detail is not valid UTF-8");
        m.body = std::move(body);
        break;
    }
    default:
        malformed("unknown message type " + std::to_string(type));
    }

    if (r.remaining() != 0)
        malformed("trailing bytes after message");
    return m;
}

HeaderPeek peek_header(std::span<const std::uint8_t> data) {
    HeaderPeek peek;
    ByteReader r(data);
    try {
        r.u8(); // version
        r.u8(); // type
        peek.request_id = r.u64();
        peek.cell_id = r.u64();
    } catch (const CodecError&) {
        // keep whatever was recovered
    }
    return peek;
}

std::optional<Message> amplification_guard(Transport transport, std::size_t request_len,
                                           const Message& response) {
    if (transport == Transport::tcp)
        return response;
    if (encode_message(response).size() <= request_len)
        return response;

    std::string count;
    if (const auto* resp = std::get_if<ResponseBody>(&response.body))
        count = std::to_string(resp->results.size());
    else if (const auto* err = std::get_if<ErrorBody>(&response.body))
        count = err->detail;

    Message small;
    small.request_id = response.request_id;
    small.cell_id = response.cell_id;
    small.body = ErrorBody{ErrorCode::response_too_large, count};
    if (encode_message(small).size() <= request_len)
        return small;
    std::get<ErrorBody>(small.body).detail.clear();
    if (encode_message(small).size() <= request_len)
        return small;
    return std::nullopt; // even the bare error would amplify; stay silent
}

ResponseCache::ResponseCache(std::chrono::milliseconds ttl, std::size_t capacity)
    : ttl_(ttl), capacity_(capacity) {}

std::optional<std::vector<std::uint8_t>> ResponseCache::lookup(const std::string& peer,
                                                               std::uint64_t request_id) {
    const auto now = Clock::now();
    std::lock_guard lock(mu_);
    auto it = entries_.find({peer, request_id});
    if (it == entries_.end())
        return std::nullopt;
    if (now - it->second.second > ttl_) {
        entries_.erase(it);
        return std::nullopt;
    }
    return it->second.first;
}

void ResponseCache::store(const std::string& peer, std::uint64_t request_id,
                          std::vector<std::uint8_t> response) {
    const auto now = Clock::now();
    std::lock_guard lock(mu_);
    purge_expired_locked(now);
    while (entries_.size() >= capacity_ && !order_.empty()) {
        entries_.erase(order_.front().first);
        order_.pop_front();
    }
    Key key{peer, request_id};
    entries_[key] = {std::move(response), now};
    order_.emplace_back(std::move(key), now);
}

void ResponseCache::purge_expired_locked(Clock::time_point now) {
    while (!order_.empty() && now - order_.front().second > ttl_) {
        auto it = entries_.find(order_.front().first);
        if (it != entries_.end() && now - it->second.second > ttl_)
            entries_.erase(it);
        order_.pop_front();
    }
}

} // namespace sns
