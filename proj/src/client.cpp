#include "sns/client.hpp"

#include <chrono>
#include <cstdlib>

namespace sns {

namespace {

std::uint64_t seed_from_entropy() {
    std::random_device rd;
    return (std::uint64_t{rd()} << 32) ^ rd() ^
           static_cast<std::uint64_t>(
               std::chrono::steady_clock::now().time_since_epoch().count());
}

} // namespace

Client::Client(ClientConfig cfg) : cfg_(std::move(cfg)), rng_(seed_from_entropy()) {
    const auto ep = net::Endpoint::resolve(cfg_.host, cfg_.port);
    if (!ep)
        throw std::invalid_argument("cannot parse server address " + cfg_.host);
    server_ = *ep;
    if (cfg_.timeout_ms <= 0)
        throw std::invalid_argument("timeout must be positive");
    if (cfg_.retries < 0)
        throw std::invalid_argument("retries must be non-negative");
}

Message Client::base_message() {
    Message m;
    m.request_id = rng_();
    m.cell_id = cfg_.cell_id;
    if (!cfg_.auth.empty())
        m.auth = cfg_.auth;
    return m;
}

Client::Exchange Client::round_trip(const Message& request) {
    const std::vector<std::uint8_t> encoded = encode_message(request);
    if (cfg_.transport == ClientConfig::TransportPref::tcp ||
        encoded.size() > cfg_.max_udp_payload)
        return tcp_round_trip(encoded, request.request_id);

    Exchange ex = udp_round_trip(encoded, request.request_id);
    if (ex.reply) {
        if (const auto* err = std::get_if<ErrorBody>(&ex.reply->body)) {
            if (err->code == ErrorCode::response_too_large)
                return tcp_round_trip(encoded, request.request_id);
        }
    }
    return ex;
}

Client::Exchange Client::udp_round_trip(const std::vector<std::uint8_t>& encoded,
                                        std::uint64_t request_id) {
    Exchange ex;
    try {
        net::UdpSocket sock = net::UdpSocket::unbound(server_.family());
        for (int attempt = 0; attempt <= cfg_.retries; ++attempt) {
            sock.send_to(encoded, server_);
            const auto deadline = std::chrono::steady_clock::now() +
                                  std::chrono::milliseconds(cfg_.timeout_ms);
            for (;;) {
                const auto left = std::chrono::duration_cast<std::chrono::milliseconds>(
                                      deadline - std::chrono::steady_clock::now())
                                      .count();
                if (left <= 0)
                    break;
                auto got = sock.recv_from(static_cast<int>(left));
                if (!got)
                    break;
                Message reply;
                try {
                    reply = decode_message(got->first);
                } catch (const CodecError&) {
                    continue; // not ours or damaged; keep waiting
                }
                if (reply.request_id != request_id)
                    continue; // stray reply to some other request
                ex.reply = std::move(reply);
                return ex;
            }
        }
        ex.transport_failed = true;
        ex.detail = "timed out after " + std::to_string(cfg_.retries + 1) + " attempts";
    } catch (const net::SocketError& e) {
        ex.transport_failed = true;
        ex.detail = e.what();
    }
    return ex;
}

Client::Exchange Client::tcp_round_trip(const std::vector<std::uint8_t>& encoded,
                                        std::uint64_t request_id) {
    Exchange ex;
    try {
        net::TcpConnection conn = net::TcpConnection::connect(server_, cfg_.timeout_ms);
        conn.send_frame(encoded, cfg_.timeout_ms);
        const auto frame = conn.recv_frame(cfg_.timeout_ms, net::kMaxTcpFrame);
        if (!frame) {
            ex.transport_failed = true;
            ex.detail = "server closed the connection";
            return ex;
        }
        Message reply = decode_message(*frame);
        if (reply.request_id != request_id) {
            ex.transport_failed = true;
            ex.detail = "response does not match request id";
            return ex;
        }
        ex.reply = std::move(reply);
    } catch (const net::SocketError& e) {
        ex.transport_failed = true;
        ex.detail = e.what();
    } catch (const CodecError& e) {
        ex.transport_failed = true;
        ex.detail = std::string("undecodable response: ") + e.what();
    }
    return ex;
}

Client::QueryOutcome Client::finish_query(Exchange ex) {
    QueryOutcome out;
    if (ex.transport_failed || !ex.reply) {
        out.status = Status::transport_error;
        out.transport_detail = std::move(ex.detail);
        return out;
    }
    if (auto* resp = std::get_if<ResponseBody>(&ex.reply->body)) {
        out.status = Status::ok;
        out.results = std::move(resp->results);
        return out;
    }
    if (const auto* err = std::get_if<ErrorBody>(&ex.reply->body)) {
        out.error = *err;
        if (err->code == ErrorCode::too_many_results) {
            out.status = Status::too_many;
            out.total_found = static_cast<std::uint32_t>(std::strtoul(err->detail.c_str(),
                                                                      nullptr, 10));
        } else {
            out.status = Status::error_reply;
        }
        return out;
    }
    out.status = Status::transport_error;
    out.transport_detail = "server sent a non-response message";
    return out;
}

Client::QueryOutcome Client::query(const QueryGeometry& geometry, std::uint16_t max_results) {
    if (std::get_if<IntervalSet>(&geometry))
        return query_intervals(std::get<IntervalSet>(geometry));
    Message m = base_message();
    m.body = QueryGeomBody{geometry, max_results};
    return finish_query(round_trip(m));
}

Client::QueryOutcome Client::query_intervals(const IntervalSet& intervals) {
    Message m = base_message();
    m.body = QueryIntervalsBody{intervals};
    return finish_query(round_trip(m));
}

Client::AnnounceOutcome Client::finish_announce(Exchange ex) {
    AnnounceOutcome out;
    if (ex.transport_failed || !ex.reply) {
        out.status = Status::transport_error;
        out.transport_detail = std::move(ex.detail);
        return out;
    }
    if (std::get_if<ResponseBody>(&ex.reply->body)) {
        out.status = Status::ok;
        return out;
    }
    if (const auto* err = std::get_if<ErrorBody>(&ex.reply->body)) {
        out.error = *err;
        if (err->code == ErrorCode::stale_version) {
            out.status = Status::stale;
            out.current_version = std::strtoull(err->detail.c_str(), nullptr, 10);
        } else {
            out.status = Status::error_reply;
        }
        return out;
    }
    out.status = Status::transport_error;
    out.transport_detail = "server sent a non-response message";
    return out;
}

Client::AnnounceOutcome Client::announce(const DeviceId& device_id,
                                         const NetworkAddress& address,
                                         const QueryGeometry& geometry, std::uint64_t version) {
    Message m = base_message();
    m.body = UpdateBody{device_id, version, address, geometry};
    return finish_announce(round_trip(m));
}

Client::AnnounceOutcome Client::deregister(const DeviceId& device_id) {
    Message m = base_message();
    m.body = DeregisterBody{device_id};
    return finish_announce(round_trip(m));
}

} // namespace sns
