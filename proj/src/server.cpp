#include "sns/server.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <chrono>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "sns/log.hpp"
#include "sns/units.hpp"

namespace sns {

namespace {

std::string trim(std::string_view s) {
    std::size_t b = 0, e = s.size();
    while (b < e && (s[b] == ' ' || s[b] == '\t'))
        ++b;
    while (e > b && (s[e - 1] == ' ' || s[e - 1] == '\t' || s[e - 1] == '\r'))
        --e;
    return std::string(s.substr(b, e - b));
}

template <typename T>
T parse_number(const std::string& value, const std::string& key) {
    T out{};
    const char* begin = value.data();
    const char* end = begin + value.size();
    auto [ptr, ec] = std::from_chars(begin, end, out);
    if (ec != std::errc() || ptr != end)
        throw ConfigError("bad numeric value for " + key + ": '" + value + "'");
    return out;
}

std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> out;
    std::size_t start = 0;
    for (std::size_t i = 0; i <= s.size(); ++i) {
        if (i == s.size() || s[i] == sep) {
            const std::string part = trim(std::string_view(s).substr(start, i - start));
            if (!part.empty())
                out.push_back(part);
            start = i + 1;
        }
    }
    return out;
}

bool constant_time_equal(std::span<const std::uint8_t> a, std::span<const std::uint8_t> b) {
    if (a.size() != b.size())
        return false;
    unsigned char acc = 0;
    for (std::size_t i = 0; i < a.size(); ++i)
        acc = static_cast<unsigned char>(acc | (a[i] ^ b[i]));
    return acc == 0;
}

const char* type_name(MessageType t) {
    switch (t) {
    case MessageType::query_geom:
        return "QUERY_GEOM";
    case MessageType::query_intervals:
        return "QUERY_INTERVALS";
    case MessageType::update:
        return "UPDATE";
    case MessageType::deregister:
        return "DEREGISTER";
    case MessageType::response:
        return "RESPONSE";
    case MessageType::error:
        return "ERROR";
    }
    return "?";
}

Message make_error(std::uint64_t request_id, CellId cell_id, ErrorCode code,
                   std::string detail) {
    Message m;
    m.request_id = request_id;
    m.cell_id = cell_id;
    m.body = ErrorBody{code, std::move(detail)};
    return m;
}

} // namespace

// --- ServerConfig -------------------------------------------------------------

void ServerConfig::validate() const {
    if (grid_order < 1 || grid_order > 16)
        throw ConfigError("grid_order must be in [1, 16]");
    if (cell_size_cm <= 0)
        throw ConfigError("cell_size_cm must be positive");
    if (max_results < 1)
        throw ConfigError("max_results must be at least 1");
    if (!auth_token.empty() && (auth_token.size() < 16 || auth_token.size() > 64))
        throw ConfigError("auth_token must be 16..64 bytes");
    if (workers < 1 || workers > 256)
        throw ConfigError("workers must be in [1, 256]");
    if (!log_level_from_string(log_level))
        throw ConfigError("log_level must be error, info or debug");
    if (!net::Endpoint::resolve(bind_address, port))
        throw ConfigError("bind_address is not a valid IP address: " + bind_address);
    try {
        grid().validate();
    } catch (const std::invalid_argument& e) {
        throw ConfigError(e.what());
    }
}

void ServerConfig::set(const std::string& key, const std::string& value) {
    if (key == "bind_address")
        bind_address = value;
    else if (key == "port")
        port = parse_number<std::uint16_t>(value, key);
    else if (key == "cell_id")
        cell_id = parse_number<std::uint64_t>(value, key);
    else if (key == "grid_order")
        grid_order = parse_number<std::uint32_t>(value, key);
    else if (key == "cell_size_cm")
        cell_size_cm = parse_number<std::int64_t>(value, key);
    else if (key == "origin_x_cm")
        origin_x_cm = parse_number<std::int64_t>(value, key);
    else if (key == "origin_y_cm")
        origin_y_cm = parse_number<std::int64_t>(value, key);
    else if (key == "max_results")
        max_results = parse_number<std::uint32_t>(value, key);
    else if (key == "auth_token")
        auth_token = value;
    else if (key == "trusted_prefixes")
        trusted_prefixes = split(value, ',');
    else if (key == "survey_file")
        survey_file = value;
    else if (key == "snapshot_file")
        snapshot_file = value;
    else if (key == "snapshot_interval_s")
        snapshot_interval_s = parse_number<std::uint32_t>(value, key);
    else if (key == "log_level")
        log_level = value;
    else if (key == "workers")
        workers = parse_number<std::uint32_t>(value, key);
    else
        throw ConfigError("unknown config key: " + key);
}

ServerConfig ServerConfig::from_file(const std::string& path) {
    std::ifstream f(path);
    if (!f)
        throw ConfigError("cannot open config file " + path);
    ServerConfig cfg;
    std::string line;
    int lineno = 0;
    while (std::getline(f, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos)
            line.erase(hash);
        const std::string stripped = trim(line);
        if (stripped.empty())
            continue;
        const auto eq = stripped.find('=');
        if (eq == std::string::npos)
            throw ConfigError(path + ":" + std::to_string(lineno) + ": expected key = value");
        try {
            cfg.set(trim(std::string_view(stripped).substr(0, eq)),
                    trim(std::string_view(stripped).substr(eq + 1)));
        } catch (const ConfigError& e) {
            throw ConfigError(path + ":" + std::to_string(lineno) + ": " + e.what());
        }
    }
    return cfg;
}

void ServerConfig::apply_env() {
    static const char* keys[] = {
        "bind_address", "port",        "cell_id",     "grid_order",
        "cell_size_cm", "origin_x_cm", "origin_y_cm", "max_results",
        "auth_token",   "trusted_prefixes", "survey_file", "snapshot_file",
        "snapshot_interval_s", "log_level", "workers",
    };
    for (const char* key : keys) {
        std::string env_name = "SNS_";
        for (const char* p = key; *p; ++p)
            env_name += static_cast<char>(std::toupper(static_cast<unsigned char>(*p)));
        if (const char* value = std::getenv(env_name.c_str()))
            set(key, value);
    }
}

// --- Survey loading -----------------------------------------------------------

namespace {

QueryGeometry parse_survey_geometry(const std::vector<std::string>& fields, std::size_t from,
                                    int lineno) {
    auto bad = [&](const std::string& why) -> SurveyError {
        return SurveyError("line " + std::to_string(lineno) + ": " + why);
    };
    auto meters = [&](const std::string& s) {
        const auto cm = parse_meters_to_cm(s);
        if (!cm)
            throw bad("bad meter value '" + s + "'");
        return *cm;
    };

    const std::string& kind = fields[from];
    const std::size_t argc = fields.size() - from - 1;
    if (kind == "circle") {
        if (argc != 3)
            throw bad("circle needs <x> <y> <radius>");
        return Circle{meters(fields[from + 1]), meters(fields[from + 2]),
                      meters(fields[from + 3])};
    }
    if (kind == "rect") {
        if (argc != 4)
            throw bad("rect needs <x0> <y0> <x1> <y1>");
        return Rect{meters(fields[from + 1]), meters(fields[from + 2]),
                    meters(fields[from + 3]), meters(fields[from + 4])};
    }
    if (kind == "intervals") {
        if (argc == 0)
            throw bad("intervals needs at least one range");
        std::vector<Interval> ivs;
        for (std::size_t i = from + 1; i < fields.size(); ++i) {
            const std::string& tok = fields[i];
            const auto dash = tok.find('-');
            std::uint32_t low = 0, high = 0;
            try {
                if (dash == std::string::npos) {
                    low = high = static_cast<std::uint32_t>(std::stoul(tok));
                } else {
                    low = static_cast<std::uint32_t>(std::stoul(tok.substr(0, dash)));
                    high = static_cast<std::uint32_t>(std::stoul(tok.substr(dash + 1)));
                }
            } catch (const std::exception&) {
                throw bad("bad interval '" + tok + "'");
            }
            if (low > high)
                throw bad("bad interval '" + tok + "'");
            ivs.push_back({low, high});
        }
        return IntervalSet::normalized(std::move(ivs));
    }
    throw bad("unknown geometry '" + kind + "' (expected circle, rect or intervals)");
}

} // namespace

std::size_t load_survey(Registry& registry, const std::string& path) {
    std::ifstream f(path);
    if (!f)
        throw SurveyError("cannot open survey file " + path);

    std::size_t loaded = 0;
    std::string line;
    int lineno = 0;
    std::vector<DeviceId> seen;
    while (std::getline(f, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos)
            line.erase(hash);
        std::istringstream iss(line);
        std::vector<std::string> fields;
        for (std::string tok; iss >> tok;)
            fields.push_back(tok);
        if (fields.empty())
            continue;
        if (fields.size() < 3)
            throw SurveyError("line " + std::to_string(lineno) +
                              ": expected <device-id> <ip:port> <geometry>");

        const auto id = device_id_from_hex(fields[0]);
        if (!id)
            throw SurveyError("line " + std::to_string(lineno) + ": bad device id '" +
                              fields[0] + "'");
        if (std::find(seen.begin(), seen.end(), *id) != seen.end())
            throw SurveyError("line " + std::to_string(lineno) + ": duplicate device id '" +
                              fields[0] + "'");
        seen.push_back(*id);

        const auto addr = NetworkAddress::parse_endpoint(fields[1]);
        if (!addr)
            throw SurveyError("line " + std::to_string(lineno) + ": bad address '" +
                              fields[1] + "'");

        const QueryGeometry geom = parse_survey_geometry(fields, 2, lineno);
        try {
            const auto outcome = registry.register_or_update(*id, *addr, geom, 0);
            if (outcome.status == Registry::UpdateOutcome::Status::applied)
                ++loaded;
            else
                log_debug("survey line " + std::to_string(lineno) +
                          ": device already registered, skipped");
        } catch (const std::invalid_argument& e) {
            throw SurveyError("line " + std::to_string(lineno) + ": " + e.what());
        }
    }
    return loaded;
}

// --- Server -------------------------------------------------------------------

bool Server::Cidr::matches(const net::Endpoint& ep) const {
    const auto [p, n] = ep.addr_bytes();
    if ((family == AF_INET && n != 4) || (family == AF_INET6 && n != 16))
        return false;
    unsigned bits = prefix_len;
    for (std::size_t i = 0; i < n && bits > 0; ++i) {
        const unsigned take = bits >= 8 ? 8 : bits;
        const std::uint8_t mask = static_cast<std::uint8_t>(0xff00 >> take);
        if ((p[i] & mask) != (bytes[i] & mask))
            return false;
        if (bits <= 8)
            break;
        bits -= 8;
    }
    return true;
}

Server::Server(ServerConfig cfg) : cfg_(std::move(cfg)) {
    cfg_.validate();
    if (const auto level = log_level_from_string(cfg_.log_level))
        set_log_level(*level);

    for (const std::string& p : cfg_.trusted_prefixes) {
        const auto slash = p.find('/');
        const std::string host = slash == std::string::npos ? p : p.substr(0, slash);
        Cidr cidr{};
        const auto ep = net::Endpoint::resolve(host, 1);
        if (!ep)
            throw ConfigError("bad trusted prefix: " + p);
        const auto [bytes, n] = ep->addr_bytes();
        cidr.family = n == 4 ? AF_INET : AF_INET6;
        std::memcpy(cidr.bytes.data(), bytes, n);
        cidr.prefix_len = static_cast<unsigned>(n * 8);
        if (slash != std::string::npos) {
            const auto len = parse_number<unsigned>(p.substr(slash + 1), "trusted prefix length");
            if (len > n * 8)
                throw ConfigError("bad trusted prefix length: " + p);
            cidr.prefix_len = len;
        }
        trusted_.push_back(cidr);
    }

    registry_ = std::make_unique<Registry>(cfg_.grid(), cfg_.cell_id, cfg_.max_results);
    queue_capacity_ = std::size_t{cfg_.workers} * 32;

    if (!cfg_.snapshot_file.empty() && std::filesystem::exists(cfg_.snapshot_file)) {
        registry_->restore(cfg_.snapshot_file);
        log_info("restored " + std::to_string(registry_->device_count()) + " devices from " +
                 cfg_.snapshot_file);
    }
    if (!cfg_.survey_file.empty()) {
        const std::size_t n = load_survey(*registry_, cfg_.survey_file);
        log_info("surveyed " + std::to_string(n) + " devices from " + cfg_.survey_file);
    }
}

Server::~Server() {
    stop();
}

void Server::start() {
    if (running_.exchange(true))
        return;
    try {
        // both transports share one port; with an ephemeral request the TCP
        // side may lose the race for the number UDP drew, so retry
        for (int attempt = 0;; ++attempt) {
            udp_ = net::UdpSocket::bind(cfg_.bind_address, cfg_.port);
            bound_port_ = udp_.local_port();
            try {
                tcp_ = net::TcpListener::listen(cfg_.bind_address, bound_port_);
                break;
            } catch (const net::SocketError&) {
                udp_ = net::UdpSocket();
                if (cfg_.port != 0 || attempt >= 9)
                    throw;
            }
        }
    } catch (...) {
        running_ = false;
        throw;
    }

    {
        std::lock_guard lock(queue_mu_);
        queue_closed_ = false;
    }
    threads_.emplace_back(&Server::udp_loop, this);
    threads_.emplace_back(&Server::tcp_loop, this);
    if (!cfg_.snapshot_file.empty())
        threads_.emplace_back(&Server::snapshot_loop, this);
    for (std::uint32_t i = 0; i < cfg_.workers; ++i)
        threads_.emplace_back(&Server::worker_loop, this);
    log_info("listening on " + cfg_.bind_address + ":" + std::to_string(bound_port_) +
             " (udp+tcp), cell " + std::to_string(cfg_.cell_id));
}

void Server::stop() {
    if (!running_.exchange(false))
        return;
    stop_cv_.notify_all();
    {
        std::lock_guard lock(queue_mu_);
        queue_closed_ = true;
    }
    queue_cv_.notify_all();
    for (std::thread& t : threads_)
        t.join();
    threads_.clear();
    udp_ = net::UdpSocket();
    tcp_ = net::TcpListener();
    if (!cfg_.snapshot_file.empty())
        write_snapshot("shutdown");
    log_info("stopped");
}

void Server::write_snapshot(const char* reason) {
    try {
        registry_->snapshot(cfg_.snapshot_file);
        log_debug(std::string("snapshot written (") + reason + ")");
    } catch (const SnapshotError& e) {
        log_error(std::string("snapshot failed: ") + e.what());
    }
}

bool Server::queue_push(Task task) {
    {
        std::lock_guard lock(queue_mu_);
        if (queue_closed_ || queue_.size() >= queue_capacity_)
            return false; // shed load, bounded memory
        queue_.push_back(std::move(task));
    }
    queue_cv_.notify_one();
    return true;
}

std::optional<Server::Task> Server::queue_pop() {
    std::unique_lock lock(queue_mu_);
    queue_cv_.wait(lock, [&] { return queue_closed_ || !queue_.empty(); });
    if (queue_.empty())
        return std::nullopt;
    Task task = std::move(queue_.front());
    queue_.pop_front();
    return task;
}

void Server::udp_loop() {
    while (running_.load()) {
        std::optional<std::pair<std::vector<std::uint8_t>, net::Endpoint>> got;
        try {
            got = udp_.recv_from(100);
        } catch (const net::SocketError& e) {
            if (running_.load())
                log_error(std::string("udp receive: ") + e.what());
            continue;
        }
        if (!got)
            continue;
        if (!queue_push(UdpTask{std::move(got->first), got->second}))
            log_debug("udp queue full, datagram dropped");
    }
}

void Server::tcp_loop() {
    while (running_.load()) {
        std::optional<net::TcpConnection> conn;
        try {
            conn = tcp_.accept(100);
        } catch (const net::SocketError& e) {
            if (running_.load())
                log_error(std::string("tcp accept: ") + e.what());
            continue;
        }
        if (!conn)
            continue;
        if (!queue_push(TcpTask{std::move(*conn)}))
            log_debug("tcp queue full, connection refused");
    }
}

void Server::worker_loop() {
    while (auto task = queue_pop()) {
        if (auto* udp = std::get_if<UdpTask>(&*task)) {
            const std::string peer_key = "udp/" + udp->peer.to_string();
            const HeaderPeek peek = peek_header(udp->data);
            if (auto cached = cache_.lookup(peer_key, peek.request_id)) {
                udp_.send_to(*cached, udp->peer);
                continue;
            }
            const auto reply = handle_packet(udp->data, udp->peer, Transport::udp);
            if (reply) {
                try {
                    udp_.send_to(*reply, udp->peer);
                } catch (const net::SocketError& e) {
                    log_debug(std::string("udp send: ") + e.what());
                }
                cache_.store(peer_key, peek.request_id, *reply);
            }
        } else {
            serve_connection(std::get<TcpTask>(*task).conn);
        }
    }
}

void Server::serve_connection(net::TcpConnection& conn) {
    int idle_polls = 0;
    while (running_.load() && idle_polls < 5) {
        std::optional<std::vector<std::uint8_t>> frame;
        try {
            frame = conn.recv_frame(1000, net::kMaxTcpFrame);
        } catch (const net::TimedOut&) {
            ++idle_polls;
            continue;
        } catch (const net::SocketError& e) {
            log_debug("tcp " + conn.peer().to_string() + ": " + e.what());
            return;
        }
        if (!frame)
            return; // peer closed
        idle_polls = 0;
        const auto reply = handle_packet(*frame, conn.peer(), Transport::tcp);
        if (reply) {
            try {
                conn.send_frame(*reply, 1000);
            } catch (const net::SocketError& e) {
                log_debug("tcp " + conn.peer().to_string() + ": " + e.what());
                return;
            }
        }
    }
}

void Server::snapshot_loop() {
    std::unique_lock lock(stop_mu_);
    while (running_.load()) {
        stop_cv_.wait_for(lock, std::chrono::seconds(cfg_.snapshot_interval_s),
                          [&] { return !running_.load(); });
        if (!running_.load())
            break;
        write_snapshot("periodic");
    }
}

bool Server::peer_trusted(const net::Endpoint& peer) const {
    for (const Cidr& c : trusted_) {
        if (c.matches(peer))
            return true;
    }
    return false;
}

std::optional<std::vector<std::uint8_t>> Server::handle_packet(
    std::span<const std::uint8_t> data, const net::Endpoint& peer, Transport transport) {
    const auto started = std::chrono::steady_clock::now();
    Message reply;
    std::string outcome;
    std::string req_name = "?";
    try {
        const Message request = decode_message(data);
        req_name = type_name(request.type());
        reply = dispatch(request, peer, outcome);
    } catch (const CodecError& e) {
        const HeaderPeek peek = peek_header(data);
        reply = make_error(peek.request_id, cfg_.cell_id, e.code(), e.what());
        outcome = error_code_name(e.code());
    } catch (const std::exception& e) {
        // no request may take the process down
        const HeaderPeek peek = peek_header(data);
        reply = make_error(peek.request_id, cfg_.cell_id, ErrorCode::malformed, e.what());
        outcome = "MALFORMED";
    }

    const auto guarded = amplification_guard(transport, data.size(), reply);
    std::optional<std::vector<std::uint8_t>> encoded;
    if (guarded) {
        encoded = encode_message(*guarded);
        if (std::get_if<ErrorBody>(&guarded->body) &&
            std::get<ErrorBody>(guarded->body).code == ErrorCode::response_too_large)
            outcome = "RESPONSE_TOO_LARGE";
    } else {
        outcome = "dropped(guard)";
    }

    if (log_level() >= LogLevel::debug) {
        const auto us = std::chrono::duration_cast<std::chrono::microseconds>(
                            std::chrono::steady_clock::now() - started)
                            .count();
        log_debug((transport == Transport::udp ? "udp " : "tcp ") + peer.to_string() + " " +
                  req_name + " -> " + outcome + " " + std::to_string(us) + "us");
    }
    return encoded;
}

Message Server::dispatch(const Message& request, const net::Endpoint& peer,
                         std::string& outcome) {
    const std::uint64_t rid = request.request_id;

    if (request.type() == MessageType::response || request.type() == MessageType::error) {
        outcome = "MALFORMED";
        return make_error(rid, cfg_.cell_id, ErrorCode::malformed,
                          "unexpected message type on a server");
    }

    if (request.cell_id != cfg_.cell_id) {
        outcome = "CELL_MISMATCH";
        return make_error(rid, cfg_.cell_id, ErrorCode::cell_mismatch,
                          std::to_string(cfg_.cell_id));
    }

    if (!cfg_.auth_token.empty() && !peer_trusted(peer)) {
        const std::span<const std::uint8_t> expected(
            reinterpret_cast<const std::uint8_t*>(cfg_.auth_token.data()),
            cfg_.auth_token.size());
        if (!request.auth || !constant_time_equal(*request.auth, expected)) {
            outcome = "UNAUTHORIZED";
            return make_error(rid, cfg_.cell_id, ErrorCode::unauthorized, "");
        }
    }

    auto resolve_reply = [&](const QueryGeometry& geometry,
                             std::uint32_t max_results) -> Message {
        Registry::ResolveOutcome result;
        try {
            result = registry_->resolve(geometry, max_results);
        } catch (const std::invalid_argument& e) {
            outcome = "MALFORMED";
            return make_error(rid, cfg_.cell_id, ErrorCode::malformed, e.what());
        }
        if (result.too_many) {
            outcome = "TOO_MANY_RESULTS";
            return make_error(rid, cfg_.cell_id, ErrorCode::too_many_results,
                              std::to_string(result.total_found));
        }
        Message m;
        m.request_id = rid;
        m.cell_id = cfg_.cell_id;
        ResponseBody body;
        body.results.reserve(result.results.size());
        for (auto& r : result.results)
            body.results.push_back({r.device_id, r.address, std::move(r.matched)});
        outcome = "RESPONSE(" + std::to_string(body.results.size()) + ")";
        m.body = std::move(body);
        return m;
    };

    if (const auto* q = std::get_if<QueryGeomBody>(&request.body)) {
        const std::uint32_t limit =
            q->max_results == 0 ? cfg_.max_results
                                : std::min<std::uint32_t>(q->max_results, cfg_.max_results);
        return resolve_reply(q->geometry, limit);
    }
    if (const auto* qi = std::get_if<QueryIntervalsBody>(&request.body))
        return resolve_reply(QueryGeometry{qi->intervals}, cfg_.max_results);

    if (const auto* u = std::get_if<UpdateBody>(&request.body)) {
        Registry::UpdateOutcome result;
        try {
            result = registry_->register_or_update(u->device_id, u->address, u->location,
                                                   u->version);
        } catch (const std::invalid_argument& e) {
            outcome = "MALFORMED";
            return make_error(rid, cfg_.cell_id, ErrorCode::malformed, e.what());
        }
        if (result.status == Registry::UpdateOutcome::Status::stale) {
            outcome = "STALE_VERSION";
            return make_error(rid, cfg_.cell_id, ErrorCode::stale_version,
                              std::to_string(result.current_version));
        }
        Message m;
        m.request_id = rid;
        m.cell_id = cfg_.cell_id;
        m.body = ResponseBody{};
        outcome = "ACK";
        return m;
    }

    // deregister: idempotent, absent devices acknowledge too
    const auto& d = std::get<DeregisterBody>(request.body);
    registry_->deregister(d.device_id);
    Message m;
    m.request_id = rid;
    m.cell_id = cfg_.cell_id;
    m.body = ResponseBody{};
    outcome = "ACK";
    return m;
}

} // namespace sns
