// snsctl: query and update an SNS server from the command line.
// Exit codes: 0 success, 1 transport error, 2 protocol error, 3 too many
// results.

#include <CLI11.hpp>
#include <json.hpp>

#include <chrono>
#include <csignal>
#include <cstdio>
#include <string>
#include <thread>

#include "sns/client.hpp"
#include "sns/units.hpp"

using nlohmann::json;

namespace {

volatile std::sig_atomic_t g_interrupted = 0;

struct GeometryArgs {
    std::string x, y, radius;
    std::vector<std::string> rect;
    std::string intervals;
};

void add_geometry_options(CLI::App* cmd, GeometryArgs& args) {
    cmd->add_option("--x", args.x, "circle center x in meters");
    cmd->add_option("--y", args.y, "circle center y in meters");
    cmd->add_option("--radius", args.radius, "circle radius in meters");
    cmd->add_option("--rect", args.rect, "rect as x0 y0 x1 y1 in meters")->expected(4);
    cmd->add_option("--intervals", args.intervals,
                    "comma-separated curve intervals, e.g. 5-12,55");
}

std::int64_t meters_or_die(const std::string& s, const char* what) {
    const auto cm = sns::parse_meters_to_cm(s);
    if (!cm) {
        std::fprintf(stderr, "error: bad %s '%s' (meters, max 2 decimals)\n", what, s.c_str());
        std::exit(2);
    }
    return *cm;
}

sns::QueryGeometry geometry_or_die(const GeometryArgs& args) {
    const bool has_circle = !args.x.empty() || !args.y.empty() || !args.radius.empty();
    const bool has_rect = !args.rect.empty();
    const bool has_intervals = !args.intervals.empty();
    if (has_circle + has_rect + has_intervals != 1) {
        std::fprintf(stderr,
                     "error: give exactly one of --x/--y/--radius, --rect, --intervals\n");
        std::exit(2);
    }
    if (has_circle) {
        if (args.x.empty() || args.y.empty() || args.radius.empty()) {
            std::fprintf(stderr, "error: circle needs --x, --y and --radius\n");
            std::exit(2);
        }
        return sns::Circle{meters_or_die(args.x, "x"), meters_or_die(args.y, "y"),
                           meters_or_die(args.radius, "radius")};
    }
    if (has_rect) {
        return sns::Rect{meters_or_die(args.rect[0], "rect x0"),
                         meters_or_die(args.rect[1], "rect y0"),
                         meters_or_die(args.rect[2], "rect x1"),
                         meters_or_die(args.rect[3], "rect y1")};
    }
    std::vector<sns::Interval> ivs;
    std::size_t start = 0;
    const std::string& spec = args.intervals;
    for (std::size_t i = 0; i <= spec.size(); ++i) {
        if (i == spec.size() || spec[i] == ',') {
            const std::string tok = spec.substr(start, i - start);
            start = i + 1;
            if (tok.empty())
                continue;
            const auto dash = tok.find('-');
            try {
                if (dash == std::string::npos) {
                    const auto v = static_cast<std::uint32_t>(std::stoul(tok));
                    ivs.push_back({v, v});
                } else {
                    ivs.push_back({static_cast<std::uint32_t>(std::stoul(tok.substr(0, dash))),
                                   static_cast<std::uint32_t>(std::stoul(tok.substr(dash + 1)))});
                }
            } catch (const std::exception&) {
                std::fprintf(stderr, "error: bad interval '%s'\n", tok.c_str());
                std::exit(2);
            }
        }
    }
    try {
        return sns::IntervalSet::normalized(std::move(ivs));
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        std::exit(2);
    }
}

json result_to_json(const sns::ResponseResult& r) {
    json matched = json::array();
    for (const sns::Interval& iv : r.matched)
        matched.push_back({{"low", iv.low}, {"high", iv.high}});
    json j = {{"device_id", sns::device_id_to_hex(r.device_id)},
              {"address", r.address.endpoint()},
              {"matched", matched}};
    if (!r.address.label.empty())
        j["label"] = r.address.label;
    return j;
}

void print_result_text(const sns::ResponseResult& r) {
    std::string intervals;
    for (const sns::Interval& iv : r.matched) {
        if (!intervals.empty())
            intervals += ",";
        intervals += std::to_string(iv.low);
        if (iv.high != iv.low)
            intervals += "-" + std::to_string(iv.high);
    }
    std::printf("%s %s %s%s%s\n", sns::device_id_to_hex(r.device_id).c_str(),
                r.address.endpoint().c_str(), intervals.c_str(),
                r.address.label.empty() ? "" : " ", r.address.label.c_str());
}

int report_query(const sns::Client::QueryOutcome& out, bool json_mode) {
    switch (out.status) {
    case sns::Client::Status::ok:
        if (json_mode) {
            for (const auto& r : out.results)
                std::printf("%s\n", result_to_json(r).dump().c_str());
        } else {
            for (const auto& r : out.results)
                print_result_text(r);
        }
        return 0;
    case sns::Client::Status::too_many:
        if (json_mode)
            std::printf("%s\n",
                        json{{"error", "too_many_results"}, {"count", out.total_found}}
                            .dump()
                            .c_str());
        else
            std::fprintf(stderr, "too many results (%u); query a more precise area\n",
                         out.total_found);
        return 3;
    case sns::Client::Status::transport_error:
        std::fprintf(stderr, "transport error: %s\n", out.transport_detail.c_str());
        return 1;
    default:
        if (out.error)
            std::fprintf(stderr, "server error: %s %s\n",
                         sns::error_code_name(out.error->code), out.error->detail.c_str());
        return 2;
    }
}

int report_announce(const sns::Client::AnnounceOutcome& out, bool json_mode,
                    const char* verb) {
    switch (out.status) {
    case sns::Client::Status::ok:
        if (json_mode)
            std::printf("%s\n", json{{"status", verb}}.dump().c_str());
        else
            std::printf("%s\n", verb);
        return 0;
    case sns::Client::Status::stale:
        if (json_mode)
            std::printf("%s\n",
                        json{{"error", "stale_version"},
                             {"current_version", out.current_version}}
                            .dump()
                            .c_str());
        else
            std::fprintf(stderr, "stale version; server is at %llu\n",
                         (unsigned long long)out.current_version);
        return 2;
    case sns::Client::Status::transport_error:
        std::fprintf(stderr, "transport error: %s\n", out.transport_detail.c_str());
        return 1;
    default:
        if (out.error)
            std::fprintf(stderr, "server error: %s %s\n",
                         sns::error_code_name(out.error->code), out.error->detail.c_str());
        return 2;
    }
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"SNS client"};
    app.require_subcommand(1);

    sns::ClientConfig cfg;
    bool json_mode = false;
    bool force_tcp = false;
    std::string auth;
    app.add_option("--server", cfg.host, "server address")->capture_default_str();
    app.add_option("--port", cfg.port, "server port")->capture_default_str();
    app.add_option("--cell", cfg.cell_id, "cell id")->capture_default_str();
    app.add_option("--timeout-ms", cfg.timeout_ms, "per-attempt timeout")
        ->capture_default_str();
    app.add_option("--retries", cfg.retries, "UDP retransmits")->capture_default_str();
    app.add_option("--auth", auth, "auth token (16..64 bytes)");
    app.add_flag("--tcp", force_tcp, "use TCP only");
    app.add_flag("--json", json_mode, "JSON-lines output");

    GeometryArgs geom;
    std::uint16_t max_results = 0;
    auto* query = app.add_subcommand("query", "resolve a location to addresses");
    add_geometry_options(query, geom);
    query->add_option("--max", max_results, "result limit (0 = server default)");

    std::string device_hex, endpoint;
    std::uint64_t version = 0;
    auto* announce = app.add_subcommand("announce", "register or move a device");
    add_geometry_options(announce, geom);
    announce->add_option("--device", device_hex, "device id, 32 hex digits")->required();
    announce->add_option("--endpoint", endpoint, "device ip:port")->required();
    announce->add_option("--version", version, "monotonic update version")->required();

    auto* dereg = app.add_subcommand("deregister", "remove a device");
    dereg->add_option("--device", device_hex, "device id, 32 hex digits")->required();

    std::uint32_t interval_ms = 1000;
    auto* watch = app.add_subcommand("watch", "poll a query and print each result set");
    add_geometry_options(watch, geom);
    watch->add_option("--interval-ms", interval_ms, "poll interval")->capture_default_str();
    watch->add_option("--max", max_results, "result limit (0 = server default)");

    CLI11_PARSE(app, argc, argv);

    if (force_tcp)
        cfg.transport = sns::ClientConfig::TransportPref::tcp;
    if (!auth.empty())
        cfg.auth.assign(auth.begin(), auth.end());

    try {
        sns::Client client(cfg);

        if (query->parsed())
            return report_query(client.query(geometry_or_die(geom), max_results), json_mode);

        if (announce->parsed() || dereg->parsed()) {
            const auto id = sns::device_id_from_hex(device_hex);
            if (!id) {
                std::fprintf(stderr, "error: device id must be 32 hex digits\n");
                return 2;
            }
            if (dereg->parsed())
                return report_announce(client.deregister(*id), json_mode, "deregistered");
            const auto address = sns::NetworkAddress::parse_endpoint(endpoint);
            if (!address) {
                std::fprintf(stderr, "error: bad endpoint '%s'\n", endpoint.c_str());
                return 2;
            }
            return report_announce(
                client.announce(*id, *address, geometry_or_die(geom), version), json_mode,
                "acknowledged");
        }

        // watch: poll until interrupted
        std::signal(SIGINT, [](int) { g_interrupted = 1; });
        const sns::QueryGeometry g = geometry_or_die(geom);
        int last_rc = 0;
        while (!g_interrupted) {
            last_rc = report_query(client.query(g, max_results), json_mode);
            if (last_rc == 1)
                return 1; // transport errors stop the loop
            std::fflush(stdout);
            std::this_thread::sleep_for(std::chrono::milliseconds(interval_ms));
        }
        return last_rc;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
}
