// sns-server: the SNS daemon. Configuration comes from a key = value file
// (--config), SNS_* environment variables, and command-line flags, in
// ascending precedence. SIGTERM/SIGINT shut down gracefully, writing a final
// snapshot when one is configured.

#include <CLI11.hpp>

#include <csignal>
#include <cstdio>
#include <string>

#include "sns/log.hpp"
#include "sns/server.hpp"

namespace {

volatile std::sig_atomic_t g_shutdown = 0;

void on_signal(int) {
    g_shutdown = 1;
}

} // namespace

int main(int argc, char** argv) {
    std::string config_path;
    {
        // pre-scan for --config so file values become the flag defaults
        CLI::App pre;
        pre.allow_extras();
        pre.set_help_flag();
        pre.add_option("--config", config_path);
        try {
            pre.parse(argc, argv);
        } catch (const CLI::ParseError&) {
        }
    }

    sns::ServerConfig cfg;
    try {
        if (!config_path.empty())
            cfg = sns::ServerConfig::from_file(config_path);
        cfg.apply_env();
    } catch (const sns::ConfigError& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return 1;
    }

    CLI::App app{"Spatial Name System server"};
    std::string ignored_config;
    std::string prefixes;
    app.add_option("--config", ignored_config, "config file (key = value lines)");
    app.add_option("--bind", cfg.bind_address, "bind address")->capture_default_str();
    app.add_option("--port", cfg.port, "UDP and TCP port")->capture_default_str();
    app.add_option("--cell", cfg.cell_id, "cell id served by this instance")
        ->capture_default_str();
    app.add_option("--grid-order", cfg.grid_order, "Hilbert curve order (1..16)")
        ->capture_default_str();
    app.add_option("--cell-size-cm", cfg.cell_size_cm, "grid cell edge in cm")
        ->capture_default_str();
    app.add_option("--origin-x-cm", cfg.origin_x_cm, "grid origin x in cm")
        ->capture_default_str();
    app.add_option("--origin-y-cm", cfg.origin_y_cm, "grid origin y in cm")
        ->capture_default_str();
    app.add_option("--max-results", cfg.max_results, "result limit per query")
        ->capture_default_str();
    app.add_option("--auth-token", cfg.auth_token, "require this token from untrusted peers");
    app.add_option("--trusted-prefixes", prefixes,
                   "comma-separated CIDR prefixes that bypass auth");
    app.add_option("--survey", cfg.survey_file, "survey file of immobile devices");
    app.add_option("--snapshot", cfg.snapshot_file, "snapshot file path");
    app.add_option("--snapshot-interval-s", cfg.snapshot_interval_s,
                   "seconds between periodic snapshots")
        ->capture_default_str();
    app.add_option("--log-level", cfg.log_level, "error, info or debug")
        ->capture_default_str();
    app.add_option("--workers", cfg.workers, "request worker threads")->capture_default_str();
    CLI11_PARSE(app, argc, argv);

    if (!prefixes.empty()) {
        try {
            cfg.set("trusted_prefixes", prefixes);
        } catch (const sns::ConfigError& e) {
            std::fprintf(stderr, "config error: %s\n", e.what());
            return 1;
        }
    }

    try {
        sns::Server server(cfg);
        server.start();

        std::signal(SIGTERM, on_signal);
        std::signal(SIGINT, on_signal);
        sigset_t mask;
        sigemptyset(&mask);
        while (!g_shutdown)
            sigsuspend(&mask);

        sns::log_info("signal received, shutting down");
        server.stop();
        return 0;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "fatal: %s\n", e.what());
        return 1;
    }
}
