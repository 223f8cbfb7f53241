#include <doctest.h>

#include <unistd.h>

#include <atomic>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>
#include <thread>

#include "sns/registry.hpp"
#include "support/oracles.hpp"

using namespace sns;

namespace {

GridConfig grid(std::uint32_t order = 4, std::int64_t cell = 100) {
    return GridConfig{order, cell, 0, 0, 2};
}

DeviceId dev(std::uint32_t n) {
    DeviceId id{};
    id[14] = static_cast<std::uint8_t>(n >> 8);
    id[15] = static_cast<std::uint8_t>(n);
    return id;
}

NetworkAddress addr(std::uint8_t n) {
    NetworkAddress a;
    a.family = NetworkAddress::Family::v4;
    a.bytes = {192, 0, 2, n};
    a.port = 9000;
    return a;
}

Rect cell_rect(const GridConfig& cfg, std::uint32_t x, std::uint32_t y) {
    const std::int64_t cx = cfg.origin_x_cm + x * cfg.cell_size_cm;
    const std::int64_t cy = cfg.origin_y_cm + y * cfg.cell_size_cm;
    return Rect{cx + 10, cy + 10, cx + cfg.cell_size_cm - 10, cy + cfg.cell_size_cm - 10};
}

std::string temp_path(const char* tag) {
    return (std::filesystem::temp_directory_path() /
            (std::string("sns_test_") + tag + "_" + std::to_string(::getpid()) + ".snap"))
        .string();
}

} // namespace

TEST_CASE("first registration lands in the tree") {
    Registry reg(grid(), 1);
    const auto outcome = reg.register_or_update(dev(1), addr(1), cell_rect(grid(), 0, 0), 0);
    CHECK(outcome.status == Registry::UpdateOutcome::Status::applied);
    const auto area = reg.lookup(dev(1));
    REQUIRE(area.has_value());
    const HilbertIndex idx = coord_to_index(grid(), {0, 0});
    CHECK(area->intervals == IntervalSet::normalized({{idx, idx}}));
    CHECK(area->version == 0);

    const auto res = reg.resolve(cell_rect(grid(), 0, 0));
    REQUIRE(res.results.size() == 1);
    CHECK(res.results[0].device_id == dev(1));
    CHECK(res.results[0].address == addr(1));
}

TEST_CASE("moving a device swaps its area atomically") {
    const GridConfig cfg = grid();
    Registry reg(cfg, 1);
    reg.register_or_update(dev(1), addr(1), cell_rect(cfg, 0, 0), 1);
    const auto moved = reg.register_or_update(dev(1), addr(1), cell_rect(cfg, 9, 9), 2);
    CHECK(moved.status == Registry::UpdateOutcome::Status::applied);

    CHECK(reg.resolve(cell_rect(cfg, 0, 0)).results.empty());
    REQUIRE(reg.resolve(cell_rect(cfg, 9, 9)).results.size() == 1);
    CHECK(reg.device_count() == 1);
}

TEST_CASE("stale versions are rejected with the current version") {
    Registry reg(grid(), 1);
    reg.register_or_update(dev(1), addr(1), cell_rect(grid(), 0, 0), 5);
    const auto stale = reg.register_or_update(dev(1), addr(2), cell_rect(grid(), 3, 3), 5);
    CHECK(stale.status == Registry::UpdateOutcome::Status::stale);
    CHECK(stale.current_version == 5);
    // state unchanged: still at the original cell with the original address
    const auto res = reg.resolve(cell_rect(grid(), 0, 0));
    REQUIRE(res.results.size() == 1);
    CHECK(res.results[0].address == addr(1));
}

TEST_CASE("re-sending the same update is idempotent") {
    Registry reg(grid(), 1);
    reg.register_or_update(dev(1), addr(1), cell_rect(grid(), 2, 2), 3);
    const auto before = reg.lookup(dev(1));
    const auto replay = reg.register_or_update(dev(1), addr(1), cell_rect(grid(), 2, 2), 3);
    CHECK(replay.status == Registry::UpdateOutcome::Status::stale);
    const auto after = reg.lookup(dev(1));
    REQUIRE(before.has_value());
    REQUIRE(after.has_value());
    CHECK(before->version == after->version);
    CHECK(before->intervals == after->intervals);
    CHECK(before->updated_at_ms == after->updated_at_ms);
}

TEST_CASE("deregister") {
    Registry reg(grid(), 1);
    reg.register_or_update(dev(1), addr(1), cell_rect(grid(), 0, 0), 0);
    CHECK(reg.deregister(dev(1)));
    CHECK(reg.device_count() == 0);
    CHECK(reg.interval_count() == 0);
    CHECK(reg.resolve(cell_rect(grid(), 0, 0)).results.empty());
    CHECK_FALSE(reg.deregister(dev(1))); // unknown device is a no-op
}

TEST_CASE("invalid geometry is rejected") {
    Registry reg(grid(), 1);
    CHECK_THROWS_AS(reg.register_or_update(dev(1), addr(1), Circle{100, 100, 0}, 0),
                    std::invalid_argument);
    // off-grid area covers no cell
    CHECK_THROWS_AS(reg.register_or_update(dev(1), addr(1), Circle{-99'999, -99'999, 10}, 0),
                    std::invalid_argument);
    NetworkAddress bad = addr(1);
    bad.port = 0;
    CHECK_THROWS_AS(reg.register_or_update(dev(1), bad, cell_rect(grid(), 0, 0), 0),
                    std::invalid_argument);
}

TEST_CASE("overlapping address areas are both stored and both returned") {
    const GridConfig cfg = grid();
    Registry reg(cfg, 1);
    reg.register_or_update(dev(1), addr(1), Circle{200, 200, 150}, 0);
    reg.register_or_update(dev(2), addr(2), Circle{250, 250, 150}, 0);
    const auto res = reg.resolve(Rect{190, 190, 260, 260});
    REQUIRE(res.results.size() == 2);
    CHECK(res.results[0].device_id == dev(1));
    CHECK(res.results[1].device_id == dev(2));
}

TEST_CASE("a venue full of devices trips the result limit") {
    const GridConfig cfg = grid(5); // 32x32 = 1024 cells
    Registry reg(cfg, 1, 32);
    for (std::uint32_t i = 0; i < 1000; ++i)
        reg.register_or_update(dev(i), addr(static_cast<std::uint8_t>(i)),
                               cell_rect(cfg, i % 32, i / 32), 0);

    const std::int64_t span = cfg.side() * cfg.cell_size_cm;
    const auto res = reg.resolve(Rect{0, 0, span, span});
    CHECK(res.too_many);
    CHECK(res.total_found == 1000);
    CHECK(res.results.empty());

    const auto ok = reg.resolve(Rect{0, 0, span, span}, 1000);
    CHECK_FALSE(ok.too_many);
    CHECK(ok.results.size() == 1000);

    // a precise query still answers
    const auto narrow = reg.resolve(cell_rect(cfg, 3, 3));
    CHECK_FALSE(narrow.too_many);
    CHECK(narrow.results.size() == 1);
}

TEST_CASE("resolve equals the geometric brute force") {
    std::mt19937_64 rng(404);
    const GridConfig cfg = grid(5, 50); // 32x32 cells of 50 cm
    Registry reg(cfg, 1, 1000);

    struct Placed {
        DeviceId id;
        QueryGeometry geom;
    };
    std::vector<Placed> placed;
    const std::int64_t span = cfg.side() * cfg.cell_size_cm;
    for (std::uint8_t i = 0; i < 60; ++i) {
        QueryGeometry g;
        if (rng() % 2 == 0) {
            g = Circle{static_cast<std::int64_t>(rng() % span),
                       static_cast<std::int64_t>(rng() % span),
                       25 + static_cast<std::int64_t>(rng() % 300)};
        } else {
            const std::int64_t x0 = static_cast<std::int64_t>(rng() % span);
            const std::int64_t y0 = static_cast<std::int64_t>(rng() % span);
            g = Rect{x0, y0, x0 + 30 + static_cast<std::int64_t>(rng() % 400),
                     y0 + 30 + static_cast<std::int64_t>(rng() % 400)};
        }
        if (test::scan_cells(cfg, g).empty())
            continue;
        reg.register_or_update(dev(i), addr(i), g, 0);
        placed.push_back({dev(i), g});
    }

    for (int q = 0; q < 50; ++q) {
        const std::int64_t x0 = static_cast<std::int64_t>(rng() % span) - 100;
        const std::int64_t y0 = static_cast<std::int64_t>(rng() % span) - 100;
        const QueryGeometry query =
            Rect{x0, y0, x0 + 50 + static_cast<std::int64_t>(rng() % 600),
                 y0 + 50 + static_cast<std::int64_t>(rng() % 600)};

        const auto query_cells = test::scan_cells(cfg, query);
        std::vector<DeviceId> expect;
        for (const auto& p : placed) {
            const auto cells = test::scan_cells(cfg, p.geom);
            const bool hits = std::find_first_of(query_cells.begin(), query_cells.end(),
                                                 cells.begin(), cells.end()) !=
                              query_cells.end();
            if (hits)
                expect.push_back(p.id);
        }
        std::sort(expect.begin(), expect.end());

        const auto res = reg.resolve(query);
        REQUIRE(res.results.size() == expect.size());
        for (std::size_t i = 0; i < expect.size(); ++i)
            CHECK(res.results[i].device_id == expect[i]);
    }
}

TEST_CASE("random move workloads equal a rebuild-from-latest replay") {
    std::mt19937_64 rng(777);
    const GridConfig cfg = grid(4);
    Registry reg(cfg, 1, 1000);

    struct Latest {
        NetworkAddress address;
        QueryGeometry geom;
        std::uint64_t version;
        bool removed;
    };
    std::map<std::uint8_t, Latest> latest;
    std::map<std::uint8_t, std::uint64_t> version_counter;

    for (int op = 0; op < 1000; ++op) {
        const auto who = static_cast<std::uint8_t>(rng() % 20);
        if (rng() % 10 == 0) {
            const bool known = reg.deregister(dev(who));
            if (latest.count(who) && !latest[who].removed) {
                CHECK(known);
                latest[who].removed = true;
            } else {
                CHECK_FALSE(known);
            }
            continue;
        }
        const QueryGeometry g = cell_rect(cfg, static_cast<std::uint32_t>(rng() % 16),
                                          static_cast<std::uint32_t>(rng() % 16));
        std::uint64_t v;
        const bool fresh = !latest.count(who) || latest[who].removed;
        if (fresh) {
            // deregistration clears version history; any version re-registers
            v = version_counter[who] = rng() % 3;
        } else {
            v = ++version_counter[who];
        }
        const auto outcome = reg.register_or_update(dev(who), addr(who), g, v);
        CHECK(outcome.status == Registry::UpdateOutcome::Status::applied);
        latest[who] = Latest{addr(who), g, v, false};
    }

    Registry replay(cfg, 1, 1000);
    for (const auto& [who, l] : latest) {
        if (!l.removed)
            replay.register_or_update(dev(who), l.address, l.geom, l.version);
    }

    CHECK(reg.device_count() == replay.device_count());
    for (int q = 0; q < 100; ++q) {
        const QueryGeometry query = cell_rect(cfg, static_cast<std::uint32_t>(rng() % 16),
                                              static_cast<std::uint32_t>(rng() % 16));
        const auto a = reg.resolve(query);
        const auto b = replay.resolve(query);
        REQUIRE(a.results.size() == b.results.size());
        for (std::size_t i = 0; i < a.results.size(); ++i) {
            CHECK(a.results[i].device_id == b.results[i].device_id);
            CHECK(a.results[i].matched == b.results[i].matched);
        }
    }
}

TEST_CASE("snapshot round-trips") {
    const std::string path = temp_path("roundtrip");
    const GridConfig cfg = grid(5);
    std::mt19937_64 rng(11);

    Registry reg(cfg, 42, 64);
    SUBCASE("empty registry") {
        reg.snapshot(path);
        Registry back(cfg, 42, 64);
        back.restore(path);
        CHECK(back.device_count() == 0);
    }

    SUBCASE("populated registry answers 100 random queries identically") {
        const std::int64_t span = cfg.side() * cfg.cell_size_cm;
        for (std::uint8_t i = 0; i < 50; ++i) {
            NetworkAddress a = addr(i);
            if (i % 3 == 0)
                a.label = "device-" + std::to_string(i);
            reg.register_or_update(dev(i), a,
                                   Circle{static_cast<std::int64_t>(rng() % span),
                                          static_cast<std::int64_t>(rng() % span),
                                          50 + static_cast<std::int64_t>(rng() % 500)},
                                   i);
        }
        reg.snapshot(path);

        Registry back(cfg, 42, 64);
        back.restore(path);
        CHECK(back.device_count() == reg.device_count());
        CHECK(back.interval_count() == reg.interval_count());
        for (int q = 0; q < 100; ++q) {
            const std::int64_t x = static_cast<std::int64_t>(rng() % span);
            const std::int64_t y = static_cast<std::int64_t>(rng() % span);
            const QueryGeometry query = Circle{x, y, 100 + static_cast<std::int64_t>(rng() % 400)};
            const auto a = reg.resolve(query);
            const auto b = back.resolve(query);
            REQUIRE(a.results.size() == b.results.size());
            REQUIRE(a.too_many == b.too_many);
            for (std::size_t i = 0; i < a.results.size(); ++i) {
                CHECK(a.results[i].device_id == b.results[i].device_id);
                CHECK(a.results[i].address == b.results[i].address);
                CHECK(a.results[i].matched == b.results[i].matched);
            }
        }

        // versions and timestamps survive exactly
        const auto orig = reg.lookup(dev(9));
        const auto restored = back.lookup(dev(9));
        REQUIRE(orig.has_value());
        REQUIRE(restored.has_value());
        CHECK(orig->version == restored->version);
        CHECK(orig->updated_at_ms == restored->updated_at_ms);
    }

    std::filesystem::remove(path);
}

TEST_CASE("corrupt snapshots are refused") {
    const std::string path = temp_path("corrupt");
    const GridConfig cfg = grid();
    Registry reg(cfg, 1);
    reg.register_or_update(dev(1), addr(1), cell_rect(cfg, 1, 1), 0);
    reg.snapshot(path);

    // flip one byte in the middle
    {
        std::fstream f(path, std::ios::binary | std::ios::in | std::ios::out);
        f.seekp(20);
        char c;
        f.seekg(20);
        f.get(c);
        f.seekp(20);
        f.put(static_cast<char>(c ^ 0x40));
    }
    Registry back(cfg, 1);
    CHECK_THROWS_WITH_AS(back.restore(path), doctest::Contains("checksum"), SnapshotError);

    // a snapshot for a different grid or cell is refused too
    reg.snapshot(path);
    Registry other_cell(cfg, 2);
    CHECK_THROWS_AS(other_cell.restore(path), SnapshotError);
    Registry other_grid(grid(5), 1);
    CHECK_THROWS_AS(other_grid.restore(path), SnapshotError);
    CHECK_THROWS_AS(back.restore(path + ".missing"), SnapshotError);

    std::filesystem::remove(path);
}

TEST_CASE("queries see whole updates, never halves") {
    const GridConfig cfg = grid(4);
    Registry reg(cfg, 1);
    const HilbertIndex idx_here = coord_to_index(cfg, {0, 0});
    const HilbertIndex idx_there = coord_to_index(cfg, {15, 15});
    reg.register_or_update(dev(1), addr(1), cell_rect(cfg, 0, 0), 0);

    // one resolve sees one consistent state: the device sits in exactly one
    // of the two cells, never both and never neither
    const QueryGeometry both =
        IntervalSet::normalized({{idx_here, idx_here}, {idx_there, idx_there}});
    const IntervalSet at_old = IntervalSet::normalized({{idx_here, idx_here}});
    const IntervalSet at_new = IntervalSet::normalized({{idx_there, idx_there}});

    std::atomic<bool> done{false};
    std::atomic<int> violations{0};
    std::vector<std::thread> readers;
    for (int r = 0; r < 4; ++r) {
        readers.emplace_back([&] {
            while (!done.load()) {
                const auto res = reg.resolve(both);
                if (res.results.size() != 1) {
                    violations.fetch_add(1);
                    continue;
                }
                const IntervalSet& matched = res.results[0].matched;
                if (matched != at_old && matched != at_new)
                    violations.fetch_add(1);
            }
        });
    }

    std::uint64_t version = 1;
    for (int i = 0; i < 400; ++i)
        reg.register_or_update(dev(1), addr(1),
                               i % 2 == 0 ? cell_rect(cfg, 15, 15) : cell_rect(cfg, 0, 0),
                               version++);
    done = true;
    for (auto& t : readers)
        t.join();
    CHECK(violations.load() == 0);

    // freshness: the final update is immediately visible
    CHECK(reg.resolve(cell_rect(cfg, 0, 0)).results.size() == 1);
}
