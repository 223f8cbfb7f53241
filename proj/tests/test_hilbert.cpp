#include <doctest.h>

#include <cmath>
#include <random>

#include "sns/hilbert.hpp"
#include "support/oracles.hpp"

using namespace sns;

namespace {

GridConfig grid(std::uint32_t order, std::int64_t cell = 100, std::int64_t ox = 0,
                std::int64_t oy = 0) {
    return GridConfig{order, cell, ox, oy, 2};
}

} // namespace

TEST_CASE("order-1 orientation: first step along +y, curve ends bottom-right") {
    const GridConfig cfg = grid(1);
    CHECK(index_to_coord(cfg, 0) == GridCoord{0, 0});
    CHECK(index_to_coord(cfg, 1) == GridCoord{0, 1});
    CHECK(index_to_coord(cfg, 2) == GridCoord{1, 1});
    CHECK(index_to_coord(cfg, 3) == GridCoord{1, 0});
    CHECK(coord_to_index(cfg, {0, 0}) == 0);
    CHECK(coord_to_index(cfg, {0, 1}) == 1);
}

TEST_CASE("matches the recursive construction exactly for orders 1..6") {
    for (int order = 1; order <= 6; ++order) {
        const GridConfig cfg = grid(static_cast<std::uint32_t>(order));
        const auto expected = test::recursive_hilbert(order);
        REQUIRE(expected.size() == cfg.cell_count());
        for (std::uint32_t i = 0; i < expected.size(); ++i) {
            const GridCoord c = index_to_coord(cfg, i);
            CHECK(c.x == expected[i].first);
            CHECK(c.y == expected[i].second);
            CHECK(coord_to_index(cfg, c) == i);
        }
    }
}

TEST_CASE("consecutive indices are 4-neighbors for orders 1..6") {
    for (int order = 1; order <= 6; ++order) {
        const GridConfig cfg = grid(static_cast<std::uint32_t>(order));
        GridCoord prev = index_to_coord(cfg, 0);
        for (std::uint32_t i = 1; i < cfg.cell_count(); ++i) {
            const GridCoord cur = index_to_coord(cfg, i);
            const auto dx = cur.x > prev.x ? cur.x - prev.x : prev.x - cur.x;
            const auto dy = cur.y > prev.y ? cur.y - prev.y : prev.y - cur.y;
            CHECK(dx + dy == 1);
            prev = cur;
        }
    }
}

TEST_CASE("sampled bijectivity and adjacency for orders 7..16") {
    std::mt19937_64 rng(7);
    for (std::uint32_t order = 7; order <= 16; ++order) {
        const GridConfig cfg = grid(order);
        const std::uint64_t count = cfg.cell_count();
        std::uniform_int_distribution<std::uint64_t> dist(0, count - 2);
        for (int i = 0; i < 2000; ++i) {
            const auto idx = static_cast<HilbertIndex>(dist(rng));
            const GridCoord c = index_to_coord(cfg, idx);
            CHECK(coord_to_index(cfg, c) == idx);
            const GridCoord next = index_to_coord(cfg, idx + 1);
            const auto dx = next.x > c.x ? next.x - c.x : c.x - next.x;
            const auto dy = next.y > c.y ? next.y - c.y : c.y - next.y;
            CHECK(dx + dy == 1);
        }
    }
}

TEST_CASE("the first quarter of the curve fills exactly one quadrant") {
    for (std::uint32_t order = 2; order <= 6; ++order) {
        const GridConfig cfg = grid(order);
        const std::uint32_t half = cfg.side() / 2;
        const std::uint64_t quarter = cfg.cell_count() / 4;
        for (std::uint64_t i = 0; i < quarter; ++i) {
            const GridCoord c = index_to_coord(cfg, static_cast<HilbertIndex>(i));
            CHECK(c.x < half);
            CHECK(c.y < half);
        }
    }
}

TEST_CASE("out-of-range arguments are rejected") {
    const GridConfig cfg = grid(3);
    CHECK_THROWS_AS(coord_to_index(cfg, {8, 0}), std::out_of_range);
    CHECK_THROWS_AS(coord_to_index(cfg, {0, 8}), std::out_of_range);
    CHECK_THROWS_AS(index_to_coord(cfg, 64), std::out_of_range);
    CHECK_THROWS_AS(grid(0).validate(), std::invalid_argument);
    CHECK_THROWS_AS(grid(17).validate(), std::invalid_argument);
    CHECK_THROWS_AS(grid(3, 0).validate(), std::invalid_argument);
}

TEST_CASE("whole-grid rect decomposes to a single interval") {
    for (std::uint32_t order : {1u, 3u, 6u, 10u}) {
        const GridConfig cfg = grid(order, 50, -1000, 2000);
        const std::int64_t span = static_cast<std::int64_t>(cfg.side()) * cfg.cell_size_cm;
        const Rect whole{cfg.origin_x_cm, cfg.origin_y_cm, cfg.origin_x_cm + span,
                         cfg.origin_y_cm + span};
        const IntervalSet set = geometry_to_intervals(cfg, whole);
        REQUIRE(set.size() == 1);
        CHECK(set.intervals()[0].low == 0);
        CHECK(set.intervals()[0].high == cfg.cell_count() - 1);
    }
}

TEST_CASE("a rect strictly inside one cell yields that cell's index") {
    const GridConfig cfg = grid(4, 100, 500, -300);
    for (auto [x, y] : {std::pair<std::uint32_t, std::uint32_t>{0, 0}, {5, 9}, {15, 15}}) {
        const std::int64_t cx = cfg.origin_x_cm + x * cfg.cell_size_cm;
        const std::int64_t cy = cfg.origin_y_cm + y * cfg.cell_size_cm;
        const Rect inner{cx + 10, cy + 10, cx + 90, cy + 90};
        const IntervalSet set = geometry_to_intervals(cfg, inner);
        const HilbertIndex want = coord_to_index(cfg, {x, y});
        REQUIRE(set.size() == 1);
        CHECK(set.intervals()[0] == Interval{want, want});
    }
}

TEST_CASE("off-grid geometry clips to the empty set") {
    const GridConfig cfg = grid(3);
    CHECK(geometry_to_intervals(cfg, Rect{-500, -500, -100, -100}).empty());
    CHECK(geometry_to_intervals(cfg, Circle{-10'000, -10'000, 50}).empty());
    CHECK(geometry_to_intervals(cfg, Circle{100'000, 100'000, 500}).empty());
}

TEST_CASE("degenerate geometry is an error, not an empty result") {
    const GridConfig cfg = grid(3);
    CHECK_THROWS_AS(geometry_to_intervals(cfg, Circle{100, 100, 0}), std::invalid_argument);
    CHECK_THROWS_AS(geometry_to_intervals(cfg, Circle{100, 100, -5}), std::invalid_argument);
    CHECK_THROWS_AS(geometry_to_intervals(cfg, Rect{100, 100, 100, 400}), std::invalid_argument);
    CHECK_THROWS_AS(geometry_to_intervals(cfg, Rect{100, 400, 300, 200}), std::invalid_argument);
}

TEST_CASE("raw interval sets validate and normalize") {
    const GridConfig cfg = grid(3); // indices 0..63
    const IntervalSet raw = IntervalSet::normalized({{5, 9}, {10, 12}, {20, 20}});
    const IntervalSet out = geometry_to_intervals(cfg, raw);
    REQUIRE(out.size() == 2);
    CHECK(out.intervals()[0] == Interval{5, 12});
    CHECK(out.intervals()[1] == Interval{20, 20});

    CHECK_THROWS_AS(geometry_to_intervals(cfg, IntervalSet::normalized({{60, 64}})),
                    std::invalid_argument);
}

TEST_CASE("decomposition equals the exhaustive cell scan") {
    std::mt19937_64 rng(0x5eed);
    for (int round = 0; round < 300; ++round) {
        const std::uint32_t order = 1 + static_cast<std::uint32_t>(rng() % 6);
        const std::int64_t cell = 1 + static_cast<std::int64_t>(rng() % 400);
        const std::int64_t ox = static_cast<std::int64_t>(rng() % 2001) - 1000;
        const std::int64_t oy = static_cast<std::int64_t>(rng() % 2001) - 1000;
        const GridConfig cfg = grid(order, cell, ox, oy);
        const std::int64_t span = static_cast<std::int64_t>(cfg.side()) * cell;

        QueryGeometry g;
        if (rng() % 2 == 0) {
            const std::int64_t cx = ox + static_cast<std::int64_t>(rng() % (2 * span)) - span / 2;
            const std::int64_t cy = oy + static_cast<std::int64_t>(rng() % (2 * span)) - span / 2;
            const std::int64_t r = 1 + static_cast<std::int64_t>(rng() % span);
            g = Circle{cx, cy, r};
        } else {
            std::int64_t x0 = ox + static_cast<std::int64_t>(rng() % (2 * span)) - span / 2;
            std::int64_t y0 = oy + static_cast<std::int64_t>(rng() % (2 * span)) - span / 2;
            const std::int64_t w = 1 + static_cast<std::int64_t>(rng() % span);
            const std::int64_t h = 1 + static_cast<std::int64_t>(rng() % span);
            g = Rect{x0, y0, x0 + w, y0 + h};
        }

        const IntervalSet got = geometry_to_intervals(cfg, g);
        const IntervalSet want = test::indices_to_intervals(test::scan_cells(cfg, g));
        CAPTURE(order);
        CAPTURE(round);
        CHECK(got == want);

        // minimality: sorted, disjoint, never adjacent
        for (std::size_t i = 1; i < got.size(); ++i)
            CHECK(std::uint64_t{got.intervals()[i - 1].high} + 1 <
                  std::uint64_t{got.intervals()[i].low});
    }
}

TEST_CASE("circle decompositions beat the progressive scan in aggregate") {
    const GridConfig cfg = grid(3, 100, 0, 0);

    // figure-scale exemplar: one long run plus two short intervals, fewer
    // pieces than the four the row-by-row scan needs
    const Circle exemplar{300, 300, 100};
    const IntervalSet hilbert = geometry_to_intervals(cfg, exemplar);
    REQUIRE(hilbert.size() == 3);
    CHECK(hilbert.intervals()[0] == Interval{6, 13});
    CHECK(hilbert.intervals()[1] == Interval{30, 31});
    CHECK(hilbert.intervals()[2] == Interval{53, 54});

    std::vector<std::uint32_t> scan_indices;
    for (std::uint32_t y = 0; y < 8; ++y)
        for (std::uint32_t x = 0; x < 8; ++x)
            if (test::cell_intersects(cfg, x, y, QueryGeometry{exemplar}))
                scan_indices.push_back(x + y * 8);
    std::sort(scan_indices.begin(), scan_indices.end());
    CHECK(test::run_count(scan_indices) == 4);

    // aggregate over the circle class: Hilbert never needs more pieces in
    // total (it can lose on individual shapes that straddle a curve U-turn)
    std::mt19937_64 rng(99);
    std::uint64_t hilbert_total = 0, scan_total = 0;
    for (int i = 0; i < 1000; ++i) {
        const std::int64_t cx = static_cast<std::int64_t>(rng() % 1000) - 100;
        const std::int64_t cy = static_cast<std::int64_t>(rng() % 1000) - 100;
        const std::int64_t r = 20 + static_cast<std::int64_t>(rng() % 500);
        const QueryGeometry g = Circle{cx, cy, r};
        const IntervalSet h = geometry_to_intervals(cfg, g);
        if (h.empty())
            continue;
        hilbert_total += h.size();
        std::vector<std::uint32_t> scan;
        for (std::uint32_t y = 0; y < 8; ++y)
            for (std::uint32_t x = 0; x < 8; ++x)
                if (test::cell_intersects(cfg, x, y, g))
                    scan.push_back(x + y * 8);
        std::sort(scan.begin(), scan.end());
        scan_total += test::run_count(scan);
    }
    CHECK(hilbert_total < scan_total);
}

TEST_CASE("locality: near indices stay nearer than under the progressive scan") {
    const GridConfig cfg = grid(3);
    std::mt19937_64 rng(123);
    double hilbert_sum = 0, scan_sum = 0;
    const int trials = 4000;
    for (int i = 0; i < trials; ++i) {
        const auto a = static_cast<std::uint32_t>(rng() % 60);
        const auto b = a + 1 + static_cast<std::uint32_t>(rng() % 4); // |i-j| <= 4
        const GridCoord ca = index_to_coord(cfg, a);
        const GridCoord cb = index_to_coord(cfg, std::min(b, 63u));
        hilbert_sum += std::hypot(double(ca.x) - cb.x, double(ca.y) - cb.y);
        // progressive scan: index = x + y*8
        const auto sa = std::pair{a % 8, a / 8};
        const auto sb = std::pair{std::min(b, 63u) % 8, std::min(b, 63u) / 8};
        scan_sum += std::hypot(double(sa.first) - sb.first, double(sa.second) - sb.second);
    }
    CHECK(hilbert_sum / trials <= scan_sum / trials);
}
