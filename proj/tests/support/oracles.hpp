#pragma once

// Independent oracles for property tests: a recursive Hilbert curve
// construction, exhaustive per-cell geometry scans, and a linear-scan
// interval store. These deliberately avoid the library's algorithms so the
// two paths check each other.

#include <algorithm>
#include <cstdint>
#include <random>
#include <utility>
#include <vector>

#include "sns/hilbert.hpp"
#include "sns/interval.hpp"

namespace sns::test {

// Builds the canonical order-n curve by quadrant recursion: the four
// sub-curves are (1) the transposed previous curve, (2) a copy shifted up,
// (3) a copy shifted up-right, (4) an anti-transposed copy at the right.
inline std::vector<std::pair<std::uint32_t, std::uint32_t>> recursive_hilbert(int order) {
    std::vector<std::pair<std::uint32_t, std::uint32_t>> pts{{0, 0}};
    for (int n = 1; n <= order; ++n) {
        const std::uint32_t s = 1u << (n - 1);
        std::vector<std::pair<std::uint32_t, std::uint32_t>> next;
        next.reserve(pts.size() * 4);
        for (const auto& [x, y] : pts)
            next.emplace_back(y, x);
        for (const auto& [x, y] : pts)
            next.emplace_back(x, y + s);
        for (const auto& [x, y] : pts)
            next.emplace_back(x + s, y + s);
        for (const auto& [x, y] : pts)
            next.emplace_back(2 * s - 1 - y, s - 1 - x);
        pts = std::move(next);
    }
    return pts;
}

// Closed-set intersection of one cell with the geometry, done directly per
// cell; the library's quadtree descent never runs here.
inline bool cell_intersects(const GridConfig& cfg, std::uint32_t cx, std::uint32_t cy,
                            const QueryGeometry& g) {
    const long double x0 = static_cast<long double>(cfg.origin_x_cm) +
                           static_cast<long double>(cx) * cfg.cell_size_cm;
    const long double y0 = static_cast<long double>(cfg.origin_y_cm) +
                           static_cast<long double>(cy) * cfg.cell_size_cm;
    const long double x1 = x0 + cfg.cell_size_cm;
    const long double y1 = y0 + cfg.cell_size_cm;

    if (const auto* c = std::get_if<Circle>(&g)) {
        const long double px = std::clamp(static_cast<long double>(c->center_x_cm), x0, x1);
        const long double py = std::clamp(static_cast<long double>(c->center_y_cm), y0, y1);
        const long double dx = c->center_x_cm - px;
        const long double dy = c->center_y_cm - py;
        return dx * dx + dy * dy <=
               static_cast<long double>(c->radius_cm) * c->radius_cm;
    }
    const auto& r = std::get<Rect>(g);
    return x0 <= r.max_x_cm && x1 >= r.min_x_cm && y0 <= r.max_y_cm && y1 >= r.min_y_cm;
}

// Every intersecting cell as a sorted list of curve indices.
inline std::vector<std::uint32_t> scan_cells(const GridConfig& cfg, const QueryGeometry& g) {
    std::vector<std::uint32_t> out;
    const std::uint32_t side = cfg.side();
    for (std::uint32_t y = 0; y < side; ++y) {
        for (std::uint32_t x = 0; x < side; ++x) {
            if (cell_intersects(cfg, x, y, g))
                out.push_back(coord_to_index(cfg, {x, y}));
        }
    }
    std::sort(out.begin(), out.end());
    return out;
}

inline IntervalSet indices_to_intervals(std::vector<std::uint32_t> idx) {
    std::sort(idx.begin(), idx.end());
    idx.erase(std::unique(idx.begin(), idx.end()), idx.end());
    std::vector<Interval> out;
    for (std::uint32_t v : idx) {
        if (!out.empty() && std::uint64_t{out.back().high} + 1 == v)
            out.back().high = v;
        else
            out.push_back({v, v});
    }
    return IntervalSet::normalized(std::move(out));
}

inline std::size_t run_count(const std::vector<std::uint32_t>& sorted_unique) {
    std::size_t runs = 0;
    for (std::size_t i = 0; i < sorted_unique.size(); ++i) {
        if (i == 0 || sorted_unique[i] != sorted_unique[i - 1] + 1)
            ++runs;
    }
    return runs;
}

// Linear-scan model of the interval tree.
struct ScanStore {
    std::vector<std::pair<Interval, std::uint64_t>> items;

    void insert(Interval iv, std::uint64_t addr) {
        for (const auto& [i, a] : items) {
            if (i == iv && a == addr)
                return;
        }
        items.emplace_back(iv, addr);
    }

    bool erase(Interval iv, std::uint64_t addr) {
        for (auto it = items.begin(); it != items.end(); ++it) {
            if (it->first == iv && it->second == addr) {
                items.erase(it);
                return true;
            }
        }
        return false;
    }

    // Same grouping contract as IntervalTree::query_all.
    std::vector<std::pair<std::uint64_t, IntervalSet>> query_all(const IntervalSet& q) const {
        std::vector<std::pair<std::uint64_t, std::vector<Interval>>> grouped;
        for (const auto& [iv, addr] : items) {
            std::vector<Interval> clips;
            for (const Interval& query : q) {
                if (overlaps(iv, query))
                    clips.push_back({std::max(iv.low, query.low), std::min(iv.high, query.high)});
            }
            if (clips.empty())
                continue;
            auto it = std::find_if(grouped.begin(), grouped.end(),
                                   [&](const auto& g) { return g.first == addr; });
            if (it == grouped.end()) {
                grouped.emplace_back(addr, std::move(clips));
            } else {
                it->second.insert(it->second.end(), clips.begin(), clips.end());
            }
        }
        std::sort(grouped.begin(), grouped.end(),
                  [](const auto& a, const auto& b) { return a.first < b.first; });
        std::vector<std::pair<std::uint64_t, IntervalSet>> out;
        out.reserve(grouped.size());
        for (auto& [addr, clips] : grouped)
            out.emplace_back(addr, IntervalSet::normalized(std::move(clips)));
        return out;
    }
};

} // namespace sns::test
