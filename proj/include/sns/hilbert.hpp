#pragma once

#include <cstdint>
#include <variant>

#include "sns/interval.hpp"

// 2-D Hilbert curve mapping between grid cells and 1-D indices, plus
// decomposition of query geometry into minimal interval sets of indices.
//
// Orientation convention: the curve starts in cell (0,0) and steps first
// along +y, so index 1 sits at (0,1) for order 1. An order-n curve ends in
// cell (2^n - 1, 0).

namespace sns {

// Local coordinate frame: a 2^order x 2^order grid of square cells.
// The dimension tag reserves room for a 3-D curve without a protocol change.
struct GridConfig {
    std::uint32_t order = 8;     // 1..16, so indices fit in 32 bits
    std::int64_t cell_size_cm = 100;
    std::int64_t origin_x_cm = 0; // physical position of cell (0,0)
    std::int64_t origin_y_cm = 0;
    std::uint8_t dimensions = 2;

    // Throws std::invalid_argument on an out-of-range field.
    void validate() const;

    std::uint32_t side() const { return 1u << order; }
    std::uint64_t cell_count() const { return std::uint64_t{1} << (2 * order); }

    friend bool operator==(const GridConfig&, const GridConfig&) = default;
};

struct GridCoord {
    std::uint32_t x = 0;
    std::uint32_t y = 0;

    friend bool operator==(const GridCoord&, const GridCoord&) = default;
};

// Query geometry in physical centimeters, or raw curve intervals.
struct Circle {
    std::int64_t center_x_cm = 0;
    std::int64_t center_y_cm = 0;
    std::int64_t radius_cm = 0;

    friend bool operator==(const Circle&, const Circle&) = default;
};

struct Rect {
    std::int64_t min_x_cm = 0;
    std::int64_t min_y_cm = 0;
    std::int64_t max_x_cm = 0;
    std::int64_t max_y_cm = 0;

    friend bool operator==(const Rect&, const Rect&) = default;
};

using QueryGeometry = std::variant<Circle, Rect, IntervalSet>;

// Bijective cell -> index mapping. Throws std::out_of_range when the
// coordinate is outside the grid.
HilbertIndex coord_to_index(const GridConfig& cfg, GridCoord c);

// Inverse mapping. Throws std::out_of_range when the index is outside
// [0, 4^order).
GridCoord index_to_coord(const GridConfig& cfg, HilbertIndex i);

// Indices of every cell whose closed square intersects the geometry, merged
// into a minimal sorted disjoint IntervalSet. Cells and shapes are closed
// sets, so touching boundaries count as intersecting. Portions outside the
// grid clip silently; a geometry entirely off-grid yields the empty set.
// Raw interval sets pass through after range validation and normalization.
// Throws std::invalid_argument for degenerate geometry (radius <= 0, or
// rect without min < max on both axes).
IntervalSet geometry_to_intervals(const GridConfig& cfg, const QueryGeometry& g);

} // namespace sns
