#include "sns/hilbert.hpp"

#include <algorithm>
#include <cstdlib>
#include <stdexcept>

namespace sns {

void GridConfig::validate() const {
    if (order < 1 || order > 16)
        throw std::invalid_argument("grid order must be in [1, 16]");
    if (cell_size_cm <= 0 || cell_size_cm > (std::int64_t{1} << 40))
        throw std::invalid_argument("cell size must be in (0, 2^40] cm");
    if (origin_x_cm < -(std::int64_t{1} << 55) || origin_x_cm > (std::int64_t{1} << 55) ||
        origin_y_cm < -(std::int64_t{1} << 55) || origin_y_cm > (std::int64_t{1} << 55))
        throw std::invalid_argument("grid origin magnitude exceeds 2^55 cm");
    if (dimensions != 2)
        throw std::invalid_argument("only 2-D grids are supported");
}

HilbertIndex coord_to_index(const GridConfig& cfg, GridCoord c) {
    const std::uint32_t side = cfg.side();
    if (c.x >= side || c.y >= side)
        throw std::out_of_range("grid coordinate out of bounds");
    std::uint32_t x = c.x, y = c.y;
    std::uint64_t d = 0;
    for (std::uint32_t s = side / 2; s > 0; s /= 2) {
        const std::uint32_t rx = (x & s) ? 1 : 0;
        const std::uint32_t ry = (y & s) ? 1 : 0;
        d += std::uint64_t{s} * s * ((3 * rx) ^ ry);
        // rotate the quadrant so the sub-curve is in canonical position
        if (ry == 0) {
            if (rx == 1) {
                x = s - 1 - x;
                y = s - 1 - y;
            }
            std::swap(x, y);
        }
    }
    return static_cast<HilbertIndex>(d);
}

GridCoord index_to_coord(const GridConfig& cfg, HilbertIndex i) {
    const std::uint32_t side = cfg.side();
    if (cfg.order < 16 && std::uint64_t{i} >= cfg.cell_count())
        throw std::out_of_range("curve index out of range");
    std::uint32_t x = 0, y = 0;
    std::uint64_t t = i;
    for (std::uint32_t s = 1; s < side; s *= 2) {
        const std::uint32_t rx = 1 & static_cast<std::uint32_t>(t / 2);
        const std::uint32_t ry = 1 & static_cast<std::uint32_t>(t ^ rx);
        if (ry == 0) {
            if (rx == 1) {
                x = s - 1 - x;
                y = s - 1 - y;
            }
            std::swap(x, y);
        }
        x += s * rx;
        y += s * ry;
        t /= 4;
    }
    return {x, y};
}

namespace {

// Closed axis-aligned box in physical centimeters.
struct Box {
    std::int64_t min_x, min_y, max_x, max_y;
};

enum class Coverage { Outside, Partial, Inside };

unsigned __int128 square(std::int64_t v) {
    const auto a = static_cast<unsigned __int128>(v < 0 ? -v : v);
    return a * a;
}

// Distance tests stay in integers: compare squared distances, with early
// exits keeping the squares inside 64 bits.
bool disk_intersects_box(const Circle& c, const Box& b) {
    const std::int64_t px = std::clamp(c.center_x_cm, b.min_x, b.max_x);
    const std::int64_t py = std::clamp(c.center_y_cm, b.min_y, b.max_y);
    const std::int64_t dx = c.center_x_cm - px;
    const std::int64_t dy = c.center_y_cm - py;
    if (dx > c.radius_cm || -dx > c.radius_cm || dy > c.radius_cm || -dy > c.radius_cm)
        return false;
    return square(dx) + square(dy) <= square(c.radius_cm);
}

bool disk_contains_box(const Circle& c, const Box& b) {
    // farthest point of a box from any point is one of its corners
    const std::int64_t fx = (c.center_x_cm - b.min_x > b.max_x - c.center_x_cm) ? b.min_x : b.max_x;
    const std::int64_t fy = (c.center_y_cm - b.min_y > b.max_y - c.center_y_cm) ? b.min_y : b.max_y;
    const std::int64_t dx = c.center_x_cm - fx;
    const std::int64_t dy = c.center_y_cm - fy;
    if (dx > c.radius_cm || -dx > c.radius_cm || dy > c.radius_cm || -dy > c.radius_cm)
        return false;
    return square(dx) + square(dy) <= square(c.radius_cm);
}

struct GeometryTester {
    const GridConfig& cfg;
    const Circle* circle = nullptr;
    const Rect* rect = nullptr;

    Box cell_box(std::int64_t cx0, std::int64_t cy0, std::int64_t cells) const {
        return Box{cfg.origin_x_cm + cx0 * cfg.cell_size_cm,
                   cfg.origin_y_cm + cy0 * cfg.cell_size_cm,
                   cfg.origin_x_cm + (cx0 + cells) * cfg.cell_size_cm,
                   cfg.origin_y_cm + (cy0 + cells) * cfg.cell_size_cm};
    }

    Coverage classify(std::int64_t cx0, std::int64_t cy0, std::int64_t cells) const {
        const Box b = cell_box(cx0, cy0, cells);
        if (circle) {
            if (!disk_intersects_box(*circle, b))
                return Coverage::Outside;
            return disk_contains_box(*circle, b) ? Coverage::Inside : Coverage::Partial;
        }
        if (b.min_x > rect->max_x_cm || b.max_x < rect->min_x_cm || b.min_y > rect->max_y_cm ||
            b.max_y < rect->min_y_cm)
            return Coverage::Outside;
        if (rect->min_x_cm <= b.min_x && b.max_x <= rect->max_x_cm &&
            rect->min_y_cm <= b.min_y && b.max_y <= rect->max_y_cm)
            return Coverage::Inside;
        return Coverage::Partial;
    }
};

class Decomposer {
public:
    Decomposer(const GeometryTester& tester) : tester_(tester) {}

    // Walks the curve's quadrant structure in index order. The square at a
    // recursion step has corner (x0, y0) and spans the side vectors
    // (xi, xj) and (yi, yj); indices covered are the contiguous block
    // starting at base. Quadrants fully covered emit whole blocks,
    // untouched quadrants prune, the rest split.
    void descend(std::int64_t x0, std::int64_t y0, std::int64_t xi, std::int64_t xj,
                 std::int64_t yi, std::int64_t yj, std::uint64_t base) {
        const std::int64_t side = std::abs(xi + yi); // one of xi, yi is zero
        const std::int64_t cx0 = std::min(x0, x0 + xi + yi);
        const std::int64_t cy0 = std::min(y0, y0 + xj + yj);
        const Coverage cov = tester_.classify(cx0, cy0, side);
        if (cov == Coverage::Outside)
            return;
        const std::uint64_t block = static_cast<std::uint64_t>(side) * side;
        if (cov == Coverage::Inside || side == 1) {
            emit(base, base + block - 1);
            return;
        }
        const std::int64_t hxi = xi / 2, hxj = xj / 2, hyi = yi / 2, hyj = yj / 2;
        const std::uint64_t q = block / 4;
        descend(x0, y0, hyi, hyj, hxi, hxj, base);
        descend(x0 + hxi, y0 + hxj, hxi, hxj, hyi, hyj, base + q);
        descend(x0 + hxi + hyi, y0 + hxj + hyj, hxi, hxj, hyi, hyj, base + 2 * q);
        descend(x0 + hxi + yi, y0 + hxj + yj, -hyi, -hyj, -hxi, -hxj, base + 3 * q);
    }

    std::vector<Interval> take() && { return std::move(out_); }

private:
    void emit(std::uint64_t low, std::uint64_t high) {
        if (!out_.empty() && std::uint64_t{out_.back().high} + 1 == low) {
            out_.back().high = static_cast<HilbertIndex>(high);
            return;
        }
        out_.push_back({static_cast<HilbertIndex>(low), static_cast<HilbertIndex>(high)});
    }

    const GeometryTester& tester_;
    std::vector<Interval> out_;
};

IntervalSet decompose(const GridConfig& cfg, const GeometryTester& tester) {
    Decomposer d(tester);
    const auto side = static_cast<std::int64_t>(cfg.side());
    // first axis along +y fixes the canonical orientation
    d.descend(0, 0, 0, side, side, 0, 0);
    return IntervalSet::normalized(std::move(d).take());
}

} // namespace

IntervalSet geometry_to_intervals(const GridConfig& cfg, const QueryGeometry& g) {
    cfg.validate();
    if (const auto* raw = std::get_if<IntervalSet>(&g)) {
        const std::uint64_t count = cfg.cell_count();
        std::vector<Interval> ivs(raw->begin(), raw->end());
        for (const auto& iv : ivs) {
            if (iv.low > iv.high || std::uint64_t{iv.high} >= count)
                throw std::invalid_argument("raw interval outside the grid");
        }
        return IntervalSet::normalized(std::move(ivs));
    }
    if (const auto* c = std::get_if<Circle>(&g)) {
        if (c->radius_cm <= 0)
            throw std::invalid_argument("circle radius must be positive");
        GeometryTester tester{cfg, c, nullptr};
        return decompose(cfg, tester);
    }
    const auto& r = std::get<Rect>(g);
    if (r.min_x_cm >= r.max_x_cm || r.min_y_cm >= r.max_y_cm)
        throw std::invalid_argument("rect must have min < max on both axes");
    GeometryTester tester{cfg, nullptr, &r};
    return decompose(cfg, tester);
}

} // namespace sns
