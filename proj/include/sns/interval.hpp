#pragma once

#include <cstdint>
#include <vector>

namespace sns {

// Index on the space-filling curve. Orders up to 16 keep every index
// inside 32 bits (4^16 = 2^32).
using HilbertIndex = std::uint32_t;

// Inclusive range [low, high] of curve indices.
struct Interval {
    HilbertIndex low = 0;
    HilbertIndex high = 0;

    friend bool operator==(const Interval&, const Interval&) = default;
};

// True iff the closed intervals share at least one index.
inline bool overlaps(const Interval& a, const Interval& b) {
    return a.low <= b.high && a.high >= b.low;
}

// Sorted, pairwise disjoint, non-adjacent set of intervals. The empty set is
// valid. Construct via normalized() so the invariant holds by construction.
class IntervalSet {
public:
    IntervalSet() = default;

    // Sorts, merges overlapping and adjacent ranges. Accepts any input order.
    static IntervalSet normalized(std::vector<Interval> intervals);

    const std::vector<Interval>& intervals() const { return intervals_; }
    bool empty() const { return intervals_.empty(); }
    std::size_t size() const { return intervals_.size(); }

    std::vector<Interval>::const_iterator begin() const { return intervals_.begin(); }
    std::vector<Interval>::const_iterator end() const { return intervals_.end(); }

    friend bool operator==(const IntervalSet&, const IntervalSet&) = default;

private:
    std::vector<Interval> intervals_;
};

} // namespace sns
