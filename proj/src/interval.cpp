#include "sns/interval.hpp"

#include <algorithm>
#include <stdexcept>

namespace sns {

IntervalSet IntervalSet::normalized(std::vector<Interval> intervals) {
    for (const auto& iv : intervals) {
        if (iv.low > iv.high)
            throw std::invalid_argument("interval low exceeds high");
    }
    std::sort(intervals.begin(), intervals.end(), [](const Interval& a, const Interval& b) {
        return a.low != b.low ? a.low < b.low : a.high < b.high;
    });
    IntervalSet out;
    for (const auto& iv : intervals) {
        if (!out.intervals_.empty()) {
            Interval& last = out.intervals_.back();
            // merge overlapping or adjacent runs; 64-bit compare avoids
            // wrapping at high == UINT32_MAX
            if (std::uint64_t{iv.low} <= std::uint64_t{last.high} + 1) {
                last.high = std::max(last.high, iv.high);
                continue;
            }
        }
        out.intervals_.push_back(iv);
    }
    return out;
}

} // namespace sns
