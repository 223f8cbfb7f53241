#include "sns/units.hpp"

#include <string>

namespace sns {

std::optional<std::int64_t> parse_meters_to_cm(std::string_view text) {
    if (text.empty())
        return std::nullopt;
    bool negative = false;
    std::size_t i = 0;
    if (text[0] == '-') {
        negative = true;
        i = 1;
    }
    std::int64_t whole = 0;
    std::size_t digits = 0;
    while (i < text.size() && text[i] >= '0' && text[i] <= '9') {
        if (++digits > 15)
            return std::nullopt;
        whole = whole * 10 + (text[i] - '0');
        ++i;
    }
    if (digits == 0)
        return std::nullopt;
    std::int64_t frac = 0;
    if (i < text.size() && text[i] == '.') {
        ++i;
        std::size_t frac_digits = 0;
        while (i < text.size() && text[i] >= '0' && text[i] <= '9') {
            if (++frac_digits > 2)
                return std::nullopt; // finer than centimeters
            frac = frac * 10 + (text[i] - '0');
            ++i;
        }
        if (frac_digits == 1)
            frac *= 10;
    }
    if (i != text.size())
        return std::nullopt;
    const std::int64_t cm = whole * 100 + frac;
    return negative ? -cm : cm;
}

std::string format_cm_as_meters(std::int64_t cm) {
    std::string out;
    if (cm < 0) {
        out += '-';
        cm = -cm;
    }
    out += std::to_string(cm / 100);
    const std::int64_t frac = cm % 100;
    if (frac != 0) {
        out += '.';
        out += static_cast<char>('0' + frac / 10);
        if (frac % 10 != 0)
            out += static_cast<char>('0' + frac % 10);
    }
    return out;
}

} // namespace sns
