#include "sns/loc.hpp"

#include <cstdio>
#include <cstdlib>

namespace sns::loc {

namespace {

constexpr std::uint64_t kPow10[] = {
    1ull,
    10ull,
    100ull,
    1'000ull,
    10'000ull,
    100'000ull,
    1'000'000ull,
    10'000'000ull,
    100'000'000ull,
    1'000'000'000ull,
    10'000'000'000ull,
};

bool is_space(char c) {
    return c == ' ' || c == '\t';
}

bool is_digit(char c) {
    return c >= '0' && c <= '9';
}

bool is_direction(char c) {
    return c == 'N' || c == 'S' || c == 'E' || c == 'W';
}

bool is_boundary(std::string_view text, std::size_t pos) {
    return pos >= text.size() || is_space(text[pos]);
}

std::uint64_t parse_digits(std::string_view digits) {
    if (digits.size() > 16)
        throw ParseError("integer too long: " + std::string(digits));
    std::uint64_t v = 0;
    for (char c : digits)
        v = v * 10 + static_cast<std::uint64_t>(c - '0');
    return v;
}

} // namespace

std::vector<Token> lex(std::string_view text) {
    std::vector<Token> tokens;
    std::size_t i = 0;
    while (i < text.size()) {
        const char c = text[i];
        if (is_space(c)) {
            std::size_t j = i;
            while (j < text.size() && is_space(text[j]))
                ++j;
            tokens.push_back({TokenKind::Whitespace, text.substr(i, j - i)});
            i = j;
            continue;
        }
        if (c == '-') {
            tokens.push_back({TokenKind::Minus, text.substr(i, 1)});
            ++i;
            continue;
        }
        if (c == '.') {
            tokens.push_back({TokenKind::Dot, text.substr(i, 1)});
            ++i;
            continue;
        }
        if (is_digit(c)) {
            std::size_t j = i;
            while (j < text.size() && is_digit(text[j]))
                ++j;
            // Look ahead for the whole meters term with its mandatory m; a
            // bare integer followed by a dot stays separate tokens so dotted
            // quads like 192.0.2.0 never lex as meters.
            std::size_t k = j;
            if (k < text.size() && text[k] == '.') {
                ++k;
                while (k < text.size() && is_digit(text[k]))
                    ++k;
            }
            if (k < text.size() && text[k] == 'm' && is_boundary(text, k + 1)) {
                tokens.push_back({TokenKind::MetersLiteral, text.substr(i, k + 1 - i)});
                i = k + 1;
                continue;
            }
            tokens.push_back({TokenKind::Integer, text.substr(i, j - i)});
            i = j;
            continue;
        }
        if (is_direction(c) && is_boundary(text, i + 1)) {
            tokens.push_back({TokenKind::Direction, text.substr(i, 1)});
            ++i;
            continue;
        }
        std::size_t j = i;
        while (j < text.size() && !is_space(text[j]))
            ++j;
        tokens.push_back({TokenKind::CharString, text.substr(i, j - i)});
        i = j;
    }
    return tokens;
}

namespace {

// Cursor over the token stream. Whitespace stays in the stream because the
// grammar's <space> separators are significant and fraction assembly needs
// token adjacency.
class Cursor {
public:
    explicit Cursor(std::vector<Token> tokens) : tokens_(std::move(tokens)) {}

    const Token* peek() const {
        return pos_ < tokens_.size() ? &tokens_[pos_] : nullptr;
    }

    const Token* peek_kind(TokenKind kind) const {
        const Token* t = peek();
        return t && t->kind == kind ? t : nullptr;
    }

    Token take() {
        if (pos_ >= tokens_.size())
            throw ParseError("unexpected end of input");
        return tokens_[pos_++];
    }

    Token expect(TokenKind kind, const char* what) {
        const Token* t = peek();
        if (!t || t->kind != kind)
            throw ParseError(std::string("expected ") + what +
                             (t ? " near '" + std::string(t->text) + "'" : " at end of input"));
        return tokens_[pos_++];
    }

    bool skip_space() {
        if (peek_kind(TokenKind::Whitespace)) {
            ++pos_;
            return true;
        }
        return false;
    }

    void expect_space(const char* before) {
        if (!skip_space())
            throw ParseError(std::string("expected whitespace before ") + before);
    }

    bool at_end() const { return pos_ >= tokens_.size(); }

    // True when the next token begins exactly where the previous one ended.
    bool adjacent() const {
        if (pos_ == 0 || pos_ >= tokens_.size())
            return false;
        const std::string_view prev = tokens_[pos_ - 1].text;
        return prev.data() + prev.size() == tokens_[pos_].text.data();
    }

private:
    std::vector<Token> tokens_;
    std::size_t pos_ = 0;
};

// Fraction digits scaled to a fixed number of places; more digits than the
// record can hold are a malformed record, not a rounding opportunity.
std::uint64_t scale_fraction(std::string_view digits, unsigned places, const char* what) {
    if (digits.size() > places)
        throw ParseError(std::string(what) + " has more than " + std::to_string(places) +
                         " decimal places: ." + std::string(digits));
    std::uint64_t v = parse_digits(digits);
    return v * kPow10[places - digits.size()];
}

struct Angle {
    std::int64_t mas = 0; // signed milliarcseconds
};

// deg [min [sec[.frac]]] {dir1|dir2}
Angle parse_deg_min_sec(Cursor& cur, std::int64_t max_degrees, char positive, char negative) {
    std::uint64_t deg = 0, min = 0, sec_mas = 0;

    deg = parse_digits(cur.expect(TokenKind::Integer, "degrees").text);
    if (deg > static_cast<std::uint64_t>(max_degrees))
        throw ParseError("degrees out of range: " + std::to_string(deg));

    auto next_is_direction = [&] {
        return cur.peek_kind(TokenKind::Direction) != nullptr;
    };

    cur.skip_space();
    if (!next_is_direction()) {
        min = parse_digits(cur.expect(TokenKind::Integer, "minutes").text);
        if (min > 59)
            throw ParseError("minutes out of range: " + std::to_string(min));
        cur.expect_space("seconds or direction");
        if (!next_is_direction()) {
            std::uint64_t sec = parse_digits(cur.expect(TokenKind::Integer, "seconds").text);
            if (sec > 59)
                throw ParseError("seconds out of range: " + std::to_string(sec));
            sec_mas = sec * 1000;
            if (cur.peek_kind(TokenKind::Dot) && cur.adjacent()) {
                cur.take();
                if (cur.peek_kind(TokenKind::Integer) && cur.adjacent())
                    sec_mas += scale_fraction(cur.take().text, 3, "seconds");
            }
            cur.skip_space();
        }
    }

    const Token dir = cur.expect(TokenKind::Direction, "direction letter");
    const char d = dir.text[0];
    std::int64_t sign;
    if (d == positive)
        sign = 1;
    else if (d == negative)
        sign = -1;
    else
        throw ParseError(std::string("unexpected direction '") + d + "'");

    const std::int64_t total = static_cast<std::int64_t>(((deg * 60 + min) * 60) * 1000 + sec_mas);
    const std::int64_t limit = max_degrees * 3'600'000;
    if (total > limit)
        throw ParseError("angle exceeds " + std::to_string(max_degrees) + " degrees");
    return {sign * total};
}

// [-] integer [. [integer]] with optional trailing m, in centimeters.
std::int64_t parse_meters_cm(Cursor& cur, const char* what) {
    bool negative = false;
    if (cur.peek_kind(TokenKind::Minus)) {
        cur.take();
        if (!cur.adjacent())
            throw ParseError(std::string("stray minus before ") + what);
        negative = true;
    }

    std::uint64_t whole = 0, frac_cm = 0;
    if (const Token* lit = cur.peek_kind(TokenKind::MetersLiteral)) {
        std::string_view body = lit->text;
        cur.take();
        body.remove_suffix(1); // trailing m
        const std::size_t dot = body.find('.');
        if (dot == std::string_view::npos) {
            whole = parse_digits(body);
        } else {
            whole = parse_digits(body.substr(0, dot));
            if (dot + 1 < body.size())
                frac_cm = scale_fraction(body.substr(dot + 1), 2, what);
        }
    } else {
        whole = parse_digits(cur.expect(TokenKind::Integer, what).text);
        if (cur.peek_kind(TokenKind::Dot) && cur.adjacent()) {
            cur.take();
            if (cur.peek_kind(TokenKind::Integer) && cur.adjacent())
                frac_cm = scale_fraction(cur.take().text, 2, what);
        }
    }

    if (whole > 100'000'000ull) // coarse guard; exact range checks are per field
        throw ParseError(std::string(what) + " out of range");
    const std::int64_t cm = static_cast<std::int64_t>(whole * 100 + frac_cm);
    return negative ? -cm : cm;
}

std::uint8_t parse_extent_byte(Cursor& cur, const char* what) {
    const std::int64_t cm = parse_meters_cm(cur, what);
    if (cm < 0 || static_cast<std::uint64_t>(cm) > kMaxSizeCm)
        throw ParseError(std::string(what) + " out of range [0, 90000000.00] m");
    return size_byte_encode(static_cast<std::uint64_t>(cm));
}

void append_fraction(std::string& out, std::uint64_t frac, unsigned places) {
    if (frac == 0)
        return;
    char buf[8];
    std::snprintf(buf, sizeof buf, "%0*llu", static_cast<int>(places),
                  static_cast<unsigned long long>(frac));
    std::string_view digits(buf);
    while (digits.ends_with('0'))
        digits.remove_suffix(1);
    out += '.';
    out += digits;
}

void print_angle(std::string& out, std::int64_t mas, char positive, char negative) {
    const char dir = mas >= 0 ? positive : negative;
    const std::uint64_t a = static_cast<std::uint64_t>(mas >= 0 ? mas : -mas);
    const std::uint64_t deg = a / 3'600'000;
    const std::uint64_t min = a % 3'600'000 / 60'000;
    const std::uint64_t sec_mas = a % 60'000;

    out += std::to_string(deg);
    if (min != 0 || sec_mas != 0) {
        out += ' ';
        out += std::to_string(min);
        if (sec_mas != 0) {
            out += ' ';
            out += std::to_string(sec_mas / 1000);
            append_fraction(out, sec_mas % 1000, 3);
        }
    }
    out += ' ';
    out += dir;
}

void print_meters(std::string& out, std::int64_t cm) {
    if (cm < 0) {
        out += '-';
        cm = -cm;
    }
    out += std::to_string(cm / 100);
    append_fraction(out, static_cast<std::uint64_t>(cm % 100), 2);
    out += 'm';
}

} // namespace

LocRecord LocRecord::from_wire(std::uint32_t latitude, std::uint32_t longitude,
                               std::uint32_t altitude, std::uint8_t size,
                               std::uint8_t horiz_pre, std::uint8_t vert_pre) {
    LocRecord rec;
    rec.latitude_ = latitude;
    rec.longitude_ = longitude;
    rec.altitude_ = altitude;
    // zero-mantissa extents canonicalize to 0x00 so print/parse stays a fixpoint
    rec.size_ = (size >> 4) == 0 ? 0 : size;
    rec.horiz_pre_ = (horiz_pre >> 4) == 0 ? 0 : horiz_pre;
    rec.vert_pre_ = (vert_pre >> 4) == 0 ? 0 : vert_pre;

    if (std::abs(rec.latitude_mas()) > kMaxLatitudeMas)
        throw DecodeError("latitude out of range");
    if (std::abs(rec.longitude_mas()) > kMaxLongitudeMas)
        throw DecodeError("longitude out of range");
    for (std::uint8_t b : {rec.size_, rec.horiz_pre_, rec.vert_pre_}) {
        if ((b >> 4) > 9 || (b & 0x0f) > 9)
            throw DecodeError("size/precision nibble out of range");
    }
    return rec;
}

LocRecord parse_loc_text(std::string_view text) {
    Cursor cur(lex(text));
    cur.skip_space();

    const Angle lat = parse_deg_min_sec(cur, 90, 'N', 'S');
    cur.expect_space("longitude");
    const Angle lon = parse_deg_min_sec(cur, 180, 'E', 'W');

    cur.expect_space("altitude");
    const std::int64_t alt_cm = parse_meters_cm(cur, "altitude");
    if (alt_cm < -static_cast<std::int64_t>(kAltitudeOffsetCm) ||
        alt_cm > 4'294'967'295ll - kAltitudeOffsetCm)
        throw ParseError("altitude out of range [-100000.00, 42849672.95] m");

    std::uint8_t size = kDefaultSize;
    std::uint8_t horiz_pre = kDefaultHorizPre;
    std::uint8_t vert_pre = kDefaultVertPre;

    bool trailing_space = cur.skip_space();
    if (trailing_space && !cur.at_end()) {
        size = parse_extent_byte(cur, "size");
        trailing_space = cur.skip_space();
        if (trailing_space && !cur.at_end()) {
            horiz_pre = parse_extent_byte(cur, "horizontal precision");
            trailing_space = cur.skip_space();
            if (trailing_space && !cur.at_end()) {
                vert_pre = parse_extent_byte(cur, "vertical precision");
                cur.skip_space();
            }
        }
    }
    if (!cur.at_end())
        throw ParseError("trailing input after record: '" + std::string(cur.peek()->text) + "'");

    return LocRecord::from_wire(
        static_cast<std::uint32_t>(kWireZeroAngle + lat.mas),
        static_cast<std::uint32_t>(kWireZeroAngle + lon.mas),
        static_cast<std::uint32_t>(alt_cm + kAltitudeOffsetCm), size, horiz_pre, vert_pre);
}

std::string print_loc(const LocRecord& rec) {
    std::string out;
    print_angle(out, rec.latitude_mas(), 'N', 'S');
    out += ' ';
    print_angle(out, rec.longitude_mas(), 'E', 'W');
    out += ' ';
    print_meters(out, rec.altitude_cm());
    for (std::uint8_t b : {rec.size(), rec.horiz_pre(), rec.vert_pre()}) {
        out += ' ';
        print_meters(out, static_cast<std::int64_t>(size_byte_decode(b)));
    }
    return out;
}

std::array<std::uint8_t, 16> encode_rdata(const LocRecord& rec) {
    std::array<std::uint8_t, 16> out{};
    out[0] = 0; // version
    out[1] = rec.size();
    out[2] = rec.horiz_pre();
    out[3] = rec.vert_pre();
    auto put32 = [&](std::size_t off, std::uint32_t v) {
        out[off] = static_cast<std::uint8_t>(v >> 24);
        out[off + 1] = static_cast<std::uint8_t>(v >> 16);
        out[off + 2] = static_cast<std::uint8_t>(v >> 8);
        out[off + 3] = static_cast<std::uint8_t>(v);
    };
    put32(4, rec.latitude());
    put32(8, rec.longitude());
    put32(12, rec.altitude());
    return out;
}

LocRecord decode_rdata(std::span<const std::uint8_t> rdata) {
    if (rdata.size() != 16)
        throw DecodeError("LOC RDATA must be 16 bytes, got " + std::to_string(rdata.size()));
    if (rdata[0] != 0)
        throw DecodeError("unknown LOC version " + std::to_string(rdata[0]) +
                          "; record must be treated as opaque");
    auto get32 = [&](std::size_t off) {
        return (std::uint32_t{rdata[off]} << 24) | (std::uint32_t{rdata[off + 1]} << 16) |
               (std::uint32_t{rdata[off + 2]} << 8) | std::uint32_t{rdata[off + 3]};
    };
    return LocRecord::from_wire(get32(4), get32(8), get32(12), rdata[1], rdata[2], rdata[3]);
}

std::uint8_t size_byte_encode(std::uint64_t centimeters) {
    if (centimeters > kMaxSizeCm)
        throw std::out_of_range("size exceeds 9e9 cm");
    if (centimeters == 0)
        return 0x00;
    unsigned exponent = 0;
    while (exponent < 9 && centimeters >= kPow10[exponent + 1])
        ++exponent;
    const std::uint64_t mantissa = centimeters / kPow10[exponent];
    return static_cast<std::uint8_t>((mantissa << 4) | exponent);
}

std::uint64_t size_byte_decode(std::uint8_t byte) {
    const unsigned mantissa = byte >> 4;
    const unsigned exponent = byte & 0x0f;
    if (mantissa > 9 || exponent > 9)
        throw DecodeError("size/precision nibble out of range");
    return mantissa * kPow10[exponent];
}

} // namespace sns::loc
