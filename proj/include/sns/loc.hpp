#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

// DNS LOC resource record (type 29): master-file text form, canonical
// printing, and the 16-byte RDATA wire form. All quantities are held as
// fixed-point integers in wire units so that printing and transmission
// derive from the same values; no floating point is involved.

namespace sns::loc {

class ParseError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class DecodeError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Wire-unit constants.
inline constexpr std::uint32_t kWireZeroAngle = 0x80000000u; // 2^31, equator/meridian
inline constexpr std::int64_t kMaxLatitudeMas = 324'000'000;  // 90 degrees
inline constexpr std::int64_t kMaxLongitudeMas = 648'000'000; // 180 degrees
inline constexpr std::uint32_t kAltitudeOffsetCm = 10'000'000; // -100000.00 m floor
inline constexpr std::uint64_t kMaxSizeCm = 9'000'000'000ull;  // 9e9 cm = 90000000.00 m

// Defaults for omitted optional fields (RFC 1876): 1 m size, 10 km horizontal
// precision, 10 m vertical precision.
inline constexpr std::uint8_t kDefaultSize = 0x12;
inline constexpr std::uint8_t kDefaultHorizPre = 0x16;
inline constexpr std::uint8_t kDefaultVertPre = 0x13;

// A LOC record in wire units: angles are milliarcseconds offset by 2^31,
// altitude is centimeters offset by 10^7, and the three extent fields are
// mantissa/exponent bytes. The version field is the constant 0.
class LocRecord {
public:
    // Validates ranges and nibble bounds; throws DecodeError on violation.
    static LocRecord from_wire(std::uint32_t latitude, std::uint32_t longitude,
                               std::uint32_t altitude, std::uint8_t size,
                               std::uint8_t horiz_pre, std::uint8_t vert_pre);

    std::uint32_t latitude() const { return latitude_; }
    std::uint32_t longitude() const { return longitude_; }
    std::uint32_t altitude() const { return altitude_; }
    std::uint8_t size() const { return size_; }
    std::uint8_t horiz_pre() const { return horiz_pre_; }
    std::uint8_t vert_pre() const { return vert_pre_; }

    // Signed decodes of the offset fields.
    std::int64_t latitude_mas() const { return std::int64_t{latitude_} - kWireZeroAngle; }
    std::int64_t longitude_mas() const { return std::int64_t{longitude_} - kWireZeroAngle; }
    std::int64_t altitude_cm() const { return std::int64_t{altitude_} - kAltitudeOffsetCm; }

    friend bool operator==(const LocRecord&, const LocRecord&) = default;

private:
    LocRecord() = default;

    std::uint32_t latitude_ = kWireZeroAngle;
    std::uint32_t longitude_ = kWireZeroAngle;
    std::uint32_t altitude_ = kAltitudeOffsetCm;
    std::uint8_t size_ = 0;
    std::uint8_t horiz_pre_ = 0;
    std::uint8_t vert_pre_ = 0;
};

// --- Lexing ----------------------------------------------------------------

enum class TokenKind {
    Integer,
    Dot,
    Minus,
    MetersLiteral, // integer[.frac]m, the m mandatory
    Direction,     // N, S, E or W
    CharString,
    Whitespace,
};

struct Token {
    TokenKind kind;
    std::string_view text;
};

// Splits master-file RDATA text into tokens. A meters literal is only lexed
// when the trailing m is present and the token ends at a boundary, so dotted
// integer runs like 192.0.2.0 stay integer/dot sequences.
std::vector<Token> lex(std::string_view text);

// --- Operations -------------------------------------------------------------

// Parses the master-file text form:
//   d1 [m1 [s1]] {N|S}  d2 [m2 [s2]] {E|W}  alt[m] [siz[m] [hp[m] [vp[m]]]]
// Seconds carry at most 3 decimal places, meter quantities at most 2; more
// precision is rejected as malformed. Omitted extents take the RFC defaults.
LocRecord parse_loc_text(std::string_view text);

// Canonical text form: minutes/seconds appear only when a lower field is
// nonzero, fractional parts drop trailing zeros, meter values always carry
// the m suffix. parse_loc_text(print_loc(r)) == r for every valid record.
std::string print_loc(const LocRecord& rec);

// 16-byte RDATA: version, size, horiz pre, vert pre, then big-endian 32-bit
// latitude, longitude, altitude.
std::array<std::uint8_t, 16> encode_rdata(const LocRecord& rec);

// Inverse of encode_rdata. Throws DecodeError on wrong length, an unknown
// version byte (callers must treat such records as opaque), or invalid
// extent nibbles.
LocRecord decode_rdata(std::span<const std::uint8_t> rdata);

// Mantissa/exponent byte codec for the size and precision fields:
// byte = (mantissa << 4) | exponent, value = mantissa * 10^exponent cm.
// Values not exactly representable round down to the nearest representable
// value. Requires 0 <= centimeters <= 9e9.
std::uint8_t size_byte_encode(std::uint64_t centimeters);

// Throws DecodeError when either nibble exceeds 9.
std::uint64_t size_byte_decode(std::uint8_t byte);

} // namespace sns::loc
