// snsloc: DNS LOC record codec on the command line.
//   parse  "<text>"  -> canonical text (validates the master-file form)
//   print  <hex>     -> canonical text for 16 RDATA bytes
//   encode "<text>"  -> 32 hex digits of RDATA
//   decode <hex>     -> wire field dump plus the canonical text

#include <CLI11.hpp>

#include <cstdio>
#include <optional>
#include <string>
#include <vector>

#include "sns/loc.hpp"

namespace {

std::optional<std::vector<std::uint8_t>> from_hex(std::string_view hex) {
    auto digit = [](char c) -> int {
        if (c >= '0' && c <= '9')
            return c - '0';
        if (c >= 'a' && c <= 'f')
            return c - 'a' + 10;
        if (c >= 'A' && c <= 'F')
            return c - 'A' + 10;
        return -1;
    };
    std::string compact;
    for (char c : hex) {
        if (c == ' ' || c == ':')
            continue;
        compact += c;
    }
    if (compact.size() % 2 != 0)
        return std::nullopt;
    std::vector<std::uint8_t> out;
    out.reserve(compact.size() / 2);
    for (std::size_t i = 0; i < compact.size(); i += 2) {
        const int hi = digit(compact[i]);
        const int lo = digit(compact[i + 1]);
        if (hi < 0 || lo < 0)
            return std::nullopt;
        out.push_back(static_cast<std::uint8_t>((hi << 4) | lo));
    }
    return out;
}

std::string to_hex(const std::array<std::uint8_t, 16>& bytes) {
    static const char* digits = "0123456789abcdef";
    std::string out;
    for (std::uint8_t b : bytes) {
        out += digits[b >> 4];
        out += digits[b & 0x0f];
    }
    return out;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"DNS LOC resource record codec"};
    app.require_subcommand(1);

    std::string text;
    std::string hex;

    auto* parse = app.add_subcommand("parse", "parse master-file text, print canonical form");
    parse->add_option("text", text, "LOC record text")->required();

    auto* print = app.add_subcommand("print", "print canonical text for RDATA hex");
    print->add_option("hex", hex, "16 bytes of RDATA as hex")->required();

    auto* encode = app.add_subcommand("encode", "encode master-file text to RDATA hex");
    encode->add_option("text", text, "LOC record text")->required();

    auto* decode = app.add_subcommand("decode", "dump wire fields from RDATA hex");
    decode->add_option("hex", hex, "16 bytes of RDATA as hex")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (parse->parsed()) {
            std::printf("%s\n", sns::loc::print_loc(sns::loc::parse_loc_text(text)).c_str());
            return 0;
        }
        if (encode->parsed()) {
            std::printf("%s\n",
                        to_hex(sns::loc::encode_rdata(sns::loc::parse_loc_text(text))).c_str());
            return 0;
        }
        const auto bytes = from_hex(hex);
        if (!bytes) {
            std::fprintf(stderr, "error: input is not valid hex\n");
            return 2;
        }
        const sns::loc::LocRecord rec = sns::loc::decode_rdata(*bytes);
        if (print->parsed()) {
            std::printf("%s\n", sns::loc::print_loc(rec).c_str());
            return 0;
        }
        std::printf("version    0\n");
        std::printf("size       0x%02x (%llu cm)\n", rec.size(),
                    (unsigned long long)sns::loc::size_byte_decode(rec.size()));
        std::printf("horiz_pre  0x%02x (%llu cm)\n", rec.horiz_pre(),
                    (unsigned long long)sns::loc::size_byte_decode(rec.horiz_pre()));
        std::printf("vert_pre   0x%02x (%llu cm)\n", rec.vert_pre(),
                    (unsigned long long)sns::loc::size_byte_decode(rec.vert_pre()));
        std::printf("latitude   %u (%+lld mas)\n", rec.latitude(),
                    (long long)rec.latitude_mas());
        std::printf("longitude  %u (%+lld mas)\n", rec.longitude(),
                    (long long)rec.longitude_mas());
        std::printf("altitude   %u (%+lld cm)\n", rec.altitude(), (long long)rec.altitude_cm());
        std::printf("text       %s\n", sns::loc::print_loc(rec).c_str());
        return 0;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    }
}
