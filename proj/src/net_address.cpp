#include "sns/net_address.hpp"

#include <arpa/inet.h>

#include <cstdio>
#include <stdexcept>

namespace sns {

namespace {

int hex_digit(char c) {
    if (c >= '0' && c <= '9')
        return c - '0';
    if (c >= 'a' && c <= 'f')
        return c - 'a' + 10;
    if (c >= 'A' && c <= 'F')
        return c - 'A' + 10;
    return -1;
}

} // namespace

std::string device_id_to_hex(const DeviceId& id) {
    static const char* digits = "0123456789abcdef";
    std::string out;
    out.reserve(32);
    for (std::uint8_t b : id) {
        out += digits[b >> 4];
        out += digits[b & 0x0f];
    }
    return out;
}

std::optional<DeviceId> device_id_from_hex(std::string_view hex) {
    if (hex.size() != 32)
        return std::nullopt;
    DeviceId id{};
    for (std::size_t i = 0; i < 16; ++i) {
        const int hi = hex_digit(hex[2 * i]);
        const int lo = hex_digit(hex[2 * i + 1]);
        if (hi < 0 || lo < 0)
            return std::nullopt;
        id[i] = static_cast<std::uint8_t>((hi << 4) | lo);
    }
    return id;
}

void NetworkAddress::validate() const {
    if (port == 0)
        throw std::invalid_argument("port must be nonzero");
    if (label.size() > 63)
        throw std::invalid_argument("label exceeds 63 bytes");
    for (unsigned char c : label) {
        if (c < 0x20 || c == 0x7f)
            throw std::invalid_argument("label contains control characters");
    }
}

std::string NetworkAddress::endpoint() const {
    char buf[INET6_ADDRSTRLEN] = {};
    if (family == Family::v4) {
        inet_ntop(AF_INET, bytes.data(), buf, sizeof buf);
        return std::string(buf) + ":" + std::to_string(port);
    }
    inet_ntop(AF_INET6, bytes.data(), buf, sizeof buf);
    return "[" + std::string(buf) + "]:" + std::to_string(port);
}

std::optional<NetworkAddress> NetworkAddress::parse_endpoint(std::string_view text) {
    NetworkAddress out;
    std::string host;
    std::string_view port_part;

    if (!text.empty() && text.front() == '[') {
        const auto close = text.find(']');
        if (close == std::string_view::npos || close + 1 >= text.size() ||
            text[close + 1] != ':')
            return std::nullopt;
        host = std::string(text.substr(1, close - 1));
        port_part = text.substr(close + 2);
        out.family = Family::v6;
    } else {
        const auto colon = text.rfind(':');
        if (colon == std::string_view::npos)
            return std::nullopt;
        host = std::string(text.substr(0, colon));
        port_part = text.substr(colon + 1);
        out.family = Family::v4;
    }

    if (out.family == Family::v4) {
        if (inet_pton(AF_INET, host.c_str(), out.bytes.data()) != 1)
            return std::nullopt;
    } else {
        if (inet_pton(AF_INET6, host.c_str(), out.bytes.data()) != 1)
            return std::nullopt;
    }

    if (port_part.empty() || port_part.size() > 5)
        return std::nullopt;
    std::uint32_t port = 0;
    for (char c : port_part) {
        if (c < '0' || c > '9')
            return std::nullopt;
        port = port * 10 + static_cast<std::uint32_t>(c - '0');
    }
    if (port == 0 || port > 65535)
        return std::nullopt;
    out.port = static_cast<std::uint16_t>(port);
    return out;
}

} // namespace sns
