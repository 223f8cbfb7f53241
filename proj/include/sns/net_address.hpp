#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

namespace sns {

// Opaque 128-bit device identifier, client-supplied at provisioning time.
using DeviceId = std::array<std::uint8_t, 16>;

// Identifier of the physical domain a registry serves.
using CellId = std::uint64_t;

std::string device_id_to_hex(const DeviceId& id);
std::optional<DeviceId> device_id_from_hex(std::string_view hex); // 32 hex digits

// IP endpoint a device is reachable at, with an optional human label.
struct NetworkAddress {
    enum class Family : std::uint8_t { v4 = 4, v6 = 6 };

    Family family = Family::v4;
    std::array<std::uint8_t, 16> bytes{}; // first 4 used for v4
    std::uint16_t port = 0;
    std::string label; // UTF-8, <= 63 bytes, no control characters

    std::size_t addr_len() const { return family == Family::v4 ? 4 : 16; }

    // Throws std::invalid_argument on port 0, oversized label, or control
    // characters in the label.
    void validate() const;

    // "192.0.2.7:9000" or "[2001:db8::1]:9000"; label is not included.
    std::string endpoint() const;

    // Parses the endpoint() form. Returns nullopt on malformed input.
    static std::optional<NetworkAddress> parse_endpoint(std::string_view text);

    friend bool operator==(const NetworkAddress&, const NetworkAddress&) = default;
};

} // namespace sns
