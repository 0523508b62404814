#pragma once

#include <cstdint>
#include <optional>
#include <string>

namespace segmon {

// Dotted-quad rendering of a host-order IPv4 address.
std::string ipv4_to_string(uint32_t ip);

// Parses dotted-quad; nullopt on malformed input.
std::optional<uint32_t> ipv4_from_string(const std::string& s);

std::string mac_to_string(const uint8_t* mac6);

} // namespace segmon
