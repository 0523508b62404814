#include "segmon/util.hpp"

#include <cstdio>

namespace segmon {

std::string ipv4_to_string(uint32_t ip) {
    char buf[16];
    std::snprintf(buf, sizeof(buf), "%u.%u.%u.%u",
                  (ip >> 24) & 0xFF, (ip >> 16) & 0xFF, (ip >> 8) & 0xFF, ip & 0xFF);
    return buf;
}

std::optional<uint32_t> ipv4_from_string(const std::string& s) {
    unsigned a, b, c, d;
    char tail;
    if (std::sscanf(s.c_str(), "%u.%u.%u.%u%c", &a, &b, &c, &d, &tail) != 4)
        return std::nullopt;
    if (a > 255 || b > 255 || c > 255 || d > 255)
        return std::nullopt;
    return (a << 24) | (b << 16) | (c << 8) | d;
}

std::string mac_to_string(const uint8_t* mac6) {
    char buf[18];
    std::snprintf(buf, sizeof(buf), "%02x:%02x:%02x:%02x:%02x:%02x",
                  mac6[0], mac6[1], mac6[2], mac6[3], mac6[4], mac6[5]);
    return buf;
}

} // namespace segmon
