#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace segmon {

// TCP flag bits (byte 13 of the TCP header).
constexpr uint8_t TCP_FIN = 0x01;
constexpr uint8_t TCP_SYN = 0x02;
constexpr uint8_t TCP_RST = 0x04;
constexpr uint8_t TCP_PSH = 0x08;
constexpr uint8_t TCP_ACK = 0x10;

constexpr uint16_t ETHERTYPE_IPV4 = 0x0800;
constexpr uint16_t ETHERTYPE_ARP = 0x0806;

constexpr uint8_t IPPROTO_TCP_NUM = 6;
constexpr uint8_t IPPROTO_UDP_NUM = 17;

struct Ipv4Section {
    uint32_t src_ip = 0; // host order
    uint32_t dst_ip = 0;
    uint8_t protocol = 0;
    uint16_t total_len = 0; // from the IPv4 header

    bool operator==(const Ipv4Section&) const = default;
};

struct L4Section {
    uint16_t src_port = 0;
    uint16_t dst_port = 0;
    uint8_t tcp_flags = 0; // zero for UDP

    bool operator==(const L4Section&) const = default;
};

// One observed frame, normalized. Records are immutable values once built
// and safe to hand between threads.
struct PacketRecord {
    uint64_t ts_micros = 0;
    std::string obs_point; // capturing collector tap
    std::array<uint8_t, 6> src_mac{};
    std::array<uint8_t, 6> dst_mac{};
    uint16_t ethertype = 0;
    std::optional<Ipv4Section> ip;
    std::optional<L4Section> l4;
    uint32_t wire_len = 0; // original frame length on the wire
    bool truncated = false;

    bool operator==(const PacketRecord&) const = default;
};

struct CaptureStats {
    uint64_t frames_total = 0;
    uint64_t frames_ip = 0;
    uint64_t frames_non_ip = 0;
    uint64_t frames_truncated = 0;
    uint64_t bytes_total = 0; // sum of wire_len

    bool operator==(const CaptureStats&) const = default;
};

enum class PcapErrc {
    bad_magic,
    unsupported_link_type,
    truncated_header,
    record_overrun,
    frame_too_short,
};

class PcapError : public std::runtime_error {
public:
    PcapError(PcapErrc code, const std::string& what)
        : std::runtime_error(what), code_(code) {}
    PcapErrc code() const { return code_; }

private:
    PcapErrc code_;
};

struct ParseResult {
    std::vector<PacketRecord> records;
    CaptureStats stats;
};

// Decodes one Ethernet II frame. The first min(frame.size(), snaplen) bytes
// are considered captured; decoding never reads past that boundary.
// Malformed L3/L4 degrades the record (ip/l4 absent, truncated set) instead
// of failing; only frames shorter than the 14-byte Ethernet header throw.
PacketRecord parse_frame(std::span<const uint8_t> frame, uint64_t ts_micros,
                         std::string_view obs_point, uint32_t snaplen);

// Classic pcap reader (both byte orders, linktype Ethernet only).
// obs_point is stamped on every record; the file format itself carries none.
ParseResult parse_pcap(std::span<const uint8_t> data, std::string_view obs_point = {});

// Same contract as parse_pcap, frame decoding fanned out across OpenMP
// threads. Output is byte-identical to the serial reader for any input.
ParseResult parse_pcap_parallel(std::span<const uint8_t> data, std::string_view obs_point = {});

// Writes classic little-endian pcap (magic 0xA1B2C3D4, v2.4, linktype 1).
// Frames are synthesized from record fields and zero-padded to wire_len;
// parse_pcap(write_pcap(x)) == x for non-truncated records.
std::vector<uint8_t> write_pcap(const std::vector<PacketRecord>& records, uint32_t snaplen = 65535);

std::vector<uint8_t> read_binary_file(const std::string& path);
void write_binary_file(const std::string& path, std::span<const uint8_t> data);

} // namespace segmon
