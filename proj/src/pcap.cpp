#include "segmon/pcap.hpp"

#include <algorithm>
#include <cstring>
#include <fstream>

namespace segmon {

namespace {

constexpr uint32_t PCAP_MAGIC = 0xA1B2C3D4;
constexpr uint32_t PCAP_MAGIC_SWAPPED = 0xD4C3B2A1;
constexpr size_t GLOBAL_HEADER_LEN = 24;
constexpr size_t RECORD_HEADER_LEN = 16;
constexpr size_t ETH_HEADER_LEN = 14;

uint32_t load_u32(const uint8_t* p, bool big_endian) {
    if (big_endian)
        return (uint32_t(p[0]) << 24) | (uint32_t(p[1]) << 16) | (uint32_t(p[2]) << 8) | p[3];
    return uint32_t(p[0]) | (uint32_t(p[1]) << 8) | (uint32_t(p[2]) << 16) | (uint32_t(p[3]) << 24);
}

uint16_t load_u16_be(const uint8_t* p) {
    return uint16_t((p[0] << 8) | p[1]);
}

void push_u16_le(std::vector<uint8_t>& out, uint16_t v) {
    out.push_back(v & 0xFF);
    out.push_back(v >> 8);
}

void push_u32_le(std::vector<uint8_t>& out, uint32_t v) {
    out.push_back(v & 0xFF);
    out.push_back((v >> 8) & 0xFF);
    out.push_back((v >> 16) & 0xFF);
    out.push_back((v >> 24) & 0xFF);
}

void push_u16_be(std::vector<uint8_t>& out, uint16_t v) {
    out.push_back(v >> 8);
    out.push_back(v & 0xFF);
}

void push_u32_be(std::vector<uint8_t>& out, uint32_t v) {
    out.push_back((v >> 24) & 0xFF);
    out.push_back((v >> 16) & 0xFF);
    out.push_back((v >> 8) & 0xFF);
    out.push_back(v & 0xFF);
}

uint16_t ipv4_checksum(const uint8_t* hdr, size_t len) {
    uint32_t sum = 0;
    for (size_t i = 0; i + 1 < len; i += 2)
        sum += (uint32_t(hdr[i]) << 8) | hdr[i + 1];
    while (sum >> 16)
        sum = (sum & 0xFFFF) + (sum >> 16);
    return uint16_t(~sum);
}

struct RecordIndexEntry {
    size_t frame_offset;
    uint32_t incl_len;
    uint32_t orig_len;
    uint64_t ts_micros;
};

struct PcapIndex {
    bool big_endian = false;
    uint32_t snaplen = 0;
    std::vector<RecordIndexEntry> entries;
};

// Walks the file structure without touching frame payloads. All file-level
// error conditions are raised here, so frame decoding itself is total.
PcapIndex index_pcap(std::span<const uint8_t> data) {
    if (data.size() < 4)
        throw PcapError(PcapErrc::truncated_header, "stream too short for pcap magic");
    uint32_t raw = load_u32(data.data(), false);
    bool big_endian;
    if (raw == PCAP_MAGIC)
        big_endian = false;
    else if (raw == PCAP_MAGIC_SWAPPED)
        big_endian = true;
    else
        throw PcapError(PcapErrc::bad_magic, "not a classic microsecond pcap stream");
    if (data.size() < GLOBAL_HEADER_LEN)
        throw PcapError(PcapErrc::truncated_header, "stream too short for pcap global header");

    PcapIndex idx;
    idx.big_endian = big_endian;
    idx.snaplen = load_u32(data.data() + 16, big_endian);
    uint32_t network = load_u32(data.data() + 20, big_endian);
    if (network != 1)
        throw PcapError(PcapErrc::unsupported_link_type,
                        "link type " + std::to_string(network) + " unsupported (only 1/Ethernet)");

    size_t pos = GLOBAL_HEADER_LEN;
    while (pos < data.size()) {
        size_t remaining = data.size() - pos;
        if (remaining < RECORD_HEADER_LEN)
            throw PcapError(PcapErrc::truncated_header,
                            "record header needs 16 bytes, " + std::to_string(remaining) + " left");
        const uint8_t* h = data.data() + pos;
        uint32_t ts_sec = load_u32(h, big_endian);
        uint32_t ts_usec = load_u32(h + 4, big_endian);
        uint32_t incl_len = load_u32(h + 8, big_endian);
        uint32_t orig_len = load_u32(h + 12, big_endian);
        if (incl_len > remaining - RECORD_HEADER_LEN)
            throw PcapError(PcapErrc::record_overrun,
                            "incl_len " + std::to_string(incl_len) + " exceeds remaining bytes");
        idx.entries.push_back({pos + RECORD_HEADER_LEN, incl_len, orig_len,
                               uint64_t(ts_sec) * 1'000'000 + ts_usec});
        pos += RECORD_HEADER_LEN + incl_len;
    }
    return idx;
}

PacketRecord decode_entry(std::span<const uint8_t> data, const RecordIndexEntry& e,
                          std::string_view obs_point) {
    PacketRecord rec;
    if (e.incl_len < ETH_HEADER_LEN) {
        // Too short for even an Ethernet header: keep the file going, emit a
        // degraded record.
        rec.ts_micros = e.ts_micros;
        rec.obs_point = std::string(obs_point);
        rec.truncated = true;
    } else {
        rec = parse_frame(data.subspan(e.frame_offset, e.incl_len), e.ts_micros, obs_point,
                          e.incl_len);
    }
    rec.wire_len = std::max(e.orig_len, e.incl_len);
    if (e.incl_len < e.orig_len)
        rec.truncated = true;
    return rec;
}

CaptureStats stats_of(const std::vector<PacketRecord>& records) {
    CaptureStats st;
    for (const auto& r : records) {
        st.frames_total++;
        if (r.ip)
            st.frames_ip++;
        else
            st.frames_non_ip++;
        if (r.truncated)
            st.frames_truncated++;
        st.bytes_total += r.wire_len;
    }
    return st;
}

} // namespace

PacketRecord parse_frame(std::span<const uint8_t> frame, uint64_t ts_micros,
                         std::string_view obs_point, uint32_t snaplen) {
    size_t captured = std::min<size_t>(frame.size(), snaplen);
    if (captured < ETH_HEADER_LEN)
        throw PcapError(PcapErrc::frame_too_short,
                        "frame shorter than the 14-byte Ethernet header");

    PacketRecord rec;
    rec.ts_micros = ts_micros;
    rec.obs_point = std::string(obs_point);
    std::memcpy(rec.dst_mac.data(), frame.data(), 6);
    std::memcpy(rec.src_mac.data(), frame.data() + 6, 6);
    rec.ethertype = load_u16_be(frame.data() + 12);
    rec.wire_len = uint32_t(frame.size());
    rec.truncated = captured < frame.size();

    if (rec.ethertype != ETHERTYPE_IPV4)
        return rec;

    size_t ip_avail = captured - ETH_HEADER_LEN;
    const uint8_t* ip = frame.data() + ETH_HEADER_LEN;
    if (ip_avail < 20) {
        rec.truncated = true;
        return rec;
    }
    size_t ihl = size_t(ip[0] & 0x0F) * 4;
    if (ihl < 20 || ihl > ip_avail) {
        // Malformed or snapped IPv4 header: downgrade to L2-only, keep going.
        rec.truncated = true;
        return rec;
    }

    Ipv4Section sec;
    sec.total_len = load_u16_be(ip + 2);
    sec.protocol = ip[9];
    sec.src_ip = load_u32(ip + 12, true);
    sec.dst_ip = load_u32(ip + 16, true);
    rec.ip = sec;

    size_t l4_avail = ip_avail - ihl;
    const uint8_t* l4 = ip + ihl;
    if (sec.protocol == IPPROTO_TCP_NUM) {
        if (l4_avail < 14) { // up to and including the flags byte
            rec.truncated = true;
            return rec;
        }
        rec.l4 = L4Section{load_u16_be(l4), load_u16_be(l4 + 2), l4[13]};
    } else if (sec.protocol == IPPROTO_UDP_NUM) {
        if (l4_avail < 4) {
            rec.truncated = true;
            return rec;
        }
        rec.l4 = L4Section{load_u16_be(l4), load_u16_be(l4 + 2), 0};
    }
    return rec;
}

ParseResult parse_pcap(std::span<const uint8_t> data, std::string_view obs_point) {
    PcapIndex idx = index_pcap(data);
    ParseResult out;
    out.records.reserve(idx.entries.size());
    for (const auto& e : idx.entries)
        out.records.push_back(decode_entry(data, e, obs_point));
    out.stats = stats_of(out.records);
    return out;
}

ParseResult parse_pcap_parallel(std::span<const uint8_t> data, std::string_view obs_point) {
    PcapIndex idx = index_pcap(data);
    ParseResult out;
    out.records.resize(idx.entries.size());
    const int64_t n = int64_t(idx.entries.size());
#pragma omp parallel for schedule(static)
    for (int64_t i = 0; i < n; ++i)
        out.records[size_t(i)] = decode_entry(data, idx.entries[size_t(i)], obs_point);
    out.stats = stats_of(out.records);
    return out;
}

std::vector<uint8_t> write_pcap(const std::vector<PacketRecord>& records, uint32_t snaplen) {
    std::vector<uint8_t> out;
    push_u32_le(out, PCAP_MAGIC);
    push_u16_le(out, 2); // version 2.4
    push_u16_le(out, 4);
    push_u32_le(out, 0); // thiszone
    push_u32_le(out, 0); // sigfigs
    push_u32_le(out, snaplen);
    push_u32_le(out, 1); // linktype Ethernet

    std::vector<uint8_t> frame;
    for (const auto& r : records) {
        frame.clear();
        frame.insert(frame.end(), r.dst_mac.begin(), r.dst_mac.end());
        frame.insert(frame.end(), r.src_mac.begin(), r.src_mac.end());
        push_u16_be(frame, r.ethertype);
        if (r.ip) {
            size_t ip_off = frame.size();
            frame.push_back(0x45); // version 4, IHL 5
            frame.push_back(0);
            push_u16_be(frame, r.ip->total_len);
            push_u16_be(frame, 0); // id
            push_u16_be(frame, 0); // flags/frag
            frame.push_back(64);   // ttl
            frame.push_back(r.ip->protocol);
            push_u16_be(frame, 0); // checksum placeholder
            push_u32_be(frame, r.ip->src_ip);
            push_u32_be(frame, r.ip->dst_ip);
            uint16_t csum = ipv4_checksum(frame.data() + ip_off, 20);
            frame[ip_off + 10] = csum >> 8;
            frame[ip_off + 11] = csum & 0xFF;
            if (r.l4) {
                if (r.ip->protocol == IPPROTO_TCP_NUM) {
                    push_u16_be(frame, r.l4->src_port);
                    push_u16_be(frame, r.l4->dst_port);
                    push_u32_be(frame, 0); // seq
                    push_u32_be(frame, 0); // ack
                    frame.push_back(0x50); // data offset 5
                    frame.push_back(r.l4->tcp_flags);
                    push_u16_be(frame, 0xFFFF); // window
                    push_u16_be(frame, 0);      // checksum (not validated)
                    push_u16_be(frame, 0);      // urgent
                } else {
                    push_u16_be(frame, r.l4->src_port);
                    push_u16_be(frame, r.l4->dst_port);
                    uint16_t udp_len = r.ip->total_len >= 20 ? uint16_t(r.ip->total_len - 20) : 8;
                    push_u16_be(frame, udp_len);
                    push_u16_be(frame, 0); // checksum
                }
            }
        }
        if (frame.size() < r.wire_len)
            frame.resize(r.wire_len, 0);

        uint32_t orig_len = uint32_t(frame.size());
        uint32_t incl_len = std::min<uint32_t>(orig_len, snaplen);
        push_u32_le(out, uint32_t(r.ts_micros / 1'000'000));
        push_u32_le(out, uint32_t(r.ts_micros % 1'000'000));
        push_u32_le(out, incl_len);
        push_u32_le(out, orig_len);
        out.insert(out.end(), frame.begin(), frame.begin() + incl_len);
    }
    return out;
}

std::vector<uint8_t> read_binary_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw std::runtime_error("cannot open " + path);
    return std::vector<uint8_t>(std::istreambuf_iterator<char>(in),
                                std::istreambuf_iterator<char>());
}

void write_binary_file(const std::string& path, std::span<const uint8_t> data) {
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw std::runtime_error("cannot open " + path + " for writing");
    out.write(reinterpret_cast<const char*>(data.data()), std::streamsize(data.size()));
    if (!out)
        throw std::runtime_error("short write to " + path);
}

} // namespace segmon
