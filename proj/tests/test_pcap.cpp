#include <doctest.h>

#include "segmon/pcap.hpp"
#include "segmon/prng.hpp"

#include <cstring>
#include <vector>

using namespace segmon;

namespace {

PacketRecord tcp_packet(uint64_t ts, uint32_t src, uint32_t dst, uint16_t sport, uint16_t dport,
                        uint8_t flags, uint32_t wire) {
    PacketRecord r;
    r.ts_micros = ts;
    r.obs_point = "cap";
    r.src_mac = {0x02, 0, 0, 0, 0, 1};
    r.dst_mac = {0x02, 0, 0, 0, 0, 2};
    r.ethertype = ETHERTYPE_IPV4;
    r.ip = Ipv4Section{src, dst, IPPROTO_TCP_NUM, uint16_t(wire - 14)};
    r.l4 = L4Section{sport, dport, flags};
    r.wire_len = wire;
    return r;
}

PacketRecord udp_packet(uint64_t ts, uint32_t src, uint32_t dst, uint16_t sport, uint16_t dport,
                        uint32_t wire) {
    PacketRecord r = tcp_packet(ts, src, dst, sport, dport, 0, wire);
    r.ip->protocol = IPPROTO_UDP_NUM;
    r.l4->tcp_flags = 0;
    return r;
}

PacketRecord arp_packet(uint64_t ts) {
    PacketRecord r;
    r.ts_micros = ts;
    r.obs_point = "cap";
    r.src_mac = {0x02, 0, 0, 0, 0, 3};
    r.dst_mac = {0xFF, 0xFF, 0xFF, 0xFF, 0xFF, 0xFF};
    r.ethertype = ETHERTYPE_ARP;
    r.wire_len = 60;
    return r;
}

uint32_t rd_u32le(const uint8_t* p) {
    return uint32_t(p[0]) | (uint32_t(p[1]) << 8) | (uint32_t(p[2]) << 16) | (uint32_t(p[3]) << 24);
}

void wr_u32be(uint8_t* p, uint32_t v) {
    p[0] = uint8_t(v >> 24);
    p[1] = uint8_t(v >> 16);
    p[2] = uint8_t(v >> 8);
    p[3] = uint8_t(v);
}

// Rewrites a little-endian capture into the byte-swapped (big-endian-header)
// variant; frame payloads are untouched.
std::vector<uint8_t> to_swapped(std::vector<uint8_t> bytes) {
    wr_u32be(bytes.data(), rd_u32le(bytes.data()));
    std::swap(bytes[4], bytes[5]); // version major
    std::swap(bytes[6], bytes[7]); // version minor
    for (size_t off : {8u, 12u, 16u, 20u})
        wr_u32be(bytes.data() + off, rd_u32le(bytes.data() + off));
    size_t pos = 24;
    while (pos < bytes.size()) {
        uint32_t incl = rd_u32le(bytes.data() + pos + 8);
        for (size_t i = 0; i < 16; i += 4)
            wr_u32be(bytes.data() + pos + i, rd_u32le(bytes.data() + pos + i));
        pos += 16 + incl;
    }
    return bytes;
}

} // namespace

TEST_CASE("pcap round trip preserves records and stats") {
    std::vector<PacketRecord> recs;
    recs.push_back(tcp_packet(1'000'000, 0x0A000101, 0x0A000103, 49152, 502, TCP_PSH | TCP_ACK, 74));
    recs.push_back(tcp_packet(1'002'000, 0x0A000103, 0x0A000101, 502, 49152, TCP_ACK, 120));
    recs.push_back(udp_packet(1'500'000, 0x0A000102, 0x0A000103, 5353, 5353, 90));
    recs.push_back(arp_packet(2'000'000));

    auto bytes = write_pcap(recs);
    ParseResult res = parse_pcap(bytes, "cap");
    CHECK(res.records == recs);
    CHECK(res.stats.frames_total == 4);
    CHECK(res.stats.frames_ip == 3);
    CHECK(res.stats.frames_non_ip == 1);
    CHECK(res.stats.frames_truncated == 0);
    CHECK(res.stats.bytes_total == 74 + 120 + 90 + 60);
}

TEST_CASE("byte-swapped capture parses identically") {
    std::vector<PacketRecord> recs;
    for (int i = 0; i < 20; i++)
        recs.push_back(tcp_packet(uint64_t(i) * 250'000, 0x0A000101 + uint32_t(i % 3), 0x0A000201,
                                  uint16_t(40000 + i), 502, TCP_SYN, 60 + uint32_t(i)));
    auto le = write_pcap(recs);
    auto be = to_swapped(le);
    REQUIRE(le != be);
    ParseResult a = parse_pcap(le, "cap");
    ParseResult b = parse_pcap(be, "cap");
    CHECK(a.records == b.records);
    CHECK(a.stats == b.stats);
}

TEST_CASE("malformed file headers are rejected") {
    auto good = write_pcap({arp_packet(0)});

    SUBCASE("garbage magic") {
        auto bad = good;
        bad[3] = 0x00;
        CHECK_THROWS_AS(parse_pcap(bad), PcapError);
        try {
            parse_pcap(bad);
        } catch (const PcapError& e) {
            CHECK(e.code() == PcapErrc::bad_magic);
        }
    }
    SUBCASE("nanosecond magic is not classic pcap") {
        auto bad = good;
        // 0xA1B23C4D little-endian
        bad[0] = 0x4D;
        bad[1] = 0x3C;
        bad[2] = 0xB2;
        bad[3] = 0xA1;
        try {
            parse_pcap(bad);
            FAIL("expected PcapError");
        } catch (const PcapError& e) {
            CHECK(e.code() == PcapErrc::bad_magic);
        }
    }
    SUBCASE("short global header") {
        std::vector<uint8_t> bad(good.begin(), good.begin() + 10);
        try {
            parse_pcap(bad);
            FAIL("expected PcapError");
        } catch (const PcapError& e) {
            CHECK(e.code() == PcapErrc::truncated_header);
        }
    }
    SUBCASE("non-ethernet link type") {
        auto bad = good;
        bad[20] = 101; // raw IP
        try {
            parse_pcap(bad);
            FAIL("expected PcapError");
        } catch (const PcapError& e) {
            CHECK(e.code() == PcapErrc::unsupported_link_type);
        }
    }
}

TEST_CASE("malformed record framing is rejected") {
    auto base = write_pcap({});
    SUBCASE("truncated record header") {
        auto bad = base;
        bad.insert(bad.end(), 8, 0);
        try {
            parse_pcap(bad);
            FAIL("expected PcapError");
        } catch (const PcapError& e) {
            CHECK(e.code() == PcapErrc::truncated_header);
        }
    }
    SUBCASE("incl_len overruns the buffer") {
        auto bad = base;
        uint8_t hdr[16] = {};
        hdr[8] = 100; // incl_len = 100, but only 10 payload bytes follow
        hdr[12] = 100;
        bad.insert(bad.end(), hdr, hdr + 16);
        bad.insert(bad.end(), 10, 0);
        try {
            parse_pcap(bad);
            FAIL("expected PcapError");
        } catch (const PcapError& e) {
            CHECK(e.code() == PcapErrc::record_overrun);
        }
    }
}

TEST_CASE("runt frame degrades instead of failing the file") {
    auto bytes = write_pcap({});
    uint8_t hdr[16] = {};
    hdr[0] = 3; // ts_sec
    hdr[8] = 10;
    hdr[12] = 10;
    bytes.insert(bytes.end(), hdr, hdr + 16);
    bytes.insert(bytes.end(), 10, 0xAB);
    ParseResult res = parse_pcap(bytes, "cap");
    REQUIRE(res.records.size() == 1);
    CHECK(res.records[0].truncated);
    CHECK(!res.records[0].ip);
    CHECK(res.records[0].wire_len == 10);
    CHECK(res.records[0].ts_micros == 3'000'000);
    CHECK(res.stats.frames_truncated == 1);
}

TEST_CASE("snaplen shorter than the frame degrades upper layers") {
    std::vector<PacketRecord> recs{tcp_packet(0, 0x0A000101, 0x0A000102, 1000, 2000, TCP_SYN, 74)};
    auto bytes = write_pcap(recs, 20); // eth header + 6 bytes of IP
    ParseResult res = parse_pcap(bytes, "cap");
    REQUIRE(res.records.size() == 1);
    const PacketRecord& r = res.records[0];
    CHECK(r.truncated);
    CHECK(r.wire_len == 74); // orig_len survives
    CHECK(r.ethertype == ETHERTYPE_IPV4);
    CHECK(!r.ip);
    CHECK(!r.l4);
}

TEST_CASE("parse_frame degrades malformed L3/L4 and rejects only sub-ethernet runts") {
    SUBCASE("shorter than ethernet header throws") {
        std::vector<uint8_t> runt(13, 0);
        CHECK_THROWS_AS(parse_frame(runt, 0, "cap", 65535), PcapError);
    }
    SUBCASE("bad IHL drops the IP section") {
        std::vector<uint8_t> frame(60, 0);
        frame[12] = 0x08; // ethertype 0x0800
        frame[13] = 0x00;
        frame[14] = 0x42; // version 4, IHL 2 (invalid)
        PacketRecord r = parse_frame(frame, 0, "cap", 65535);
        CHECK(!r.ip);
        CHECK(r.truncated);
    }
    SUBCASE("TCP header cut before the flags byte keeps L3, drops L4") {
        std::vector<uint8_t> frame(14 + 20 + 12, 0);
        frame[12] = 0x08;
        frame[13] = 0x00;
        frame[14] = 0x45;
        frame[23] = 6; // protocol TCP
        PacketRecord r = parse_frame(frame, 0, "cap", 65535);
        REQUIRE(r.ip);
        CHECK(r.ip->protocol == IPPROTO_TCP_NUM);
        CHECK(!r.l4);
        CHECK(r.truncated);
    }
    SUBCASE("non-TCP/UDP protocol yields no L4 and no truncation") {
        std::vector<uint8_t> frame(14 + 20 + 8, 0);
        frame[12] = 0x08;
        frame[13] = 0x00;
        frame[14] = 0x45;
        frame[23] = 1; // ICMP
        PacketRecord r = parse_frame(frame, 0, "cap", 65535);
        REQUIRE(r.ip);
        CHECK(!r.l4);
        CHECK(!r.truncated);
    }
}

TEST_CASE("parallel reader matches the serial reference byte for byte") {
    SplitMix64 rng(7);
    std::vector<PacketRecord> recs;
    for (int i = 0; i < 5000; i++) {
        uint64_t ts = uint64_t(i) * 137;
        switch (rng.next() % 3) {
        case 0:
            recs.push_back(tcp_packet(ts, uint32_t(rng.next()), uint32_t(rng.next()),
                                      uint16_t(rng.next()), uint16_t(rng.next()),
                                      uint8_t(rng.next() & 0x3F), 60 + uint32_t(rng.next() % 1400)));
            break;
        case 1:
            recs.push_back(udp_packet(ts, uint32_t(rng.next()), uint32_t(rng.next()),
                                      uint16_t(rng.next()), uint16_t(rng.next()),
                                      60 + uint32_t(rng.next() % 500)));
            break;
        default:
            recs.push_back(arp_packet(ts));
        }
    }
    auto bytes = write_pcap(recs);
    ParseResult ser = parse_pcap(bytes, "cap");
    ParseResult par = parse_pcap_parallel(bytes, "cap");
    CHECK(ser.records == par.records);
    CHECK(ser.stats == par.stats);
    CHECK(ser.records == recs);
}
