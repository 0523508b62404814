#include "segmon/traffic.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace segmon {

std::array<uint8_t, 6> mac_for(const std::string& host_id) {
    uint64_t h = 0xCBF29CE484222325ULL; // FNV-1a
    for (char c : host_id) {
        h ^= uint8_t(c);
        h *= 0x100000001B3ULL;
    }
    std::array<uint8_t, 6> mac;
    mac[0] = 0x02; // locally administered, unicast
    for (int i = 0; i < 5; i++)
        mac[i + 1] = uint8_t(h >> (8 * i));
    return mac;
}

namespace {

constexpr double RESPONSE_DELAY_S = 0.002;
constexpr uint32_t ATTACK_FRAME_BYTES = 60;

uint64_t to_micros(double seconds) {
    return uint64_t(std::llround(seconds * 1e6));
}

PacketRecord make_packet(uint64_t ts_us, const std::array<uint8_t, 6>& src_mac,
                         const std::array<uint8_t, 6>& dst_mac, uint32_t src_ip, uint32_t dst_ip,
                         uint16_t sport, uint16_t dport, uint8_t flags, uint32_t wire_len) {
    PacketRecord p;
    p.ts_micros = ts_us;
    p.src_mac = src_mac;
    p.dst_mac = dst_mac;
    p.ethertype = ETHERTYPE_IPV4;
    p.ip = Ipv4Section{src_ip, dst_ip, IPPROTO_TCP_NUM, uint16_t(wire_len - 14)};
    p.l4 = L4Section{sport, dport, flags};
    p.wire_len = wire_len;
    p.truncated = false;
    return p;
}

} // namespace

std::vector<ProductionPacket> generate_traffic(const TopologyConfig& config,
                                               const TrafficProfile& profile, double duration_s,
                                               SplitMix64& rng) {
    std::vector<ProductionPacket> out;

    auto host_ip = [&](const std::string& id) {
        const HostConfig* h = config.find_host(id);
        if (!h)
            throw ConfigError({"DanglingReference: unknown host '" + id + "'"});
        return h->ip;
    };
    auto emit = [&](double t_s, const std::string& src_host, const std::string& dst_host,
                    uint32_t src_ip, uint32_t dst_ip, uint16_t sport, uint16_t dport,
                    uint8_t flags, uint32_t wire_len) {
        ProductionPacket pp;
        pp.src_host = src_host;
        pp.dst_host = dst_host;
        pp.packet = make_packet(to_micros(t_s), mac_for(src_host), mac_for(dst_host), src_ip,
                                dst_ip, sport, dport, flags, wire_len);
        out.push_back(std::move(pp));
    };

    std::vector<size_t> order(profile.sessions.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](size_t a, size_t b) {
        const SessionSpec& x = profile.sessions[a];
        const SessionSpec& y = profile.sessions[b];
        return std::tie(x.client, x.server, x.server_port) <
               std::tie(y.client, y.server, y.server_port);
    });

    for (size_t idx : order) {
        const SessionSpec& s = profile.sessions[idx];
        uint32_t client_ip = host_ip(s.client);
        uint32_t server_ip = host_ip(s.server);
        uint16_t client_port = uint16_t(49152 + idx);
        for (uint64_t k = 0;; k++) {
            double base = s.start_offset_s + double(k) * s.period_s;
            if (base >= duration_s)
                break;
            double u = rng.next_double(); // one draw per occurrence, jittered or not
            double t = base + (2.0 * u - 1.0) * s.jitter_frac * s.period_s;
            if (t < 0.0)
                t = 0.0;
            emit(t, s.client, s.server, client_ip, server_ip, client_port, s.server_port,
                 TCP_PSH | TCP_ACK, s.request_bytes);
            emit(t + RESPONSE_DELAY_S, s.server, s.client, server_ip, client_ip, s.server_port,
                 client_port, TCP_PSH | TCP_ACK, s.response_bytes);
        }
    }

    for (const AttackSpec& a : profile.attacks) {
        switch (a.kind) {
        case AttackKind::syn_flood: {
            uint32_t src = host_ip(a.attacker);
            uint32_t dst = host_ip(a.target);
            for (uint64_t i = 0;; i++) {
                double t = a.start_s + double(i) / a.rate_pps;
                if (t >= a.stop_s)
                    break;
                emit(t, a.attacker, a.target, src, dst, uint16_t(40000 + i % 20000), a.port,
                     TCP_SYN, ATTACK_FRAME_BYTES);
            }
            break;
        }
        case AttackKind::port_scan: {
            uint32_t src = host_ip(a.attacker);
            uint32_t dst = host_ip(a.target);
            for (uint16_t i = 0; i < a.port_count; i++) {
                double t = a.start_s + double(i) * a.gap_s;
                if (t >= a.stop_s)
                    break;
                emit(t, a.attacker, a.target, src, dst, uint16_t(45000 + i),
                     uint16_t(a.port_start + i), TCP_SYN, ATTACK_FRAME_BYTES);
            }
            break;
        }
        case AttackKind::distributed_scan: {
            for (size_t e = 0; e < a.emitters.size(); e++) {
                const ScanEmitter& em = a.emitters[e];
                uint32_t src = a.src_ip ? *a.src_ip : host_ip(em.attacker);
                uint32_t dst = host_ip(em.target);
                for (uint16_t i = 0; i < em.port_count; i++) {
                    double t = a.start_s + double(i) * a.gap_s;
                    if (t >= a.stop_s)
                        break;
                    emit(t, em.attacker, em.target, src, dst, uint16_t(45000 + 1000 * e + i),
                         uint16_t(em.port_start + i), TCP_SYN, ATTACK_FRAME_BYTES);
                }
            }
            break;
        }
        case AttackKind::exfiltration: {
            uint32_t src = host_ip(a.attacker);
            uint32_t dst = host_ip(a.target);
            for (uint64_t i = 0;; i++) {
                double t = a.start_s + double(i) / a.rate_pps;
                if (t >= a.stop_s)
                    break;
                emit(t, a.attacker, a.target, src, dst, 49000, a.port, TCP_PSH | TCP_ACK,
                     a.packet_bytes);
            }
            break;
        }
        }
    }

    std::stable_sort(out.begin(), out.end(), [](const ProductionPacket& x,
                                                const ProductionPacket& y) {
        return x.packet.ts_micros < y.packet.ts_micros;
    });
    for (size_t i = 0; i < out.size(); i++)
        out[i].packet_id = i;
    return out;
}

} // namespace segmon
