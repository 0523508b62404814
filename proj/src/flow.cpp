#include "segmon/flow.hpp"
#include "segmon/util.hpp"

#include <json.hpp>

#include <algorithm>

namespace segmon {

const char* export_reason_name(ExportReason r) {
    switch (r) {
    case ExportReason::idle_timeout: return "idle_timeout";
    case ExportReason::active_timeout: return "active_timeout";
    case ExportReason::flush: return "flush";
    }
    return "?";
}

static ExportReason export_reason_from(const std::string& s) {
    if (s == "idle_timeout") return ExportReason::idle_timeout;
    if (s == "active_timeout") return ExportReason::active_timeout;
    if (s == "flush") return ExportReason::flush;
    throw FlowError("unknown export reason '" + s + "'");
}

std::optional<std::pair<FlowKey, bool>> canonical_key(const PacketRecord& packet) {
    if (!packet.ip)
        return std::nullopt;
    uint16_t sport = packet.l4 ? packet.l4->src_port : 0;
    uint16_t dport = packet.l4 ? packet.l4->dst_port : 0;
    auto src = std::make_pair(packet.ip->src_ip, sport);
    auto dst = std::make_pair(packet.ip->dst_ip, dport);
    bool src_is_lo = src <= dst;
    FlowKey key;
    key.protocol = packet.ip->protocol;
    if (src_is_lo) {
        key.ip_lo = src.first;
        key.port_lo = src.second;
        key.ip_hi = dst.first;
        key.port_hi = dst.second;
    } else {
        key.ip_lo = dst.first;
        key.port_lo = dst.second;
        key.ip_hi = src.first;
        key.port_hi = src.second;
    }
    return std::make_pair(key, src_is_lo);
}

FlowRecord FlowTable::to_record(const FlowKey& key, const LiveFlow& f, ExportReason reason) const {
    FlowRecord r;
    r.key = key;
    r.initiator_is_lo = f.initiator_is_lo;
    r.first_ts = f.first_ts;
    r.last_ts = f.last_ts;
    r.fwd_pkts = f.fwd_pkts;
    r.fwd_bytes = f.fwd_bytes;
    r.rev_pkts = f.rev_pkts;
    r.rev_bytes = f.rev_bytes;
    r.tcp_flags_fwd = f.tcp_flags_fwd;
    r.tcp_flags_rev = f.tcp_flags_rev;
    r.obs_point = f.obs_point;
    r.export_reason = reason;
    return r;
}

std::vector<FlowRecord> FlowTable::sweep(uint64_t now_micros) {
    const uint64_t idle_us = uint64_t(cfg_.idle_timeout_s) * 1'000'000;
    const uint64_t active_us = uint64_t(cfg_.active_timeout_s) * 1'000'000;
    std::vector<FlowRecord> out;
    for (auto it = live_.begin(); it != live_.end();) {
        const LiveFlow& f = it->second;
        if (f.last_ts + idle_us < now_micros) {
            out.push_back(to_record(it->first, f, ExportReason::idle_timeout));
            it = live_.erase(it);
        } else if (f.first_ts + active_us <= now_micros) {
            out.push_back(to_record(it->first, f, ExportReason::active_timeout));
            it = live_.erase(it);
        } else {
            ++it;
        }
    }
    std::sort(out.begin(), out.end(), [](const FlowRecord& a, const FlowRecord& b) {
        return std::tie(a.first_ts, a.key) < std::tie(b.first_ts, b.key);
    });
    return out;
}

std::vector<FlowRecord> FlowTable::update(const PacketRecord& packet) {
    auto ck = canonical_key(packet);
    if (!ck)
        return {};
    if (packet.ts_micros < clock_)
        throw FlowError("out-of-order timestamp: packet at " + std::to_string(packet.ts_micros) +
                        " behind table clock " + std::to_string(clock_));
    clock_ = packet.ts_micros;
    std::vector<FlowRecord> exported = sweep(packet.ts_micros);

    const auto& [key, src_is_lo] = *ck;
    uint8_t flags = (packet.ip->protocol == IPPROTO_TCP_NUM && packet.l4)
                        ? packet.l4->tcp_flags
                        : 0;
    auto it = live_.find(key);
    if (it == live_.end()) {
        LiveFlow f{};
        f.initiator_is_lo = src_is_lo;
        f.first_ts = f.last_ts = packet.ts_micros;
        f.fwd_pkts = 1;
        f.fwd_bytes = packet.wire_len;
        f.tcp_flags_fwd = flags;
        f.obs_point = packet.obs_point;
        live_.emplace(key, std::move(f));
    } else {
        LiveFlow& f = it->second;
        f.last_ts = packet.ts_micros;
        bool forward = (src_is_lo == f.initiator_is_lo);
        if (forward) {
            f.fwd_pkts++;
            f.fwd_bytes += packet.wire_len;
            f.tcp_flags_fwd |= flags;
        } else {
            f.rev_pkts++;
            f.rev_bytes += packet.wire_len;
            f.tcp_flags_rev |= flags;
        }
    }
    return exported;
}

std::vector<FlowRecord> FlowTable::expire(uint64_t now_micros) {
    if (now_micros < clock_)
        throw FlowError("expire at " + std::to_string(now_micros) + " behind table clock " +
                        std::to_string(clock_));
    clock_ = now_micros;
    return sweep(now_micros);
}

std::vector<FlowRecord> FlowTable::flush(uint64_t now_micros) {
    if (now_micros < clock_)
        throw FlowError("flush at " + std::to_string(now_micros) + " behind table clock " +
                        std::to_string(clock_));
    clock_ = now_micros;
    std::vector<FlowRecord> out;
    out.reserve(live_.size());
    for (const auto& [key, f] : live_)
        out.push_back(to_record(key, f, ExportReason::flush));
    live_.clear();
    std::sort(out.begin(), out.end(), [](const FlowRecord& a, const FlowRecord& b) {
        return std::tie(a.first_ts, a.key) < std::tie(b.first_ts, b.key);
    });
    return out;
}

double compression_ratio(uint64_t packet_count, uint64_t flow_count) {
    if (packet_count == 0)
        throw FlowError("compression ratio undefined for zero packets");
    return double(flow_count) / double(packet_count);
}

std::string flow_to_jsonl(const FlowRecord& r) {
    nlohmann::ordered_json j;
    j["ts_first_us"] = r.first_ts;
    j["ts_last_us"] = r.last_ts;
    j["ip_lo"] = ipv4_to_string(r.key.ip_lo);
    j["ip_hi"] = ipv4_to_string(r.key.ip_hi);
    j["port_lo"] = r.key.port_lo;
    j["port_hi"] = r.key.port_hi;
    j["proto"] = r.key.protocol;
    j["initiator_is_lo"] = r.initiator_is_lo;
    j["fwd_pkts"] = r.fwd_pkts;
    j["fwd_bytes"] = r.fwd_bytes;
    j["rev_pkts"] = r.rev_pkts;
    j["rev_bytes"] = r.rev_bytes;
    j["flags_fwd"] = r.tcp_flags_fwd;
    j["flags_rev"] = r.tcp_flags_rev;
    j["obs_point"] = r.obs_point;
    j["reason"] = export_reason_name(r.export_reason);
    return j.dump();
}

FlowRecord flow_from_jsonl(const std::string& line) {
    nlohmann::json j = nlohmann::json::parse(line);
    FlowRecord r;
    r.first_ts = j.at("ts_first_us").get<uint64_t>();
    r.last_ts = j.at("ts_last_us").get<uint64_t>();
    auto lo = ipv4_from_string(j.at("ip_lo").get<std::string>());
    auto hi = ipv4_from_string(j.at("ip_hi").get<std::string>());
    if (!lo || !hi)
        throw FlowError("malformed IPv4 address in flow line");
    r.key.ip_lo = *lo;
    r.key.ip_hi = *hi;
    r.key.port_lo = j.at("port_lo").get<uint16_t>();
    r.key.port_hi = j.at("port_hi").get<uint16_t>();
    r.key.protocol = j.at("proto").get<uint8_t>();
    r.initiator_is_lo = j.at("initiator_is_lo").get<bool>();
    r.fwd_pkts = j.at("fwd_pkts").get<uint64_t>();
    r.fwd_bytes = j.at("fwd_bytes").get<uint64_t>();
    r.rev_pkts = j.at("rev_pkts").get<uint64_t>();
    r.rev_bytes = j.at("rev_bytes").get<uint64_t>();
    r.tcp_flags_fwd = j.at("flags_fwd").get<uint8_t>();
    r.tcp_flags_rev = j.at("flags_rev").get<uint8_t>();
    r.obs_point = j.at("obs_point").get<std::string>();
    r.export_reason = export_reason_from(j.at("reason").get<std::string>());
    return r;
}

} // namespace segmon
