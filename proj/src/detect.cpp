#include "segmon/detect.hpp"
#include "segmon/util.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>

namespace segmon {

const char* alarm_kind_name(AlarmKind kind) {
    switch (kind) {
    case AlarmKind::volume_anomaly: return "volume_anomaly";
    case AlarmKind::port_scan: return "port_scan";
    case AlarmKind::new_entity: return "new_entity";
    case AlarmKind::global_scan: return "global_scan";
    case AlarmKind::coverage_gap: return "coverage_gap";
    case AlarmKind::delivery_failure: return "delivery_failure";
    }
    return "?";
}

AlarmKind alarm_kind_from(const std::string& name) {
    if (name == "volume_anomaly") return AlarmKind::volume_anomaly;
    if (name == "port_scan") return AlarmKind::port_scan;
    if (name == "new_entity") return AlarmKind::new_entity;
    if (name == "global_scan") return AlarmKind::global_scan;
    if (name == "coverage_gap") return AlarmKind::coverage_gap;
    if (name == "delivery_failure") return AlarmKind::delivery_failure;
    throw DetectError("unknown alarm kind '" + name + "'");
}

uint64_t window_of(uint64_t ts_micros, const DetectorConfig& cfg) {
    return ts_micros / (uint64_t(cfg.window_s) * 1'000'000);
}

uint64_t window_end_micros(uint64_t window_index, const DetectorConfig& cfg) {
    return (window_index + 1) * uint64_t(cfg.window_s) * 1'000'000;
}

void add_packet(WindowFeatures& w, const PacketRecord& packet) {
    w.pkt_count++;
    w.byte_count += packet.wire_len;
    if (!packet.ip)
        return;
    uint32_t src = packet.ip->src_ip;
    uint32_t dst = packet.ip->dst_ip;
    uint16_t dport = packet.l4 ? packet.l4->dst_port : 0;
    if (packet.ip->protocol == IPPROTO_TCP_NUM && packet.l4) {
        uint8_t f = packet.l4->tcp_flags;
        if ((f & TCP_SYN) && !(f & TCP_ACK))
            w.syn_count++;
    }
    w.per_src_dst_ports[src].insert({dst, dport});
    w.src_ips_seen.insert(src);
    w.services_seen.insert({src, dst, dport, packet.ip->protocol});
}

void add_flow(WindowFeatures& w, const FlowRecord& flow) {
    uint64_t pkts = flow.fwd_pkts + flow.rev_pkts;
    w.pkt_count += pkts;
    w.byte_count += flow.fwd_bytes + flow.rev_bytes;
    uint32_t src = flow.initiator_is_lo ? flow.key.ip_lo : flow.key.ip_hi;
    uint32_t dst = flow.initiator_is_lo ? flow.key.ip_hi : flow.key.ip_lo;
    uint16_t dport = flow.initiator_is_lo ? flow.key.port_hi : flow.key.port_lo;
    if (flow.key.protocol == IPPROTO_TCP_NUM) {
        if ((flow.tcp_flags_fwd & TCP_SYN) && !(flow.tcp_flags_fwd & TCP_ACK))
            w.syn_count += flow.fwd_pkts;
        if ((flow.tcp_flags_rev & TCP_SYN) && !(flow.tcp_flags_rev & TCP_ACK))
            w.syn_count += flow.rev_pkts;
    }
    w.per_src_dst_ports[src].insert({dst, dport});
    w.src_ips_seen.insert(src);
    w.services_seen.insert({src, dst, dport, flow.key.protocol});
}

namespace {

template <typename Rec, typename TsOf, typename Add>
std::vector<WindowFeatures> windowize_impl(const std::vector<Rec>& records,
                                           const DetectorConfig& cfg, TsOf ts_of, Add add) {
    std::map<std::pair<std::string, uint64_t>, WindowFeatures> bins;
    for (const Rec& r : records) {
        uint64_t idx = window_of(ts_of(r), cfg);
        auto key = std::make_pair(r.obs_point, idx);
        auto it = bins.find(key);
        if (it == bins.end()) {
            WindowFeatures w;
            w.window_index = idx;
            w.obs_point = r.obs_point;
            it = bins.emplace(key, std::move(w)).first;
        }
        add(it->second, r);
    }
    std::vector<WindowFeatures> out;
    out.reserve(bins.size());
    for (auto& [key, w] : bins)
        out.push_back(std::move(w));
    return out;
}

} // namespace

std::vector<WindowFeatures> windowize(const std::vector<PacketRecord>& packets,
                                      const DetectorConfig& cfg) {
    return windowize_impl(
        packets, cfg, [](const PacketRecord& p) { return p.ts_micros; },
        [](WindowFeatures& w, const PacketRecord& p) { add_packet(w, p); });
}

std::vector<WindowFeatures> windowize(const std::vector<FlowRecord>& flows,
                                      const DetectorConfig& cfg) {
    return windowize_impl(
        flows, cfg, [](const FlowRecord& f) { return f.first_ts; },
        [](WindowFeatures& w, const FlowRecord& f) { add_flow(w, f); });
}

EwmaResult ewma_update(const EwmaState& state, double x, const DetectorConfig& cfg) {
    if (!std::isfinite(x))
        throw DetectError("non-finite feature value fed to ewma_update");
    EwmaResult r;
    if (state.windows_seen == 0) {
        r.state.mean = x;
        r.state.var = 0.0;
        r.state.windows_seen = 1;
        r.z = 0.0;
        return r;
    }
    double sigma = std::max(std::sqrt(state.var), cfg.sigma_min);
    r.z = std::abs(x - state.mean) / sigma;
    if (state.windows_seen >= cfg.warmup_windows && r.z > cfg.k_sigma) {
        Alarm a;
        a.kind = AlarmKind::volume_anomaly;
        a.observed = x;
        a.baseline = state.mean;
        a.threshold = cfg.k_sigma * sigma;
        r.alarm = a;
    }
    double d = x - state.mean;
    r.state.mean = cfg.alpha * x + (1.0 - cfg.alpha) * state.mean;
    r.state.var = cfg.alpha * d * d + (1.0 - cfg.alpha) * state.var;
    r.state.windows_seen = state.windows_seen + 1;
    return r;
}

std::vector<Alarm> scan_detect(const WindowFeatures& window, const DetectorConfig& cfg) {
    std::vector<Alarm> out;
    for (const auto& [src, pairs] : window.per_src_dst_ports) {
        std::set<uint16_t> ports;
        for (const auto& [dst, port] : pairs)
            ports.insert(port);
        if (ports.size() > cfg.scan_port_threshold) {
            Alarm a;
            a.ts_us = window_end_micros(window.window_index, cfg);
            a.obs_point = window.obs_point;
            a.kind = AlarmKind::port_scan;
            a.subject = ipv4_to_string(src);
            a.observed = double(ports.size());
            a.baseline = 0.0;
            a.threshold = double(cfg.scan_port_threshold);
            a.window_index = window.window_index;
            out.push_back(std::move(a));
        }
    }
    return out;
}

std::vector<Alarm> new_entity_detect(EntityInventory& inventory, const WindowFeatures& window,
                                     const DetectorConfig& cfg) {
    std::vector<Alarm> out;
    bool learning = inventory.windows_processed < cfg.learning_windows;
    auto make_alarm = [&](const std::string& subject) {
        Alarm a;
        a.ts_us = window_end_micros(window.window_index, cfg);
        a.obs_point = window.obs_point;
        a.kind = AlarmKind::new_entity;
        a.subject = subject;
        a.window_index = window.window_index;
        out.push_back(std::move(a));
    };
    for (uint32_t src : window.src_ips_seen) {
        if (inventory.known_srcs.insert(src).second && !learning)
            make_alarm(ipv4_to_string(src));
    }
    for (const ServiceTuple& svc : window.services_seen) {
        if (inventory.known_services.insert(svc).second && !learning) {
            const auto& [src, dst, dport, proto] = svc;
            make_alarm(ipv4_to_string(src) + "->" + ipv4_to_string(dst) + ":" +
                       std::to_string(dport) + "/" + std::to_string(proto));
        }
    }
    inventory.windows_processed++;
    return out;
}

std::vector<Alarm> process_window(DetectorState& state, const WindowFeatures& window,
                                  const DetectorConfig& cfg) {
    std::vector<Alarm> out;
    auto run_ewma = [&](EwmaState& ewma, double x, const char* feature) {
        EwmaResult r = ewma_update(ewma, x, cfg);
        if (r.alarm) {
            r.alarm->ts_us = window_end_micros(window.window_index, cfg);
            r.alarm->obs_point = window.obs_point;
            r.alarm->subject = feature;
            r.alarm->window_index = window.window_index;
            out.push_back(std::move(*r.alarm));
        }
        ewma = r.state;
    };
    run_ewma(state.pkt_ewma, double(window.pkt_count), "pkt_count");
    run_ewma(state.syn_ewma, double(window.syn_count), "syn_count");
    for (Alarm& a : scan_detect(window, cfg))
        out.push_back(std::move(a));
    for (Alarm& a : new_entity_detect(state.inventory, window, cfg))
        out.push_back(std::move(a));
    return out;
}

std::string alarm_to_jsonl(const Alarm& alarm) {
    nlohmann::ordered_json j;
    j["ts_us"] = alarm.ts_us;
    j["obs_point"] = alarm.obs_point;
    j["kind"] = alarm_kind_name(alarm.kind);
    j["subject"] = alarm.subject;
    j["observed"] = alarm.observed;
    j["baseline"] = alarm.baseline;
    j["threshold"] = alarm.threshold;
    j["window_index"] = alarm.window_index;
    return j.dump();
}

Alarm alarm_from_jsonl(const std::string& line) {
    nlohmann::json j = nlohmann::json::parse(line);
    Alarm a;
    a.ts_us = j.at("ts_us").get<uint64_t>();
    a.obs_point = j.at("obs_point").get<std::string>();
    a.kind = alarm_kind_from(j.at("kind").get<std::string>());
    a.subject = j.at("subject").get<std::string>();
    a.observed = j.at("observed").get<double>();
    a.baseline = j.at("baseline").get<double>();
    a.threshold = j.at("threshold").get<double>();
    a.window_index = j.at("window_index").get<uint64_t>();
    return a;
}

} // namespace segmon
