#pragma once

#include "segmon/detect.hpp"
#include "segmon/flow.hpp"
#include "segmon/mesh.hpp"

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace segmon {

struct HostConfig {
    std::string id;
    uint32_t ip = 0;
};

struct SegmentConfig {
    std::string id;
    std::string switch_id;
    std::string collector_id;
    std::vector<HostConfig> hosts;
};

struct GatewayConfig {
    std::string id;
    std::string seg_a, seg_b;
    std::string collector_id;
};

struct ProductionLatencies {
    uint64_t host_switch_us = 50;
    uint64_t switch_gateway_us = 200;
};

struct AggregatorConfig {
    std::string id;
    std::vector<std::string> children; // collector or aggregator ids
};

struct TopologyConfig {
    uint64_t seed = 0;
    std::vector<SegmentConfig> segments;
    std::vector<GatewayConfig> gateways;
    ProductionLatencies latencies;
    MeshTopology mesh;
    std::vector<AggregatorConfig> aggregators;
    DetectorConfig detector;
    FlowTableConfig flow;
    ReliabilityConfig reliability;

    const SegmentConfig* segment_of_host(const std::string& host_id) const;
    const HostConfig* find_host(const std::string& host_id) const;
    const GatewayConfig* gateway_between(const std::string& seg_a, const std::string& seg_b) const;
    std::vector<std::string> collector_ids() const; // sorted
    std::string root_aggregator() const;
    const AggregatorConfig* find_aggregator(const std::string& id) const;
    // Parent aggregator of a collector or sub-aggregator; empty for the root.
    std::string parent_of(const std::string& id) const;
};

struct SessionSpec {
    std::string client, server;
    uint16_t server_port = 0;
    double period_s = 1.0;
    uint32_t request_bytes = 60;
    uint32_t response_bytes = 60;
    double jitter_frac = 0.0;
    double start_offset_s = 0.0;
};

enum class AttackKind { syn_flood, port_scan, distributed_scan, exfiltration };

const char* attack_kind_name(AttackKind kind);
AttackKind attack_kind_from(const std::string& name);

struct ScanEmitter {
    std::string attacker, target;
    uint16_t port_start = 0;
    uint16_t port_count = 0;
};

struct AttackSpec {
    AttackKind kind = AttackKind::syn_flood;
    std::string attacker, target;
    uint16_t port = 0; // syn_flood / exfiltration destination port
    uint16_t port_start = 0;
    uint16_t port_count = 0; // port_scan
    double rate_pps = 0.0; // syn_flood / exfiltration
    uint32_t packet_bytes = 0; // exfiltration frame size
    double gap_s = 0.0; // scans: inter-probe spacing
    std::optional<uint32_t> src_ip; // distributed_scan spoofed source
    std::vector<ScanEmitter> emitters; // distributed_scan
    double start_s = 0.0, stop_s = 0.0;
};

struct MeshEventSpec {
    double at_s = 0.0;
    TopologyEvent event;
};

struct TrafficProfile {
    std::vector<SessionSpec> sessions;
    std::vector<AttackSpec> attacks;
    std::vector<MeshEventSpec> mesh_events;
};

class ConfigError : public std::runtime_error {
public:
    explicit ConfigError(std::vector<std::string> violations);
    const std::vector<std::string>& violations() const { return violations_; }

private:
    std::vector<std::string> violations_;
};

TopologyConfig load_config(const std::string& json_text);
TopologyConfig load_config_file(const std::string& path);

TrafficProfile load_profile(const std::string& json_text);
TrafficProfile load_profile_file(const std::string& path);

// Cross-checks host references, gateway coverage for cross-segment sessions,
// attack windows vs. run duration, and mesh event references. Returns every
// violation found rather than stopping at the first.
std::vector<std::string> validate_profile_against(const TopologyConfig& config,
                                                  const TrafficProfile& profile,
                                                  double duration_s);

} // namespace segmon
