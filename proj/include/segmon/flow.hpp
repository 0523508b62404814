#pragma once

#include "segmon/pcap.hpp"

#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <tuple>
#include <vector>

namespace segmon {

// Canonical bidirectional 5-tuple: the (ip, port) pair that sorts lower under
// lexicographic order is the "lo" endpoint, so a packet and its reversed twin
// map to the same key.
struct FlowKey {
    uint32_t ip_lo = 0;
    uint32_t ip_hi = 0;
    uint16_t port_lo = 0;
    uint16_t port_hi = 0;
    uint8_t protocol = 0;

    auto tie() const { return std::tie(ip_lo, port_lo, ip_hi, port_hi, protocol); }
    bool operator==(const FlowKey& o) const { return tie() == o.tie(); }
    bool operator<(const FlowKey& o) const { return tie() < o.tie(); }
};

enum class ExportReason { idle_timeout, active_timeout, flush };

const char* export_reason_name(ExportReason r);

struct FlowRecord {
    FlowKey key;
    bool initiator_is_lo = true; // direction of the first observed packet
    uint64_t first_ts = 0;       // micros
    uint64_t last_ts = 0;
    uint64_t fwd_pkts = 0; // forward = initiator direction
    uint64_t fwd_bytes = 0;
    uint64_t rev_pkts = 0;
    uint64_t rev_bytes = 0;
    uint8_t tcp_flags_fwd = 0;
    uint8_t tcp_flags_rev = 0;
    std::string obs_point;
    ExportReason export_reason = ExportReason::flush;

    bool operator==(const FlowRecord&) const = default;
};

struct FlowTableConfig {
    uint32_t idle_timeout_s = 15;
    uint32_t active_timeout_s = 300;
};

class FlowError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Key plus whether the packet's source is the lo endpoint. nullopt for
// packets without an IP section (caller counts those, never flow-tracks).
std::optional<std::pair<FlowKey, bool>> canonical_key(const PacketRecord& packet);

// Per-observation-point flow cache. Single writer; eviction is driven purely
// by packet-time advance (update/expire) plus an explicit flush, so replaying
// the same packet sequence always yields the same exports.
class FlowTable {
public:
    explicit FlowTable(FlowTableConfig cfg = {}) : cfg_(cfg) {}

    // Merges one packet; returns flows exported by the timeout sweep that
    // runs first, ascending (first_ts, key). Throws FlowError on a packet
    // older than the table clock. Packets without an IP section are ignored.
    std::vector<FlowRecord> update(const PacketRecord& packet);

    // Timeout sweep without a packet (export cycle tick).
    std::vector<FlowRecord> expire(uint64_t now_micros);

    // Drains every live flow with reason flush; table is empty afterwards.
    std::vector<FlowRecord> flush(uint64_t now_micros);

    size_t live_flows() const { return live_.size(); }
    uint64_t clock() const { return clock_; }

private:
    struct LiveFlow {
        bool initiator_is_lo;
        uint64_t first_ts, last_ts;
        uint64_t fwd_pkts, fwd_bytes, rev_pkts, rev_bytes;
        uint8_t tcp_flags_fwd, tcp_flags_rev;
        std::string obs_point;
    };

    std::vector<FlowRecord> sweep(uint64_t now_micros);
    FlowRecord to_record(const FlowKey& key, const LiveFlow& f, ExportReason reason) const;

    FlowTableConfig cfg_;
    uint64_t clock_ = 0;
    std::map<FlowKey, LiveFlow> live_;
};

// flow_count / packet_count, the export channel's cost relative to raw
// packet granularity. Throws FlowError when packet_count is zero.
double compression_ratio(uint64_t packet_count, uint64_t flow_count);

// JSONL line (no trailing newline), field order fixed:
// ts_first_us, ts_last_us, ip_lo, ip_hi, port_lo, port_hi, proto,
// initiator_is_lo, fwd_pkts, fwd_bytes, rev_pkts, rev_bytes, flags_fwd,
// flags_rev, obs_point, reason
std::string flow_to_jsonl(const FlowRecord& r);
FlowRecord flow_from_jsonl(const std::string& line);

} // namespace segmon
