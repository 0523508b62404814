#pragma once

#include "segmon/aggregate.hpp"
#include "segmon/config.hpp"
#include "segmon/mesh.hpp"
#include "segmon/pipeline.hpp"
#include "segmon/traffic.hpp"

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace segmon {

struct LedgerEntry {
    uint64_t packet_id = 0;
    uint64_t send_ts_us = 0;
    uint64_t deliver_ts_us = 0;

    bool operator==(const LedgerEntry&) const = default;
};

struct RunOutputs {
    // Tapped packet streams and local analysis results, keyed by collector.
    std::map<std::string, std::vector<PacketRecord>> collector_streams;
    std::map<std::string, std::vector<FlowRecord>> flows_by_collector;
    std::map<std::string, uint64_t> tapped_ip_packets_by_collector;
    std::map<std::string, uint64_t> tapped_ip_bytes_by_collector;
    uint64_t tapped_ip_packets = 0;

    std::vector<Alarm> alarms; // union of alarms raised anywhere, sorted
    std::vector<MeshLogRecord> mesh_log; // sorted by ts (stable)
    std::vector<LedgerEntry> ledger; // sorted by packet id
    GlobalReport report; // root aggregator's view
    ExportLedger root_ledger;
    std::vector<GlobalFlow> global_flows;
    uint64_t isolation_violations = 0;
};

RunOutputs run_scenario(const TopologyConfig& config, const TrafficProfile& profile,
                        double duration_s, uint64_t seed, bool monitoring = true);

std::string ledger_to_csv(const std::vector<LedgerEntry>& ledger);

// Writes ledger.csv always; flows.jsonl, alarms.jsonl, mesh.jsonl and
// report.json only when monitoring ran.
void write_outputs(const RunOutputs& outputs, const std::string& out_dir, bool monitoring);

} // namespace segmon
