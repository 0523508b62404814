#pragma once

#include "segmon/detect.hpp"
#include "segmon/flow.hpp"

#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <vector>

namespace segmon {

struct ObsCounters {
    uint64_t fwd_pkts = 0;
    uint64_t fwd_bytes = 0;
    uint64_t rev_pkts = 0;
    uint64_t rev_bytes = 0;
    uint8_t flags_fwd = 0;
    uint8_t flags_rev = 0;

    bool operator==(const ObsCounters&) const = default;
};

// One logical flow as seen network-wide. Multiple taps observe the same
// packets, so canonical counters take the per-field max across observation
// points rather than summing.
struct GlobalFlow {
    FlowKey key;
    bool initiator_is_lo = false;
    uint64_t first_ts = 0;
    uint64_t last_ts = 0;
    std::map<std::string, ObsCounters> per_obs;

    ObsCounters canonical() const;

    bool operator==(const GlobalFlow&) const = default;
};

class GlobalView {
public:
    explicit GlobalView(uint32_t idle_timeout_s = 15);

    void merge(const FlowRecord& rec);
    void merge(const std::vector<FlowRecord>& batch);

    // Deterministic order: (key, initiator, first_ts).
    std::vector<GlobalFlow> flows() const;
    size_t flow_count() const;

    // Flattens the view back into flow records (one per observation point)
    // so a sub-aggregator can ship its whole view upstream; merging these
    // into a parent view with the same rule reproduces the child's clusters.
    std::vector<FlowRecord> export_records() const;

private:
    using Bucket = std::vector<GlobalFlow>; // sorted by first_ts, pairwise gap > idle
    uint64_t idle_us_;
    std::map<std::pair<FlowKey, bool>, Bucket> buckets_;
};

std::vector<Alarm> global_scan_detect(const GlobalView& view, const std::string& obs_point,
                                      const DetectorConfig& cfg);

struct ExportLedger {
    std::map<std::string, std::set<uint64_t>> delivered_cycles; // collector -> cycle numbers
    uint64_t expected_cycles = 0; // cycles numbered 1..expected_cycles
};

struct ReportContext {
    std::map<std::string, std::string> segment_of_obs; // obs_point -> segment label
    uint64_t tapped_packets = 0; // IP packets seen across all taps
    ExportLedger ledger;
};

struct SegmentTotals {
    std::string segment;
    uint64_t pkts = 0;
    uint64_t bytes = 0;
};

struct CoverageGap {
    std::string collector;
    std::vector<uint64_t> cycles;
};

struct TopTalker {
    uint32_t ip = 0;
    uint64_t bytes = 0;
};

struct GlobalReport {
    uint64_t range_first_us = 0;
    uint64_t range_last_us = 0;
    uint64_t flow_count = 0;
    std::vector<SegmentTotals> per_segment;
    double compression_ratio = 0.0;
    std::vector<Alarm> alarms;
    std::vector<CoverageGap> coverage_gaps;
    std::vector<TopTalker> top_talkers;
};

// Coverage rule: a collector missing >= 2 consecutive expected cycles gets a
// coverage_gap entry (all its missed cycles) plus a coverage_gap alarm.
GlobalReport build_report(const GlobalView& view, std::vector<Alarm> alarms,
                          const ReportContext& ctx, size_t top_n = 10);

std::string report_to_json(const GlobalReport& report);

} // namespace segmon
