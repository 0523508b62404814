#pragma once

#include "segmon/detect.hpp"
#include "segmon/flow.hpp"
#include "segmon/pcap.hpp"

#include <optional>
#include <string>
#include <vector>

namespace segmon {

// Per-observation-point analysis chain: flow table + windowed detectors.
// Driven either by the event engine (packets interleaved with timer
// callbacks) or by offline replay of a capture; both paths produce the same
// records for the same packet stream.
class CollectorPipeline {
public:
    CollectorPipeline(std::string obs_point, FlowTableConfig flow_cfg, DetectorConfig det_cfg);

    void feed(const PacketRecord& packet);
    // Timer-driven: close every window ending at or before ts and sweep the
    // flow table's idle/active timeouts.
    void advance_to(uint64_t ts_micros);
    // End of run: close the open window and flush all live flows.
    void finish(uint64_t ts_micros);

    std::vector<FlowRecord> take_new_exports();
    std::vector<Alarm> take_new_alarms();
    const std::vector<FlowRecord>& exports() const { return exports_; }
    const std::vector<Alarm>& alarms() const { return alarms_; }

    const std::string& obs_point() const { return obs_; }
    uint64_t ip_packets() const { return ip_packets_; }
    uint64_t ip_bytes() const { return ip_bytes_; }

private:
    void close_windows_before(uint64_t window_index);

    std::string obs_;
    FlowTable table_;
    DetectorConfig det_cfg_;
    DetectorState det_;
    std::optional<WindowFeatures> open_window_;
    std::vector<FlowRecord> exports_;
    std::vector<Alarm> alarms_;
    size_t export_cursor_ = 0;
    size_t alarm_cursor_ = 0;
    uint64_t ip_packets_ = 0;
    uint64_t ip_bytes_ = 0;
};

struct StreamAnalysis {
    std::string obs_point;
    std::vector<FlowRecord> flows; // sorted by (first_ts, key)
    std::vector<Alarm> alarms;
    uint64_t ip_packets = 0;
    uint64_t ip_bytes = 0;
};

// Offline replay of one capture through the pipeline; flows come back in the
// canonical (first_ts, key) order used everywhere flows are written out.
StreamAnalysis analyze_stream(const std::vector<PacketRecord>& packets,
                              const std::string& obs_point, FlowTableConfig flow_cfg,
                              DetectorConfig det_cfg);

struct ObsStream {
    std::string obs_point;
    const std::vector<PacketRecord>* packets = nullptr;
};

// Serial reference and OpenMP variant over independent observation points;
// outputs are identical, ordered by position in `streams`.
std::vector<StreamAnalysis> analyze_streams_serial(const std::vector<ObsStream>& streams,
                                                   FlowTableConfig flow_cfg,
                                                   DetectorConfig det_cfg);
std::vector<StreamAnalysis> analyze_streams_parallel(const std::vector<ObsStream>& streams,
                                                     FlowTableConfig flow_cfg,
                                                     DetectorConfig det_cfg);

void sort_flows_canonical(std::vector<FlowRecord>& flows);

} // namespace segmon
