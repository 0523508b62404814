#include "segmon/pipeline.hpp"

#include <algorithm>

namespace segmon {

void sort_flows_canonical(std::vector<FlowRecord>& flows) {
    std::sort(flows.begin(), flows.end(), [](const FlowRecord& a, const FlowRecord& b) {
        return std::tie(a.first_ts, a.key) < std::tie(b.first_ts, b.key);
    });
}

CollectorPipeline::CollectorPipeline(std::string obs_point, FlowTableConfig flow_cfg,
                                     DetectorConfig det_cfg)
    : obs_(std::move(obs_point)), table_(flow_cfg), det_cfg_(det_cfg) {}

void CollectorPipeline::close_windows_before(uint64_t window_index) {
    if (open_window_ && open_window_->window_index < window_index) {
        for (Alarm& a : process_window(det_, *open_window_, det_cfg_))
            alarms_.push_back(std::move(a));
        open_window_.reset();
    }
}

void CollectorPipeline::feed(const PacketRecord& packet) {
    uint64_t w = window_of(packet.ts_micros, det_cfg_);
    close_windows_before(w);
    if (!open_window_) {
        open_window_.emplace();
        open_window_->window_index = w;
        open_window_->obs_point = obs_;
    }
    add_packet(*open_window_, packet);
    if (packet.ip) {
        ip_packets_++;
        ip_bytes_ += packet.wire_len;
        PacketRecord tagged = packet;
        tagged.obs_point = obs_;
        for (FlowRecord& f : table_.update(tagged))
            exports_.push_back(std::move(f));
    }
}

void CollectorPipeline::advance_to(uint64_t ts_micros) {
    close_windows_before(window_of(ts_micros, det_cfg_));
    for (FlowRecord& f : table_.expire(ts_micros))
        exports_.push_back(std::move(f));
}

void CollectorPipeline::finish(uint64_t ts_micros) {
    if (open_window_) {
        for (Alarm& a : process_window(det_, *open_window_, det_cfg_))
            alarms_.push_back(std::move(a));
        open_window_.reset();
    }
    for (FlowRecord& f : table_.flush(ts_micros))
        exports_.push_back(std::move(f));
}

std::vector<FlowRecord> CollectorPipeline::take_new_exports() {
    std::vector<FlowRecord> out(exports_.begin() + long(export_cursor_), exports_.end());
    export_cursor_ = exports_.size();
    return out;
}

std::vector<Alarm> CollectorPipeline::take_new_alarms() {
    std::vector<Alarm> out(alarms_.begin() + long(alarm_cursor_), alarms_.end());
    alarm_cursor_ = alarms_.size();
    return out;
}

StreamAnalysis analyze_stream(const std::vector<PacketRecord>& packets,
                              const std::string& obs_point, FlowTableConfig flow_cfg,
                              DetectorConfig det_cfg) {
    CollectorPipeline pipe(obs_point, flow_cfg, det_cfg);
    uint64_t last_ts = 0;
    for (const PacketRecord& p : packets) {
        pipe.feed(p);
        last_ts = p.ts_micros;
    }
    pipe.finish(last_ts);
    StreamAnalysis out;
    out.obs_point = obs_point;
    out.flows = pipe.exports();
    sort_flows_canonical(out.flows);
    out.alarms = pipe.alarms();
    out.ip_packets = pipe.ip_packets();
    out.ip_bytes = pipe.ip_bytes();
    return out;
}

std::vector<StreamAnalysis> analyze_streams_serial(const std::vector<ObsStream>& streams,
                                                   FlowTableConfig flow_cfg,
                                                   DetectorConfig det_cfg) {
    std::vector<StreamAnalysis> out(streams.size());
    for (size_t i = 0; i < streams.size(); i++)
        out[i] = analyze_stream(*streams[i].packets, streams[i].obs_point, flow_cfg, det_cfg);
    return out;
}

std::vector<StreamAnalysis> analyze_streams_parallel(const std::vector<ObsStream>& streams,
                                                     FlowTableConfig flow_cfg,
                                                     DetectorConfig det_cfg) {
    std::vector<StreamAnalysis> out(streams.size());
#pragma omp parallel for schedule(dynamic)
    for (long i = 0; i < long(streams.size()); i++)
        out[size_t(i)] =
            analyze_stream(*streams[size_t(i)].packets, streams[size_t(i)].obs_point, flow_cfg,
                           det_cfg);
    return out;
}

} // namespace segmon
