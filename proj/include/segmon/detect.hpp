#pragma once

#include "segmon/flow.hpp"
#include "segmon/pcap.hpp"

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <tuple>
#include <vector>

namespace segmon {

struct DetectorConfig {
    uint32_t window_s = 10;
    double alpha = 0.1;
    double k_sigma = 3.0;
    double sigma_min = 1.0;
    uint32_t warmup_windows = 10;
    uint32_t scan_port_threshold = 20;
    uint32_t learning_windows = 30;
    uint32_t global_scan_threshold = 25;
};

// Service tuple: (src_ip, dst_ip, dst_port, protocol).
using ServiceTuple = std::tuple<uint32_t, uint32_t, uint16_t, uint8_t>;

struct WindowFeatures {
    uint64_t window_index = 0;
    std::string obs_point;
    uint64_t pkt_count = 0;
    uint64_t byte_count = 0;
    uint64_t syn_count = 0;
    std::map<uint32_t, std::set<std::pair<uint32_t, uint16_t>>> per_src_dst_ports;
    std::set<uint32_t> src_ips_seen;
    std::set<ServiceTuple> services_seen;

    bool operator==(const WindowFeatures&) const = default;
};

struct EwmaState {
    double mean = 0.0;
    double var = 0.0;
    uint64_t windows_seen = 0;

    bool operator==(const EwmaState&) const = default;
};

enum class AlarmKind {
    volume_anomaly,
    port_scan,
    new_entity,
    global_scan,
    coverage_gap,
    delivery_failure,
};

const char* alarm_kind_name(AlarmKind kind);
AlarmKind alarm_kind_from(const std::string& name);

struct Alarm {
    uint64_t ts_us = 0;
    std::string obs_point;
    AlarmKind kind = AlarmKind::volume_anomaly;
    std::string subject;
    double observed = 0.0;
    double baseline = 0.0;
    double threshold = 0.0;
    uint64_t window_index = 0;

    bool operator==(const Alarm&) const = default;
};

class DetectError : public std::runtime_error {
public:
    explicit DetectError(const std::string& what) : std::runtime_error(what) {}
};

uint64_t window_of(uint64_t ts_micros, const DetectorConfig& cfg);
uint64_t window_end_micros(uint64_t window_index, const DetectorConfig& cfg);

// Fold one record into a window's feature counters. Non-IP packets count
// toward pkt/byte totals only; flows contribute under their initiator as src.
void add_packet(WindowFeatures& w, const PacketRecord& packet);
void add_flow(WindowFeatures& w, const FlowRecord& flow);

std::vector<WindowFeatures> windowize(const std::vector<PacketRecord>& packets,
                                      const DetectorConfig& cfg);
std::vector<WindowFeatures> windowize(const std::vector<FlowRecord>& flows,
                                      const DetectorConfig& cfg);

struct EwmaResult {
    EwmaState state;
    double z = 0.0;
    std::optional<Alarm> alarm; // caller fills ts/obs/subject/window context
};

EwmaResult ewma_update(const EwmaState& state, double x, const DetectorConfig& cfg);

std::vector<Alarm> scan_detect(const WindowFeatures& window, const DetectorConfig& cfg);

struct EntityInventory {
    std::set<uint32_t> known_srcs;
    std::set<ServiceTuple> known_services;
    uint64_t windows_processed = 0;
};

std::vector<Alarm> new_entity_detect(EntityInventory& inventory, const WindowFeatures& window,
                                     const DetectorConfig& cfg);

// Full per-obs-point detector state: EWMA baselines over pkt_count and
// syn_count plus the entity inventory. process_window runs every local
// detector on one closed window and returns the alarms in a fixed order.
struct DetectorState {
    EwmaState pkt_ewma;
    EwmaState syn_ewma;
    EntityInventory inventory;
};

std::vector<Alarm> process_window(DetectorState& state, const WindowFeatures& window,
                                  const DetectorConfig& cfg);

std::string alarm_to_jsonl(const Alarm& alarm);
Alarm alarm_from_jsonl(const std::string& line);

} // namespace segmon
