#pragma once

#include "segmon/config.hpp"
#include "segmon/pcap.hpp"
#include "segmon/prng.hpp"

#include <array>
#include <string>
#include <vector>

namespace segmon {

struct ProductionPacket {
    uint64_t packet_id = 0; // index after time-sorting; ledger key
    std::string src_host;
    std::string dst_host;
    PacketRecord packet; // ts_micros = NIC send time; taps rewrite ts/obs_point
};

// Deterministic locally-administered MAC derived from the host id.
std::array<uint8_t, 6> mac_for(const std::string& host_id);

// Draw schedule: one jitter draw per baseline request occurrence, sessions
// visited in (client, server, server_port) order, occurrences in time order.
// Attack generators consume no randomness. Output is sorted by send time
// (creation order breaks ties) and packet ids follow that order.
std::vector<ProductionPacket> generate_traffic(const TopologyConfig& config,
                                               const TrafficProfile& profile, double duration_s,
                                               SplitMix64& rng);

} // namespace segmon
