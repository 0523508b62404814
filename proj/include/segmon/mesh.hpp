#pragma once

#include "segmon/prng.hpp"

#include <cstdint>
#include <map>
#include <set>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace segmon {

enum class MeshRole { collector, aggregator, relay };

const char* mesh_role_name(MeshRole role);
MeshRole mesh_role_from(const std::string& name);

struct MeshNode {
    std::string id;
    MeshRole role = MeshRole::relay;
    bool up = true;
};

struct MeshLink {
    std::string a, b; // canonical: a < b
    uint64_t latency_us = 0;
    double loss_prob = 0.0;
    bool up = true;
};

class MeshError : public std::runtime_error {
public:
    explicit MeshError(const std::string& what) : std::runtime_error(what) {}
};

struct MeshTopology {
    std::map<std::string, MeshNode> nodes;
    std::vector<MeshLink> links;

    void add_node(const std::string& id, MeshRole role);
    // Links are undirected; endpoints are stored sorted.
    void add_link(const std::string& a, const std::string& b, uint64_t latency_us,
                  double loss_prob);
    const MeshLink* find_link(const std::string& a, const std::string& b) const;
    MeshLink* find_link(const std::string& a, const std::string& b);
};

// (src, dst) -> next hop from src. Pairs without an entry are unreachable.
using RoutingTable = std::map<std::pair<std::string, std::string>, std::string>;

RoutingTable compute_routes(const MeshTopology& topo);

enum class EnvelopeKind { flow_batch, alarm_msg, ack };

const char* envelope_kind_name(EnvelopeKind kind);

struct MeshEnvelope {
    std::string sender;
    std::string receiver;
    uint64_t seq = 0;
    EnvelopeKind kind = EnvelopeKind::flow_batch;
    std::string payload;
    uint64_t send_ts_us = 0;
};

struct HopEvent {
    uint64_t ts_us = 0; // arrival time at `to` (drop recorded at that same time)
    std::string from;
    std::string to;
    bool dropped = false;
};

struct TransmissionPlan {
    enum class Outcome { delivered, dropped, no_route };
    Outcome outcome = Outcome::no_route;
    std::vector<HopEvent> hops;
    uint64_t deliver_ts_us = 0; // meaningful only when delivered
};

// Walks the whole path at send time, drawing one loss decision per hop in hop
// order (a draw happens even on zero-loss links, keeping the consumed PRNG
// stream independent of link parameters). Topology changes after the send do
// not affect the returned plan.
TransmissionPlan mesh_send(const MeshEnvelope& env, const MeshTopology& topo,
                           const RoutingTable& routes, SplitMix64& rng);

struct TopologyEvent {
    enum class Action { node_down, node_up, link_down, link_up };
    Action action = Action::node_down;
    std::string id; // node events
    std::string a, b; // link events
};

const char* topology_action_name(TopologyEvent::Action action);
TopologyEvent::Action topology_action_from(const std::string& name);

void apply_topology_event(MeshTopology& topo, const TopologyEvent& event);

struct ReliabilityConfig {
    uint64_t rto_us = 500'000;
    uint32_t max_retries = 5;
    uint32_t export_interval_s = 30;
};

struct PendingTransmission {
    MeshEnvelope env;
    uint32_t attempts = 1; // original transmission counts as the first
};

// One seq counter per receiver, shared by flow_batch and alarm_msg envelopes.
struct ReliableSenderState {
    std::map<std::string, uint64_t> next_seq;
    std::map<std::pair<std::string, uint64_t>, PendingTransmission> pending; // (receiver, seq)

    uint64_t alloc_seq(const std::string& receiver);
};

struct ReliableReceiverState {
    std::set<std::pair<std::string, uint64_t>> seen; // (sender, seq)

    // True exactly on first receipt (application delivery); an ack is owed
    // either way.
    bool accept(const std::string& sender, uint64_t seq);
};

struct MeshLogRecord {
    uint64_t ts_us = 0;
    std::string sender;
    std::string receiver;
    uint64_t seq = 0;
    EnvelopeKind kind = EnvelopeKind::flow_batch;
    std::string event; // tx, drop, deliver, ack, retry, fail

    bool operator==(const MeshLogRecord&) const = default;
};

std::string mesh_log_to_jsonl(const MeshLogRecord& rec);

} // namespace segmon
