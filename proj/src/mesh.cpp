#include "segmon/mesh.hpp"

#include <json.hpp>

#include <algorithm>
#include <deque>
#include <limits>

namespace segmon {

const char* mesh_role_name(MeshRole role) {
    switch (role) {
    case MeshRole::collector: return "collector";
    case MeshRole::aggregator: return "aggregator";
    case MeshRole::relay: return "relay";
    }
    return "?";
}

MeshRole mesh_role_from(const std::string& name) {
    if (name == "collector") return MeshRole::collector;
    if (name == "aggregator") return MeshRole::aggregator;
    if (name == "relay") return MeshRole::relay;
    throw MeshError("unknown mesh role '" + name + "'");
}

const char* envelope_kind_name(EnvelopeKind kind) {
    switch (kind) {
    case EnvelopeKind::flow_batch: return "flow_batch";
    case EnvelopeKind::alarm_msg: return "alarm_msg";
    case EnvelopeKind::ack: return "ack";
    }
    return "?";
}

void MeshTopology::add_node(const std::string& id, MeshRole role) {
    if (nodes.count(id))
        throw MeshError("duplicate mesh node '" + id + "'");
    nodes.emplace(id, MeshNode{id, role, true});
}

void MeshTopology::add_link(const std::string& a, const std::string& b, uint64_t latency_us,
                            double loss_prob) {
    if (a == b)
        throw MeshError("self-link on mesh node '" + a + "'");
    if (!nodes.count(a))
        throw MeshError("mesh link references unknown node '" + a + "'");
    if (!nodes.count(b))
        throw MeshError("mesh link references unknown node '" + b + "'");
    if (loss_prob < 0.0 || loss_prob >= 1.0)
        throw MeshError("mesh link " + a + "-" + b + " loss_prob must be in [0,1)");
    MeshLink l;
    l.a = std::min(a, b);
    l.b = std::max(a, b);
    l.latency_us = latency_us;
    l.loss_prob = loss_prob;
    if (find_link(l.a, l.b))
        throw MeshError("duplicate mesh link " + l.a + "-" + l.b);
    links.push_back(std::move(l));
}

const MeshLink* MeshTopology::find_link(const std::string& a, const std::string& b) const {
    const std::string& lo = std::min(a, b);
    const std::string& hi = std::max(a, b);
    for (const MeshLink& l : links)
        if (l.a == lo && l.b == hi)
            return &l;
    return nullptr;
}

MeshLink* MeshTopology::find_link(const std::string& a, const std::string& b) {
    return const_cast<MeshLink*>(std::as_const(*this).find_link(a, b));
}

RoutingTable compute_routes(const MeshTopology& topo) {
    // Adjacency over currently-up nodes and links, neighbors kept sorted so
    // the lowest-id tie-break falls out of plain iteration.
    std::map<std::string, std::vector<std::string>> adj;
    for (const auto& [id, node] : topo.nodes)
        if (node.up)
            adj[id];
    for (const MeshLink& l : topo.links) {
        if (!l.up)
            continue;
        auto ita = adj.find(l.a);
        auto itb = adj.find(l.b);
        if (ita == adj.end() || itb == adj.end())
            continue;
        ita->second.push_back(l.b);
        itb->second.push_back(l.a);
    }
    for (auto& [id, ns] : adj)
        std::sort(ns.begin(), ns.end());

    constexpr uint32_t INF = std::numeric_limits<uint32_t>::max();
    std::map<std::string, std::map<std::string, uint32_t>> dist;
    for (const auto& [src, srcAdj] : adj) {
        (void)srcAdj;
        auto& d = dist[src];
        d[src] = 0;
        std::deque<std::string> q{src};
        while (!q.empty()) {
            std::string cur = q.front();
            q.pop_front();
            uint32_t dc = d[cur];
            for (const std::string& n : adj[cur]) {
                if (!d.count(n)) {
                    d[n] = dc + 1;
                    q.push_back(n);
                }
            }
        }
    }

    RoutingTable routes;
    for (const auto& [src, d] : dist) {
        for (const auto& [dst, dd] : d) {
            if (src == dst || dd == INF)
                continue;
            for (const std::string& n : adj[src]) {
                auto it = dist[n].find(dst);
                if (it != dist[n].end() && it->second == dd - 1) {
                    routes[{src, dst}] = n;
                    break; // neighbors sorted: first match is lowest id
                }
            }
        }
    }
    return routes;
}

TransmissionPlan mesh_send(const MeshEnvelope& env, const MeshTopology& topo,
                           const RoutingTable& routes, SplitMix64& rng) {
    TransmissionPlan plan;
    std::string cur = env.sender;
    uint64_t t = env.send_ts_us;
    std::set<std::string> visited{cur};
    while (cur != env.receiver) {
        auto it = routes.find({cur, env.receiver});
        if (it == routes.end()) {
            plan.outcome = TransmissionPlan::Outcome::no_route;
            return plan;
        }
        const std::string& next = it->second;
        const MeshLink* link = topo.find_link(cur, next);
        if (!link || !link->up) {
            plan.outcome = TransmissionPlan::Outcome::no_route;
            return plan;
        }
        t += link->latency_us;
        double draw = rng.next_double();
        HopEvent hop{t, cur, next, draw < link->loss_prob};
        plan.hops.push_back(hop);
        if (hop.dropped) {
            plan.outcome = TransmissionPlan::Outcome::dropped;
            return plan;
        }
        cur = next;
        if (!visited.insert(cur).second)
            throw MeshError("routing loop through '" + cur + "'");
    }
    plan.outcome = TransmissionPlan::Outcome::delivered;
    plan.deliver_ts_us = t;
    return plan;
}

const char* topology_action_name(TopologyEvent::Action action) {
    switch (action) {
    case TopologyEvent::Action::node_down: return "node_down";
    case TopologyEvent::Action::node_up: return "node_up";
    case TopologyEvent::Action::link_down: return "link_down";
    case TopologyEvent::Action::link_up: return "link_up";
    }
    return "?";
}

TopologyEvent::Action topology_action_from(const std::string& name) {
    if (name == "node_down") return TopologyEvent::Action::node_down;
    if (name == "node_up") return TopologyEvent::Action::node_up;
    if (name == "link_down") return TopologyEvent::Action::link_down;
    if (name == "link_up") return TopologyEvent::Action::link_up;
    throw MeshError("unknown topology action '" + name + "'");
}

void apply_topology_event(MeshTopology& topo, const TopologyEvent& event) {
    using Action = TopologyEvent::Action;
    switch (event.action) {
    case Action::node_down:
    case Action::node_up: {
        auto it = topo.nodes.find(event.id);
        if (it == topo.nodes.end())
            throw MeshError("topology event references unknown node '" + event.id + "'");
        it->second.up = (event.action == Action::node_up);
        break;
    }
    case Action::link_down:
    case Action::link_up: {
        MeshLink* l = topo.find_link(event.a, event.b);
        if (!l)
            throw MeshError("topology event references unknown link " + event.a + "-" + event.b);
        l->up = (event.action == Action::link_up);
        break;
    }
    }
}

uint64_t ReliableSenderState::alloc_seq(const std::string& receiver) {
    return next_seq[receiver]++;
}

bool ReliableReceiverState::accept(const std::string& sender, uint64_t seq) {
    return seen.insert({sender, seq}).second;
}

std::string mesh_log_to_jsonl(const MeshLogRecord& rec) {
    nlohmann::ordered_json j;
    j["ts_us"] = rec.ts_us;
    j["sender"] = rec.sender;
    j["receiver"] = rec.receiver;
    j["seq"] = rec.seq;
    j["kind"] = envelope_kind_name(rec.kind);
    j["event"] = rec.event;
    return j.dump();
}

} // namespace segmon
