#include "segmon/config.hpp"
#include "segmon/util.hpp"

#include <json.hpp>

#include <algorithm>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

namespace segmon {

using nlohmann::json;

const char* attack_kind_name(AttackKind kind) {
    switch (kind) {
    case AttackKind::syn_flood: return "syn_flood";
    case AttackKind::port_scan: return "port_scan";
    case AttackKind::distributed_scan: return "distributed_scan";
    case AttackKind::exfiltration: return "exfiltration";
    }
    return "?";
}

AttackKind attack_kind_from(const std::string& name) {
    if (name == "syn_flood") return AttackKind::syn_flood;
    if (name == "port_scan") return AttackKind::port_scan;
    if (name == "distributed_scan") return AttackKind::distributed_scan;
    if (name == "exfiltration") return AttackKind::exfiltration;
    throw ConfigError({"SchemaViolation: unknown attack kind '" + name + "'"});
}

ConfigError::ConfigError(std::vector<std::string> violations)
    : std::runtime_error(violations.empty() ? "invalid configuration"
                                            : violations.front() +
                                                  (violations.size() > 1
                                                       ? " (+" + std::to_string(violations.size() - 1) +
                                                             " more)"
                                                       : "")),
      violations_(std::move(violations)) {}

namespace {

const json* get_field(const json& j, const std::string& where, const char* name, bool required,
                      std::vector<std::string>& v) {
    if (!j.is_object()) {
        if (required)
            v.push_back("SchemaViolation: " + where + ": expected an object");
        return nullptr;
    }
    auto it = j.find(name);
    if (it == j.end()) {
        if (required)
            v.push_back("SchemaViolation: " + where + ": missing field '" + name + "'");
        return nullptr;
    }
    return &*it;
}

std::string get_str(const json& j, const std::string& where, const char* name,
                    std::vector<std::string>& v, bool required = true,
                    const std::string& fallback = "") {
    const json* f = get_field(j, where, name, required, v);
    if (!f)
        return fallback;
    if (!f->is_string()) {
        v.push_back("SchemaViolation: " + where + ": field '" + name + "' must be a string");
        return fallback;
    }
    return f->get<std::string>();
}

uint64_t get_u64(const json& j, const std::string& where, const char* name,
                 std::vector<std::string>& v, bool required = true, uint64_t fallback = 0) {
    const json* f = get_field(j, where, name, required, v);
    if (!f)
        return fallback;
    if (!f->is_number_unsigned()) {
        v.push_back("SchemaViolation: " + where + ": field '" + name +
                    "' must be a nonnegative integer");
        return fallback;
    }
    return f->get<uint64_t>();
}

double get_dbl(const json& j, const std::string& where, const char* name,
               std::vector<std::string>& v, bool required = true, double fallback = 0.0) {
    const json* f = get_field(j, where, name, required, v);
    if (!f)
        return fallback;
    if (!f->is_number()) {
        v.push_back("SchemaViolation: " + where + ": field '" + name + "' must be a number");
        return fallback;
    }
    return f->get<double>();
}

const json* get_arr(const json& j, const std::string& where, const char* name, bool required,
                    std::vector<std::string>& v) {
    const json* f = get_field(j, where, name, required, v);
    if (!f)
        return nullptr;
    if (!f->is_array()) {
        v.push_back("SchemaViolation: " + where + ": field '" + name + "' must be an array");
        return nullptr;
    }
    return f;
}

uint32_t get_ip(const json& j, const std::string& where, const char* name,
                std::vector<std::string>& v) {
    std::string s = get_str(j, where, name, v);
    if (s.empty())
        return 0;
    auto ip = ipv4_from_string(s);
    if (!ip) {
        v.push_back("SchemaViolation: " + where + ": '" + s + "' is not a dotted-quad IPv4 address");
        return 0;
    }
    return *ip;
}

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw ConfigError({"SchemaViolation: cannot open '" + path + "'"});
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

json parse_document(const std::string& text) {
    json j = json::parse(text, nullptr, false);
    if (j.is_discarded())
        throw ConfigError({"SchemaViolation: input is not well-formed JSON"});
    return j;
}

} // namespace

const SegmentConfig* TopologyConfig::segment_of_host(const std::string& host_id) const {
    for (const SegmentConfig& s : segments)
        for (const HostConfig& h : s.hosts)
            if (h.id == host_id)
                return &s;
    return nullptr;
}

const HostConfig* TopologyConfig::find_host(const std::string& host_id) const {
    for (const SegmentConfig& s : segments)
        for (const HostConfig& h : s.hosts)
            if (h.id == host_id)
                return &h;
    return nullptr;
}

const GatewayConfig* TopologyConfig::gateway_between(const std::string& seg_a,
                                                     const std::string& seg_b) const {
    for (const GatewayConfig& g : gateways)
        if ((g.seg_a == seg_a && g.seg_b == seg_b) || (g.seg_a == seg_b && g.seg_b == seg_a))
            return &g;
    return nullptr;
}

std::vector<std::string> TopologyConfig::collector_ids() const {
    std::vector<std::string> out;
    for (const SegmentConfig& s : segments)
        out.push_back(s.collector_id);
    for (const GatewayConfig& g : gateways)
        out.push_back(g.collector_id);
    std::sort(out.begin(), out.end());
    return out;
}

const AggregatorConfig* TopologyConfig::find_aggregator(const std::string& id) const {
    for (const AggregatorConfig& a : aggregators)
        if (a.id == id)
            return &a;
    return nullptr;
}

std::string TopologyConfig::root_aggregator() const {
    std::set<std::string> children;
    for (const AggregatorConfig& a : aggregators)
        for (const std::string& c : a.children)
            children.insert(c);
    for (const AggregatorConfig& a : aggregators)
        if (!children.count(a.id))
            return a.id;
    return {};
}

std::string TopologyConfig::parent_of(const std::string& id) const {
    for (const AggregatorConfig& a : aggregators)
        for (const std::string& c : a.children)
            if (c == id)
                return a.id;
    return {};
}

TopologyConfig load_config(const std::string& json_text) {
    json doc = parse_document(json_text);
    std::vector<std::string> v;
    TopologyConfig cfg;
    if (!doc.is_object()) {
        throw ConfigError({"SchemaViolation: top-level document must be an object"});
    }

    cfg.seed = get_u64(doc, "config", "seed", v, false, 0);

    if (const json* segs = get_arr(doc, "config", "segments", true, v)) {
        for (size_t i = 0; i < segs->size(); i++) {
            const json& s = (*segs)[i];
            std::string where = "segments[" + std::to_string(i) + "]";
            SegmentConfig seg;
            seg.id = get_str(s, where, "id", v);
            seg.switch_id = get_str(s, where, "switch", v);
            seg.collector_id = get_str(s, where, "collector", v);
            if (const json* hosts = get_arr(s, where, "hosts", true, v)) {
                for (size_t k = 0; k < hosts->size(); k++) {
                    const json& h = (*hosts)[k];
                    std::string hwhere = where + ".hosts[" + std::to_string(k) + "]";
                    HostConfig host;
                    host.id = get_str(h, hwhere, "id", v);
                    host.ip = get_ip(h, hwhere, "ip", v);
                    seg.hosts.push_back(std::move(host));
                }
            }
            cfg.segments.push_back(std::move(seg));
        }
    }

    if (doc.contains("gateways")) {
        if (const json* gws = get_arr(doc, "config", "gateways", true, v)) {
            for (size_t i = 0; i < gws->size(); i++) {
                const json& g = (*gws)[i];
                std::string where = "gateways[" + std::to_string(i) + "]";
                GatewayConfig gw;
                gw.id = get_str(g, where, "id", v);
                gw.collector_id = get_str(g, where, "collector", v);
                if (const json* conn = get_arr(g, where, "connects", true, v)) {
                    if (conn->size() != 2 || !(*conn)[0].is_string() || !(*conn)[1].is_string()) {
                        v.push_back("SchemaViolation: " + where +
                                    ": field 'connects' must be an array of two segment ids");
                    } else {
                        gw.seg_a = (*conn)[0].get<std::string>();
                        gw.seg_b = (*conn)[1].get<std::string>();
                    }
                }
                cfg.gateways.push_back(std::move(gw));
            }
        }
    }

    if (doc.contains("latencies_us")) {
        const json& lat = doc["latencies_us"];
        cfg.latencies.host_switch_us = get_u64(lat, "latencies_us", "host_switch", v, false, 50);
        cfg.latencies.switch_gateway_us =
            get_u64(lat, "latencies_us", "switch_gateway", v, false, 200);
    }

    if (const json* mesh = get_field(doc, "config", "mesh", true, v)) {
        std::set<std::string> mesh_ids;
        if (const json* nodes = get_arr(*mesh, "mesh", "nodes", true, v)) {
            for (size_t i = 0; i < nodes->size(); i++) {
                const json& n = (*nodes)[i];
                std::string where = "mesh.nodes[" + std::to_string(i) + "]";
                std::string id = get_str(n, where, "id", v);
                std::string role_s = get_str(n, where, "role", v);
                if (id.empty())
                    continue;
                if (!mesh_ids.insert(id).second) {
                    v.push_back("SchemaViolation: duplicate mesh node '" + id + "'");
                    continue;
                }
                MeshRole role = MeshRole::relay;
                try {
                    role = mesh_role_from(role_s);
                } catch (const MeshError& e) {
                    v.push_back("SchemaViolation: " + where + ": " + e.what());
                }
                cfg.mesh.nodes.emplace(id, MeshNode{id, role, true});
            }
        }
        if (const json* links = get_arr(*mesh, "mesh", "links", true, v)) {
            for (size_t i = 0; i < links->size(); i++) {
                const json& l = (*links)[i];
                std::string where = "mesh.links[" + std::to_string(i) + "]";
                std::string a = get_str(l, where, "a", v);
                std::string b = get_str(l, where, "b", v);
                uint64_t latency = get_u64(l, where, "latency_us", v);
                double loss = get_dbl(l, where, "loss_prob", v, false, 0.0);
                if (a.empty() || b.empty())
                    continue;
                if (a == b) {
                    v.push_back("SchemaViolation: " + where + ": self-link on '" + a + "'");
                    continue;
                }
                bool known = true;
                for (const std::string& end : {a, b}) {
                    if (!mesh_ids.count(end)) {
                        v.push_back("DanglingReference: " + where + ": unknown mesh node '" + end +
                                    "'");
                        known = false;
                    }
                }
                if (loss < 0.0 || loss >= 1.0) {
                    v.push_back("SchemaViolation: " + where + ": loss_prob must be in [0,1)");
                    known = false;
                }
                if (!known)
                    continue;
                if (cfg.mesh.find_link(a, b)) {
                    v.push_back("SchemaViolation: duplicate mesh link " + a + "-" + b);
                    continue;
                }
                MeshLink link;
                link.a = std::min(a, b);
                link.b = std::max(a, b);
                link.latency_us = latency;
                link.loss_prob = loss;
                cfg.mesh.links.push_back(std::move(link));
            }
        }
    }

    if (const json* aggs = get_arr(doc, "config", "aggregators", true, v)) {
        for (size_t i = 0; i < aggs->size(); i++) {
            const json& a = (*aggs)[i];
            std::string where = "aggregators[" + std::to_string(i) + "]";
            AggregatorConfig agg;
            agg.id = get_str(a, where, "id", v);
            if (const json* children = get_arr(a, where, "children", true, v)) {
                for (const json& c : *children) {
                    if (!c.is_string())
                        v.push_back("SchemaViolation: " + where + ": children must be strings");
                    else
                        agg.children.push_back(c.get<std::string>());
                }
            }
            cfg.aggregators.push_back(std::move(agg));
        }
    }

    auto load_detector = [&](const json& d) {
        cfg.detector.window_s = uint32_t(get_u64(d, "detector", "window_s", v, false, 10));
        cfg.detector.alpha = get_dbl(d, "detector", "alpha", v, false, 0.1);
        cfg.detector.k_sigma = get_dbl(d, "detector", "k_sigma", v, false, 3.0);
        cfg.detector.sigma_min = get_dbl(d, "detector", "sigma_min", v, false, 1.0);
        cfg.detector.warmup_windows =
            uint32_t(get_u64(d, "detector", "warmup_windows", v, false, 10));
        cfg.detector.scan_port_threshold =
            uint32_t(get_u64(d, "detector", "scan_port_threshold", v, false, 20));
        cfg.detector.learning_windows =
            uint32_t(get_u64(d, "detector", "learning_windows", v, false, 30));
        cfg.detector.global_scan_threshold =
            uint32_t(get_u64(d, "detector", "global_scan_threshold", v, false, 25));
    };
    if (doc.contains("detector"))
        load_detector(doc["detector"]);
    if (doc.contains("flow")) {
        const json& f = doc["flow"];
        cfg.flow.idle_timeout_s = uint32_t(get_u64(f, "flow", "idle_timeout_s", v, false, 15));
        cfg.flow.active_timeout_s = uint32_t(get_u64(f, "flow", "active_timeout_s", v, false, 300));
    }
    if (doc.contains("reliability")) {
        const json& r = doc["reliability"];
        cfg.reliability.rto_us = get_u64(r, "reliability", "rto_us", v, false, 500'000);
        cfg.reliability.max_retries =
            uint32_t(get_u64(r, "reliability", "max_retries", v, false, 5));
        cfg.reliability.export_interval_s =
            uint32_t(get_u64(r, "reliability", "export_interval_s", v, false, 30));
    }

    // Cross-element checks.
    std::map<uint32_t, std::string> ip_owner;
    std::set<std::string> ids;
    std::set<std::string> segment_ids;
    auto claim_id = [&](const std::string& id, const char* what) {
        if (id.empty())
            return;
        if (!ids.insert(id).second)
            v.push_back(std::string("SchemaViolation: duplicate id '") + id + "' (" + what + ")");
    };
    for (const SegmentConfig& s : cfg.segments) {
        claim_id(s.id, "segment");
        segment_ids.insert(s.id);
        claim_id(s.switch_id, "switch");
        claim_id(s.collector_id, "collector");
        for (const HostConfig& h : s.hosts) {
            claim_id(h.id, "host");
            if (h.ip != 0) {
                auto [it, fresh] = ip_owner.emplace(h.ip, h.id);
                if (!fresh)
                    v.push_back("DuplicateIp: " + ipv4_to_string(h.ip) + " assigned to both '" +
                                it->second + "' and '" + h.id + "'");
            }
        }
    }
    for (const GatewayConfig& g : cfg.gateways) {
        claim_id(g.id, "gateway");
        claim_id(g.collector_id, "collector");
        for (const std::string& seg : {g.seg_a, g.seg_b})
            if (!seg.empty() && !segment_ids.count(seg))
                v.push_back("DanglingReference: gateway '" + g.id + "' references unknown segment '" +
                            seg + "'");
    }
    for (const AggregatorConfig& a : cfg.aggregators)
        claim_id(a.id, "aggregator");

    std::set<std::string> collector_set;
    for (const SegmentConfig& s : cfg.segments)
        collector_set.insert(s.collector_id);
    for (const GatewayConfig& g : cfg.gateways)
        collector_set.insert(g.collector_id);
    std::set<std::string> aggregator_set;
    for (const AggregatorConfig& a : cfg.aggregators)
        aggregator_set.insert(a.id);

    for (const std::string& c : collector_set)
        if (!c.empty() && !cfg.mesh.nodes.count(c))
            v.push_back("DanglingReference: mesh is missing a node for collector '" + c + "'");
    for (const std::string& a : aggregator_set)
        if (!a.empty() && !cfg.mesh.nodes.count(a))
            v.push_back("DanglingReference: mesh is missing a node for aggregator '" + a + "'");

    // Aggregator graph must be a tree over aggregators with collectors as leaves.
    std::map<std::string, int> indegree;
    for (const AggregatorConfig& a : cfg.aggregators) {
        for (const std::string& c : a.children) {
            if (!collector_set.count(c) && !aggregator_set.count(c))
                v.push_back("DanglingReference: aggregator '" + a.id +
                            "' references unknown child '" + c + "'");
            indegree[c]++;
        }
    }
    for (const auto& [id, deg] : indegree)
        if (deg > 1)
            v.push_back("CyclicAggregatorTree: '" + id + "' has " + std::to_string(deg) +
                        " parents");
    for (const std::string& c : collector_set)
        if (!c.empty() && !indegree.count(c))
            v.push_back("DanglingReference: collector '" + c +
                        "' is not a child of any aggregator");
    if (!cfg.aggregators.empty()) {
        std::vector<std::string> roots;
        for (const AggregatorConfig& a : cfg.aggregators)
            if (!indegree.count(a.id))
                roots.push_back(a.id);
        if (roots.empty()) {
            v.push_back("CyclicAggregatorTree: no root aggregator (every aggregator is a child)");
        } else if (roots.size() > 1) {
            std::string msg = "CyclicAggregatorTree: multiple root aggregators:";
            for (const std::string& r : roots)
                msg += " '" + r + "'";
            v.push_back(msg);
        } else {
            std::set<std::string> reached;
            std::vector<std::string> stack{roots[0]};
            while (!stack.empty()) {
                std::string cur = stack.back();
                stack.pop_back();
                if (!reached.insert(cur).second)
                    continue;
                if (const AggregatorConfig* a = cfg.find_aggregator(cur))
                    for (const std::string& c : a->children)
                        stack.push_back(c);
            }
            for (const AggregatorConfig& a : cfg.aggregators)
                if (!reached.count(a.id))
                    v.push_back("CyclicAggregatorTree: aggregator '" + a.id +
                                "' is not reachable from root '" + roots[0] + "'");
        }
    } else {
        v.push_back("SchemaViolation: at least one aggregator is required");
    }

    if (!(cfg.detector.alpha > 0.0 && cfg.detector.alpha < 1.0))
        v.push_back("SchemaViolation: detector.alpha must be in (0,1)");
    if (!(cfg.detector.k_sigma > 0.0))
        v.push_back("SchemaViolation: detector.k_sigma must be positive");
    if (!(cfg.detector.sigma_min > 0.0))
        v.push_back("SchemaViolation: detector.sigma_min must be positive");
    if (cfg.detector.window_s == 0)
        v.push_back("SchemaViolation: detector.window_s must be positive");
    if (cfg.reliability.rto_us == 0)
        v.push_back("SchemaViolation: reliability.rto_us must be positive");
    if (cfg.reliability.export_interval_s == 0)
        v.push_back("SchemaViolation: reliability.export_interval_s must be positive");

    if (!v.empty())
        throw ConfigError(std::move(v));
    return cfg;
}

TopologyConfig load_config_file(const std::string& path) {
    return load_config(read_file(path));
}

TrafficProfile load_profile(const std::string& json_text) {
    json doc = parse_document(json_text);
    std::vector<std::string> v;
    TrafficProfile profile;
    if (!doc.is_object())
        throw ConfigError({"SchemaViolation: top-level document must be an object"});

    if (doc.contains("sessions")) {
        if (const json* sessions = get_arr(doc, "profile", "sessions", true, v)) {
            for (size_t i = 0; i < sessions->size(); i++) {
                const json& s = (*sessions)[i];
                std::string where = "sessions[" + std::to_string(i) + "]";
                SessionSpec spec;
                spec.client = get_str(s, where, "client", v);
                spec.server = get_str(s, where, "server", v);
                spec.server_port = uint16_t(get_u64(s, where, "server_port", v));
                spec.period_s = get_dbl(s, where, "period_s", v);
                spec.request_bytes = uint32_t(get_u64(s, where, "request_bytes", v));
                spec.response_bytes = uint32_t(get_u64(s, where, "response_bytes", v));
                spec.jitter_frac = get_dbl(s, where, "jitter_frac", v, false, 0.0);
                spec.start_offset_s = get_dbl(s, where, "start_offset_s", v, false, 0.0);
                if (spec.period_s <= 0.0)
                    v.push_back("SchemaViolation: " + where + ": period_s must be positive");
                if (spec.jitter_frac < 0.0 || spec.jitter_frac >= 1.0)
                    v.push_back("SchemaViolation: " + where + ": jitter_frac must be in [0,1)");
                if (spec.start_offset_s < 0.0)
                    v.push_back("SchemaViolation: " + where + ": start_offset_s must be >= 0");
                profile.sessions.push_back(std::move(spec));
            }
        }
    }

    if (doc.contains("attacks")) {
        if (const json* attacks = get_arr(doc, "profile", "attacks", true, v)) {
            for (size_t i = 0; i < attacks->size(); i++) {
                const json& a = (*attacks)[i];
                std::string where = "attacks[" + std::to_string(i) + "]";
                AttackSpec spec;
                std::string kind_s = get_str(a, where, "kind", v);
                if (kind_s.empty())
                    continue;
                try {
                    spec.kind = attack_kind_from(kind_s);
                } catch (const ConfigError&) {
                    v.push_back("SchemaViolation: " + where + ": unknown attack kind '" + kind_s +
                                "'");
                    continue;
                }
                spec.start_s = get_dbl(a, where, "start_s", v);
                spec.stop_s = get_dbl(a, where, "stop_s", v);
                switch (spec.kind) {
                case AttackKind::syn_flood:
                    spec.attacker = get_str(a, where, "attacker", v);
                    spec.target = get_str(a, where, "target", v);
                    spec.port = uint16_t(get_u64(a, where, "port", v));
                    spec.rate_pps = get_dbl(a, where, "rate_pps", v);
                    if (spec.rate_pps <= 0.0)
                        v.push_back("SchemaViolation: " + where + ": rate_pps must be positive");
                    break;
                case AttackKind::port_scan:
                    spec.attacker = get_str(a, where, "attacker", v);
                    spec.target = get_str(a, where, "target", v);
                    spec.port_start = uint16_t(get_u64(a, where, "port_start", v));
                    spec.port_count = uint16_t(get_u64(a, where, "port_count", v));
                    spec.gap_s = get_dbl(a, where, "gap_s", v);
                    if (spec.port_count == 0)
                        v.push_back("SchemaViolation: " + where + ": port_count must be positive");
                    if (spec.gap_s <= 0.0)
                        v.push_back("SchemaViolation: " + where + ": gap_s must be positive");
                    break;
                case AttackKind::distributed_scan: {
                    spec.src_ip = get_ip(a, where, "src_ip", v);
                    spec.gap_s = get_dbl(a, where, "gap_s", v);
                    if (spec.gap_s <= 0.0)
                        v.push_back("SchemaViolation: " + where + ": gap_s must be positive");
                    if (const json* emitters = get_arr(a, where, "emitters", true, v)) {
                        for (size_t k = 0; k < emitters->size(); k++) {
                            const json& e = (*emitters)[k];
                            std::string ewhere = where + ".emitters[" + std::to_string(k) + "]";
                            ScanEmitter em;
                            em.attacker = get_str(e, ewhere, "attacker", v);
                            em.target = get_str(e, ewhere, "target", v);
                            em.port_start = uint16_t(get_u64(e, ewhere, "port_start", v));
                            em.port_count = uint16_t(get_u64(e, ewhere, "port_count", v));
                            if (em.port_count == 0)
                                v.push_back("SchemaViolation: " + ewhere +
                                            ": port_count must be positive");
                            spec.emitters.push_back(std::move(em));
                        }
                        if (spec.emitters.empty())
                            v.push_back("SchemaViolation: " + where +
                                        ": emitters must not be empty");
                    }
                    break;
                }
                case AttackKind::exfiltration:
                    spec.attacker = get_str(a, where, "attacker", v);
                    spec.target = get_str(a, where, "target", v);
                    spec.port = uint16_t(get_u64(a, where, "port", v));
                    spec.rate_pps = get_dbl(a, where, "rate_pps", v);
                    spec.packet_bytes = uint32_t(get_u64(a, where, "packet_bytes", v));
                    if (spec.rate_pps <= 0.0)
                        v.push_back("SchemaViolation: " + where + ": rate_pps must be positive");
                    break;
                }
                if (spec.stop_s <= spec.start_s)
                    v.push_back("SchemaViolation: " + where + ": stop_s must exceed start_s");
                if (spec.start_s < 0.0)
                    v.push_back("SchemaViolation: " + where + ": start_s must be >= 0");
                profile.attacks.push_back(std::move(spec));
            }
        }
    }

    if (doc.contains("mesh_events")) {
        if (const json* events = get_arr(doc, "profile", "mesh_events", true, v)) {
            for (size_t i = 0; i < events->size(); i++) {
                const json& e = (*events)[i];
                std::string where = "mesh_events[" + std::to_string(i) + "]";
                MeshEventSpec spec;
                spec.at_s = get_dbl(e, where, "at_s", v);
                std::string action_s = get_str(e, where, "action", v);
                if (action_s.empty())
                    continue;
                try {
                    spec.event.action = topology_action_from(action_s);
                } catch (const MeshError&) {
                    v.push_back("SchemaViolation: " + where + ": unknown action '" + action_s +
                                "'");
                    continue;
                }
                using Action = TopologyEvent::Action;
                if (spec.event.action == Action::node_down || spec.event.action == Action::node_up) {
                    spec.event.id = get_str(e, where, "id", v);
                } else {
                    spec.event.a = get_str(e, where, "a", v);
                    spec.event.b = get_str(e, where, "b", v);
                }
                if (spec.at_s < 0.0)
                    v.push_back("SchemaViolation: " + where + ": at_s must be >= 0");
                profile.mesh_events.push_back(std::move(spec));
            }
        }
    }

    if (!v.empty())
        throw ConfigError(std::move(v));
    return profile;
}

TrafficProfile load_profile_file(const std::string& path) {
    return load_profile(read_file(path));
}

std::vector<std::string> validate_profile_against(const TopologyConfig& config,
                                                  const TrafficProfile& profile,
                                                  double duration_s) {
    std::vector<std::string> v;
    auto check_pair = [&](const std::string& where, const std::string& src,
                          const std::string& dst) {
        const SegmentConfig* seg_src = config.segment_of_host(src);
        const SegmentConfig* seg_dst = config.segment_of_host(dst);
        if (!seg_src)
            v.push_back("DanglingReference: " + where + ": unknown host '" + src + "'");
        if (!seg_dst)
            v.push_back("DanglingReference: " + where + ": unknown host '" + dst + "'");
        if (seg_src && seg_dst && seg_src->id != seg_dst->id &&
            !config.gateway_between(seg_src->id, seg_dst->id))
            v.push_back("DanglingReference: " + where + ": no gateway connects '" + seg_src->id +
                        "' and '" + seg_dst->id + "'");
    };
    for (size_t i = 0; i < profile.sessions.size(); i++) {
        const SessionSpec& s = profile.sessions[i];
        check_pair("sessions[" + std::to_string(i) + "]", s.client, s.server);
    }
    for (size_t i = 0; i < profile.attacks.size(); i++) {
        const AttackSpec& a = profile.attacks[i];
        std::string where = "attacks[" + std::to_string(i) + "]";
        if (a.kind == AttackKind::distributed_scan) {
            for (const ScanEmitter& e : a.emitters)
                check_pair(where, e.attacker, e.target);
        } else {
            check_pair(where, a.attacker, a.target);
        }
        if (a.stop_s > duration_s)
            v.push_back("SchemaViolation: " + where + ": attack window exceeds run duration");
    }
    for (size_t i = 0; i < profile.mesh_events.size(); i++) {
        const MeshEventSpec& e = profile.mesh_events[i];
        std::string where = "mesh_events[" + std::to_string(i) + "]";
        using Action = TopologyEvent::Action;
        if (e.event.action == Action::node_down || e.event.action == Action::node_up) {
            if (!config.mesh.nodes.count(e.event.id))
                v.push_back("DanglingReference: " + where + ": unknown mesh node '" + e.event.id +
                            "'");
        } else if (!config.mesh.find_link(e.event.a, e.event.b)) {
            v.push_back("DanglingReference: " + where + ": unknown mesh link " + e.event.a + "-" +
                        e.event.b);
        }
    }
    return v;
}

} // namespace segmon
