#include "segmon/engine.hpp"

#include <json.hpp>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <functional>
#include <queue>
#include <sstream>

namespace segmon {

namespace {

constexpr uint64_t FINAL_GRACE_US = 1'000'000;

enum class Domain { production, monitoring };

struct Engine;

struct Event {
    uint64_t ts = 0;
    uint64_t seq = 0;
    Domain domain = Domain::production;
    std::function<void(Engine&)> fn;
};

struct EventAfter {
    bool operator()(const Event& a, const Event& b) const {
        return std::tie(a.ts, a.seq) > std::tie(b.ts, b.seq);
    }
};

struct AggState {
    GlobalView view{15};
    ExportLedger ledger;
    std::vector<Alarm> delivered_alarms;
};

struct Engine {
    const TopologyConfig& cfg;
    bool monitoring;
    uint64_t duration_us;
    uint64_t final_ts;
    uint64_t expected_cycles;
    SplitMix64 rng;

    std::priority_queue<Event, std::vector<Event>, EventAfter> queue;
    uint64_t next_seq = 0;
    Domain executing = Domain::production;
    uint64_t isolation_violations = 0;

    MeshTopology mesh;
    RoutingTable routes;

    std::map<std::string, CollectorPipeline> pipes;
    std::map<std::string, std::vector<PacketRecord>> streams;
    std::map<std::string, ReliableSenderState> senders;
    std::map<std::string, ReliableReceiverState> receivers;
    std::map<std::string, AggState> aggs;
    std::string root;

    std::vector<MeshLogRecord> mesh_log;
    std::vector<LedgerEntry> ledger;
    std::vector<Alarm> local_failure_alarms;

    Engine(const TopologyConfig& c, double duration_s, uint64_t seed, bool mon)
        : cfg(c), monitoring(mon), duration_us(uint64_t(duration_s * 1e6)),
          final_ts(duration_us + FINAL_GRACE_US), rng(seed), mesh(c.mesh) {
        uint64_t interval = uint64_t(cfg.reliability.export_interval_s) * 1'000'000;
        expected_cycles = duration_us % interval == 0 ? duration_us / interval
                                                      : duration_us / interval + 1;
        routes = compute_routes(mesh);
        for (const std::string& cid : cfg.collector_ids()) {
            pipes.emplace(cid, CollectorPipeline(cid, cfg.flow, cfg.detector));
            streams[cid];
            senders[cid];
        }
        for (const AggregatorConfig& a : cfg.aggregators) {
            aggs[a.id].view = GlobalView(cfg.flow.idle_timeout_s);
            receivers[a.id];
            senders[a.id];
        }
        root = cfg.root_aggregator();
        AggState& rootAgg = aggs[root];
        rootAgg.ledger.expected_cycles = expected_cycles;
        for (const std::string& cid : cfg.collector_ids())
            rootAgg.ledger.delivered_cycles[cid];
    }

    void schedule(uint64_t ts, Domain domain, std::function<void(Engine&)> fn) {
        if (executing == Domain::monitoring && domain == Domain::production)
            isolation_violations++;
        queue.push(Event{ts, next_seq++, domain, std::move(fn)});
    }

    void log(uint64_t ts, const std::string& sender, const std::string& receiver, uint64_t seq,
             EnvelopeKind kind, const char* event) {
        mesh_log.push_back(MeshLogRecord{ts, sender, receiver, seq, kind, event});
    }

    // Plans the whole traversal now (per-hop loss draws included) and logs the
    // hop-level tx/drop records; returns the delivery time if it gets through.
    std::optional<uint64_t> transmit(const MeshEnvelope& env) {
        TransmissionPlan plan = mesh_send(env, mesh, routes, rng);
        uint64_t hop_start = env.send_ts_us;
        for (const HopEvent& hop : plan.hops) {
            log(hop_start, hop.from, hop.to, env.seq, env.kind, "tx");
            if (hop.dropped)
                log(hop.ts_us, hop.from, hop.to, env.seq, env.kind, "drop");
            hop_start = hop.ts_us;
        }
        if (plan.outcome == TransmissionPlan::Outcome::delivered)
            return plan.deliver_ts_us;
        return std::nullopt;
    }

    void send_reliable(const std::string& from, const std::string& to, EnvelopeKind kind,
                       std::string payload, uint64_t ts) {
        MeshEnvelope env;
        env.sender = from;
        env.receiver = to;
        env.seq = senders[from].alloc_seq(to);
        env.kind = kind;
        env.payload = std::move(payload);
        env.send_ts_us = ts;
        senders[from].pending.emplace(std::make_pair(to, env.seq), PendingTransmission{env, 1});
        attempt(env);
    }

    void attempt(const MeshEnvelope& env) {
        if (auto deliver_ts = transmit(env)) {
            MeshEnvelope copy = env;
            schedule(*deliver_ts, Domain::monitoring,
                     [copy](Engine& e) { e.on_deliver(copy); });
        }
        auto key = std::make_pair(env.receiver, env.seq);
        std::string from = env.sender;
        schedule(env.send_ts_us + cfg.reliability.rto_us, Domain::monitoring,
                 [from, key](Engine& e) { e.on_retry_timer(from, key); });
    }

    void on_retry_timer(const std::string& from, const std::pair<std::string, uint64_t>& key) {
        auto it = senders[from].pending.find(key);
        if (it == senders[from].pending.end())
            return;
        PendingTransmission& p = it->second;
        uint64_t now_ts = current_ts;
        if (p.attempts > cfg.reliability.max_retries) {
            log(now_ts, from, key.first, key.second, p.env.kind, "fail");
            Alarm a;
            a.ts_us = now_ts;
            a.obs_point = from;
            a.kind = AlarmKind::delivery_failure;
            a.subject = key.first;
            a.observed = double(p.attempts);
            a.baseline = 0.0;
            a.threshold = double(cfg.reliability.max_retries);
            a.window_index = 0;
            local_failure_alarms.push_back(std::move(a));
            senders[from].pending.erase(it);
            return;
        }
        p.attempts++;
        log(now_ts, from, key.first, key.second, p.env.kind, "retry");
        MeshEnvelope env = p.env;
        env.send_ts_us = now_ts;
        attempt(env);
    }

    void on_deliver(const MeshEnvelope& env) {
        bool fresh = receivers[env.receiver].accept(env.sender, env.seq);
        if (fresh) {
            log(current_ts, env.sender, env.receiver, env.seq, env.kind, "deliver");
            if (env.kind == EnvelopeKind::flow_batch)
                handle_batch(env.receiver, env.payload);
            else if (env.kind == EnvelopeKind::alarm_msg)
                handle_alarm(env.receiver, env.payload);
        }
        MeshEnvelope ack;
        ack.sender = env.receiver;
        ack.receiver = env.sender;
        ack.seq = env.seq;
        ack.kind = EnvelopeKind::ack;
        ack.send_ts_us = current_ts;
        if (auto ack_ts = transmit(ack)) {
            std::string orig_sender = env.sender;
            std::string acker = env.receiver;
            uint64_t seq = env.seq;
            schedule(*ack_ts, Domain::monitoring, [orig_sender, acker, seq](Engine& e) {
                auto it = e.senders[orig_sender].pending.find({acker, seq});
                if (it != e.senders[orig_sender].pending.end()) {
                    e.senders[orig_sender].pending.erase(it);
                    e.log(e.current_ts, acker, orig_sender, seq, EnvelopeKind::ack, "ack");
                }
            });
        }
    }

    void handle_batch(const std::string& agg_id, const std::string& payload) {
        AggState& agg = aggs[agg_id];
        std::istringstream in(payload);
        std::string line;
        bool header = true;
        while (std::getline(in, line)) {
            if (line.empty())
                continue;
            if (header) {
                header = false;
                nlohmann::json h = nlohmann::json::parse(line);
                if (h.contains("ledger")) {
                    for (const auto& [cid, cycles] : h["ledger"].items())
                        for (uint64_t cyc : cycles.get<std::vector<uint64_t>>())
                            agg.ledger.delivered_cycles[cid].insert(cyc);
                } else {
                    agg.ledger.delivered_cycles[h.at("collector").get<std::string>()].insert(
                        h.at("cycle").get<uint64_t>());
                }
                continue;
            }
            agg.view.merge(flow_from_jsonl(line));
        }
    }

    void handle_alarm(const std::string& agg_id, const std::string& payload) {
        if (agg_id == root) {
            aggs[root].delivered_alarms.push_back(alarm_from_jsonl(payload));
            return;
        }
        std::string parent = cfg.parent_of(agg_id);
        if (!parent.empty())
            send_reliable(agg_id, parent, EnvelopeKind::alarm_msg, payload, current_ts);
    }

    std::string batch_header(const std::string& sender_id, uint64_t cycle, bool with_ledger) {
        nlohmann::ordered_json h;
        h["collector"] = sender_id;
        h["cycle"] = cycle;
        if (with_ledger) {
            nlohmann::json led = nlohmann::json::object();
            for (const auto& [cid, cycles] : aggs[sender_id].ledger.delivered_cycles)
                led[cid] = std::vector<uint64_t>(cycles.begin(), cycles.end());
            h["ledger"] = led;
        }
        return h.dump();
    }

    void flush_collector_alarms(const std::string& cid, uint64_t ts) {
        std::string parent = cfg.parent_of(cid);
        for (const Alarm& a : pipes.at(cid).take_new_alarms())
            if (!parent.empty())
                send_reliable(cid, parent, EnvelopeKind::alarm_msg, alarm_to_jsonl(a), ts);
    }

    void export_cycle(const std::string& cid, uint64_t cycle, uint64_t ts) {
        CollectorPipeline& pipe = pipes.at(cid);
        pipe.advance_to(ts);
        flush_collector_alarms(cid, ts);
        std::string payload = batch_header(cid, cycle, false);
        for (const FlowRecord& f : pipe.take_new_exports())
            payload += "\n" + flow_to_jsonl(f);
        std::string parent = cfg.parent_of(cid);
        if (!parent.empty())
            send_reliable(cid, parent, EnvelopeKind::flow_batch, payload, ts);
    }

    void summary_cycle(const std::string& agg_id, uint64_t cycle, uint64_t ts) {
        std::string parent = cfg.parent_of(agg_id);
        if (parent.empty())
            return;
        std::string payload = batch_header(agg_id, cycle, true);
        for (const FlowRecord& f : aggs[agg_id].view.export_records())
            payload += "\n" + flow_to_jsonl(f);
        send_reliable(agg_id, parent, EnvelopeKind::flow_batch, payload, ts);
    }

    uint64_t current_ts = 0;

    void run_queue() {
        while (!queue.empty()) {
            Event ev = queue.top();
            queue.pop();
            current_ts = ev.ts;
            executing = ev.domain;
            ev.fn(*this);
        }
        executing = Domain::production;
    }
};

struct TapPoint {
    std::string collector;
    uint64_t ts_us;
};

struct PacketPath {
    std::vector<TapPoint> taps;
    uint64_t deliver_ts_us;
};

PacketPath path_of(const TopologyConfig& cfg, const ProductionPacket& pp) {
    const SegmentConfig* src_seg = cfg.segment_of_host(pp.src_host);
    const SegmentConfig* dst_seg = cfg.segment_of_host(pp.dst_host);
    uint64_t hs = cfg.latencies.host_switch_us;
    uint64_t sg = cfg.latencies.switch_gateway_us;
    uint64_t t0 = pp.packet.ts_micros;
    PacketPath path;
    if (src_seg->id == dst_seg->id) {
        path.taps.push_back({src_seg->collector_id, t0 + hs});
        path.deliver_ts_us = t0 + 2 * hs;
    } else {
        const GatewayConfig* gw = cfg.gateway_between(src_seg->id, dst_seg->id);
        path.taps.push_back({src_seg->collector_id, t0 + hs});
        path.taps.push_back({gw->collector_id, t0 + hs + sg});
        path.taps.push_back({dst_seg->collector_id, t0 + hs + 2 * sg});
        path.deliver_ts_us = t0 + 2 * hs + 2 * sg;
    }
    return path;
}

} // namespace

RunOutputs run_scenario(const TopologyConfig& config, const TrafficProfile& profile,
                        double duration_s, uint64_t seed, bool monitoring) {
    {
        std::vector<std::string> violations =
            validate_profile_against(config, profile, duration_s);
        if (!violations.empty())
            throw ConfigError(std::move(violations));
    }

    Engine eng(config, duration_s, seed, monitoring);
    std::vector<ProductionPacket> packets =
        generate_traffic(config, profile, duration_s, eng.rng);

    // Group 1: production traversal (ledger) and tap copies.
    for (const ProductionPacket& pp : packets) {
        PacketPath path = path_of(config, pp);
        if (monitoring) {
            for (const TapPoint& tap : path.taps) {
                PacketRecord copy = pp.packet;
                copy.ts_micros = tap.ts_us;
                copy.obs_point = tap.collector;
                std::string cid = tap.collector;
                eng.schedule(tap.ts_us, Domain::monitoring, [copy, cid](Engine& e) {
                    e.streams[cid].push_back(copy);
                    e.pipes.at(cid).feed(copy);
                });
            }
        }
        uint64_t pid = pp.packet_id;
        uint64_t send_ts = pp.packet.ts_micros;
        uint64_t deliver_ts = path.deliver_ts_us;
        eng.schedule(deliver_ts, Domain::production, [pid, send_ts, deliver_ts](Engine& e) {
            e.ledger.push_back(LedgerEntry{pid, send_ts, deliver_ts});
        });
    }

    uint64_t interval_us = uint64_t(config.reliability.export_interval_s) * 1'000'000;
    uint64_t window_us = uint64_t(config.detector.window_s) * 1'000'000;

    if (monitoring) {
        // Group 2: scripted mesh failures/repairs.
        for (const MeshEventSpec& ev : profile.mesh_events) {
            TopologyEvent tev = ev.event;
            eng.schedule(uint64_t(ev.at_s * 1e6), Domain::monitoring, [tev](Engine& e) {
                apply_topology_event(e.mesh, tev);
                e.routes = compute_routes(e.mesh);
            });
        }

        // Group 3: window-boundary timers per collector.
        for (uint64_t t = window_us; t <= eng.duration_us; t += window_us) {
            for (auto& [cid, pipe] : eng.pipes) {
                (void)pipe;
                std::string id = cid;
                eng.schedule(t, Domain::monitoring, [id, t](Engine& e) {
                    e.pipes.at(id).advance_to(t);
                    e.flush_collector_alarms(id, t);
                });
            }
        }

        // Group 4: export cycles 1..K-1 plus sub-aggregator summaries.
        for (uint64_t k = 1; k < eng.expected_cycles; k++) {
            uint64_t t = k * interval_us;
            for (auto& [cid, pipe] : eng.pipes) {
                (void)pipe;
                std::string id = cid;
                eng.schedule(t, Domain::monitoring,
                             [id, k, t](Engine& e) { e.export_cycle(id, k, t); });
            }
        }
        for (uint64_t k = 1; k < eng.expected_cycles; k++) {
            uint64_t t = k * interval_us + interval_us / 2;
            for (const AggregatorConfig& a : config.aggregators) {
                if (config.parent_of(a.id).empty())
                    continue;
                std::string id = a.id;
                eng.schedule(t, Domain::monitoring,
                             [id, k, t](Engine& e) { e.summary_cycle(id, k, t); });
            }
        }

        // Group 5: final flush as cycle K, then final summaries.
        uint64_t final_ts = eng.final_ts;
        uint64_t final_cycle = eng.expected_cycles;
        eng.schedule(final_ts, Domain::monitoring, [final_ts, final_cycle](Engine& e) {
            for (auto& [cid, pipe] : e.pipes) {
                pipe.finish(final_ts);
                e.flush_collector_alarms(cid, final_ts);
                std::string payload = e.batch_header(cid, final_cycle, false);
                for (const FlowRecord& f : pipe.take_new_exports())
                    payload += "\n" + flow_to_jsonl(f);
                std::string parent = e.cfg.parent_of(cid);
                if (!parent.empty())
                    e.send_reliable(cid, parent, EnvelopeKind::flow_batch, payload, final_ts);
            }
        });
        uint64_t summary_ts = eng.final_ts + FINAL_GRACE_US;
        for (const AggregatorConfig& a : config.aggregators) {
            if (config.parent_of(a.id).empty())
                continue;
            std::string id = a.id;
            eng.schedule(summary_ts, Domain::monitoring, [id, final_cycle, summary_ts](Engine& e) {
                e.summary_cycle(id, final_cycle, summary_ts);
            });
        }
    }

    eng.run_queue();

    RunOutputs out;
    std::sort(eng.ledger.begin(), eng.ledger.end(),
              [](const LedgerEntry& a, const LedgerEntry& b) { return a.packet_id < b.packet_id; });
    out.ledger = std::move(eng.ledger);
    out.isolation_violations = eng.isolation_violations;

    if (monitoring) {
        for (auto& [cid, pipe] : eng.pipes) {
            out.collector_streams[cid] = std::move(eng.streams[cid]);
            std::vector<FlowRecord> flows = pipe.exports();
            sort_flows_canonical(flows);
            out.flows_by_collector[cid] = std::move(flows);
            out.tapped_ip_packets_by_collector[cid] = pipe.ip_packets();
            out.tapped_ip_bytes_by_collector[cid] = pipe.ip_bytes();
            out.tapped_ip_packets += pipe.ip_packets();
        }

        AggState& rootAgg = eng.aggs[eng.root];
        std::vector<Alarm> report_alarms = rootAgg.delivered_alarms;
        std::vector<Alarm> global_alarms =
            global_scan_detect(rootAgg.view, eng.root, config.detector);
        for (const Alarm& a : global_alarms)
            report_alarms.push_back(a);

        ReportContext ctx;
        for (const SegmentConfig& s : config.segments)
            ctx.segment_of_obs[s.collector_id] = s.id;
        for (const GatewayConfig& g : config.gateways)
            ctx.segment_of_obs[g.collector_id] = g.id;
        ctx.tapped_packets = out.tapped_ip_packets;
        ctx.ledger = rootAgg.ledger;
        out.report = build_report(rootAgg.view, std::move(report_alarms), ctx);
        out.root_ledger = rootAgg.ledger;
        out.global_flows = rootAgg.view.flows();

        for (auto& [cid, pipe] : eng.pipes)
            for (const Alarm& a : pipe.alarms())
                out.alarms.push_back(a);
        for (const Alarm& a : eng.local_failure_alarms)
            out.alarms.push_back(a);
        for (const Alarm& a : global_alarms)
            out.alarms.push_back(a);
        for (const Alarm& a : out.report.alarms)
            if (a.kind == AlarmKind::coverage_gap)
                out.alarms.push_back(a);
        std::sort(out.alarms.begin(), out.alarms.end(), [](const Alarm& x, const Alarm& y) {
            return std::tie(x.ts_us, x.obs_point, x.kind, x.subject, x.window_index) <
                   std::tie(y.ts_us, y.obs_point, y.kind, y.subject, y.window_index);
        });

        std::stable_sort(eng.mesh_log.begin(), eng.mesh_log.end(),
                         [](const MeshLogRecord& a, const MeshLogRecord& b) {
                             return a.ts_us < b.ts_us;
                         });
        out.mesh_log = std::move(eng.mesh_log);
    }
    return out;
}

std::string ledger_to_csv(const std::vector<LedgerEntry>& ledger) {
    std::string out = "packet_id,send_ts_us,deliver_ts_us\n";
    for (const LedgerEntry& e : ledger) {
        out += std::to_string(e.packet_id);
        out += ',';
        out += std::to_string(e.send_ts_us);
        out += ',';
        out += std::to_string(e.deliver_ts_us);
        out += '\n';
    }
    return out;
}

void write_outputs(const RunOutputs& outputs, const std::string& out_dir, bool monitoring) {
    namespace fs = std::filesystem;
    fs::create_directories(out_dir);
    auto write = [&](const std::string& name, const std::string& content) {
        std::ofstream f(fs::path(out_dir) / name, std::ios::binary);
        f << content;
    };
    write("ledger.csv", ledger_to_csv(outputs.ledger));
    if (!monitoring)
        return;
    std::string flows;
    for (const auto& [cid, recs] : outputs.flows_by_collector)
        for (const FlowRecord& r : recs)
            flows += flow_to_jsonl(r) + "\n";
    write("flows.jsonl", flows);
    std::string alarms;
    for (const Alarm& a : outputs.alarms)
        alarms += alarm_to_jsonl(a) + "\n";
    write("alarms.jsonl", alarms);
    std::string mesh;
    for (const MeshLogRecord& m : outputs.mesh_log)
        mesh += mesh_log_to_jsonl(m) + "\n";
    write("mesh.jsonl", mesh);
    write("report.json", report_to_json(outputs.report));
}

} // namespace segmon
