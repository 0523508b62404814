#include <doctest.h>

#include "segmon/engine.hpp"
#include "segmon/pipeline.hpp"

#include <json.hpp>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <set>
#include <string>
#include <vector>

using namespace segmon;

namespace {

const std::string SCENARIOS = SEGMON_SCENARIO_DIR;

TopologyConfig fig2() { return load_config_file(SCENARIOS + "/fig2.json"); }
TrafficProfile baseline() { return load_profile_file(SCENARIOS + "/baseline.json"); }

uint64_t count_log(const std::vector<MeshLogRecord>& log, EnvelopeKind kind,
                   const std::string& event) {
    uint64_t n = 0;
    for (const MeshLogRecord& r : log)
        if (r.kind == kind && r.event == event)
            n++;
    return n;
}

std::set<uint64_t> cycles(const RunOutputs& out, const std::string& cid) {
    auto it = out.root_ledger.delivered_cycles.find(cid);
    if (it == out.root_ledger.delivered_cycles.end())
        return {};
    return it->second;
}

std::string flows_text(const RunOutputs& out) {
    std::string s;
    for (const auto& [cid, recs] : out.flows_by_collector)
        for (const FlowRecord& r : recs)
            s += flow_to_jsonl(r) + "\n";
    return s;
}

std::string alarms_text(const RunOutputs& out) {
    std::string s;
    for (const Alarm& a : out.alarms)
        s += alarm_to_jsonl(a) + "\n";
    return s;
}

} // namespace

TEST_CASE("quiet reference run: volumes, conservation, delivery bookkeeping") {
    TopologyConfig cfg = fig2();
    RunOutputs out = run_scenario(cfg, baseline(), 120.0, cfg.seed);

    CHECK(out.isolation_violations == 0);
    CHECK(out.alarms.empty());

    // Tap volumes: three local sessions per segment plus two cross-segment
    // sessions seen by both segment collectors and the gateway.
    CHECK(out.tapped_ip_packets_by_collector.at("c1") == 1392);
    CHECK(out.tapped_ip_packets_by_collector.at("c2") == 1388);
    CHECK(out.tapped_ip_packets_by_collector.at("g1") == 192);
    CHECK(out.tapped_ip_packets == 2972);

    // Per-collector conservation: exported flow counters add back up to the
    // tap totals, nothing dropped or double-counted.
    for (const auto& [cid, flows] : out.flows_by_collector) {
        uint64_t pkts = 0, bytes = 0;
        for (const FlowRecord& f : flows) {
            pkts += f.fwd_pkts + f.rev_pkts;
            bytes += f.fwd_bytes + f.rev_bytes;
        }
        CHECK(pkts == out.tapped_ip_packets_by_collector.at(cid));
        CHECK(bytes == out.tapped_ip_bytes_by_collector.at(cid));
    }
    CHECK(out.flows_by_collector.at("c1").size() == 5);
    CHECK(out.flows_by_collector.at("c2").size() == 5);
    CHECK(out.flows_by_collector.at("g1").size() == 2);
    for (const auto& [cid, flows] : out.flows_by_collector)
        for (const FlowRecord& f : flows)
            CHECK(f.export_reason == ExportReason::flush);

    // Production ledger: every packet delivered, with the fixed path delays.
    REQUIRE(out.ledger.size() == 2588);
    for (size_t i = 0; i < out.ledger.size(); i++) {
        CHECK(out.ledger[i].packet_id == i);
        uint64_t delay = out.ledger[i].deliver_ts_us - out.ledger[i].send_ts_us;
        CHECK((delay == 100 || delay == 500)); // same-segment vs. via gateway
    }

    // Root aggregation state.
    CHECK(out.report.flow_count == 8);
    CHECK(out.global_flows.size() == 8);
    CHECK(out.report.compression_ratio == doctest::Approx(8.0 / 2972.0).epsilon(1e-12));
    CHECK(out.root_ledger.expected_cycles == 4);
    std::set<uint64_t> all{1, 2, 3, 4};
    CHECK(cycles(out, "c1") == all);
    CHECK(cycles(out, "c2") == all);
    CHECK(cycles(out, "g1") == all);
    CHECK(out.report.coverage_gaps.empty());
    CHECK(out.report.alarms.empty());
    CHECK(out.report.range_first_us < out.report.range_last_us);

    REQUIRE(out.report.per_segment.size() == 3);
    CHECK(out.report.per_segment[0].segment == "gw1");
    CHECK(out.report.per_segment[1].segment == "seg1");
    CHECK(out.report.per_segment[2].segment == "seg2");
    CHECK(out.report.per_segment[0].pkts == 192);
    CHECK(out.report.per_segment[1].pkts == 1392);
    CHECK(out.report.per_segment[2].pkts == 1388);

    // Busiest endpoint is the seg2 historian (two polling sessions plus one
    // cross-segment feed terminate there).
    REQUIRE(out.report.top_talkers.size() == 6);
    CHECK(out.report.top_talkers[0].ip == 0x0A000203);
    CHECK(out.report.top_talkers[0].bytes == 143460);
    for (size_t i = 1; i < out.report.top_talkers.size(); i++)
        CHECK(out.report.top_talkers[i].bytes <= out.report.top_talkers[i - 1].bytes);

    // Mesh traffic: 3 collectors x 4 cycles, one hop each, no loss configured.
    CHECK(count_log(out.mesh_log, EnvelopeKind::flow_batch, "tx") == 12);
    CHECK(count_log(out.mesh_log, EnvelopeKind::flow_batch, "deliver") == 12);
    CHECK(count_log(out.mesh_log, EnvelopeKind::ack, "tx") == 12);
    CHECK(count_log(out.mesh_log, EnvelopeKind::ack, "ack") == 12);
    CHECK(count_log(out.mesh_log, EnvelopeKind::flow_batch, "retry") == 0);
    CHECK(count_log(out.mesh_log, EnvelopeKind::flow_batch, "fail") == 0);
    CHECK(count_log(out.mesh_log, EnvelopeKind::flow_batch, "drop") == 0);
    for (size_t i = 1; i < out.mesh_log.size(); i++)
        CHECK(out.mesh_log[i].ts_us >= out.mesh_log[i - 1].ts_us);
}

TEST_CASE("engine-driven analysis equals offline replay of the same taps") {
    TopologyConfig cfg = fig2();
    RunOutputs out = run_scenario(cfg, baseline(), 120.0, cfg.seed);

    std::vector<ObsStream> streams;
    for (const auto& [cid, pkts] : out.collector_streams)
        streams.push_back({cid, &pkts});

    for (const ObsStream& s : streams) {
        StreamAnalysis rep = analyze_stream(*s.packets, s.obs_point, cfg.flow, cfg.detector);
        CHECK(rep.flows == out.flows_by_collector.at(s.obs_point));
        CHECK(rep.alarms.empty());
        CHECK(rep.ip_packets == out.tapped_ip_packets_by_collector.at(s.obs_point));
        CHECK(rep.ip_bytes == out.tapped_ip_bytes_by_collector.at(s.obs_point));
    }

    auto serial = analyze_streams_serial(streams, cfg.flow, cfg.detector);
    auto parallel = analyze_streams_parallel(streams, cfg.flow, cfg.detector);
    REQUIRE(serial.size() == parallel.size());
    for (size_t i = 0; i < serial.size(); i++) {
        CHECK(serial[i].flows == parallel[i].flows);
        CHECK(serial[i].alarms.size() == parallel[i].alarms.size());
        CHECK(serial[i].ip_packets == parallel[i].ip_packets);
    }
}

TEST_CASE("tap streams survive a pcap round trip") {
    TopologyConfig cfg = fig2();
    RunOutputs out = run_scenario(cfg, baseline(), 60.0, cfg.seed);
    const std::vector<PacketRecord>& stream = out.collector_streams.at("c1");
    REQUIRE(!stream.empty());
    std::vector<uint8_t> bytes = write_pcap(stream);
    ParseResult parsed = parse_pcap(bytes, "c1");
    REQUIRE(parsed.records.size() == stream.size());
    for (size_t i = 0; i < stream.size(); i++)
        CHECK(parsed.records[i] == stream[i]);
}

TEST_CASE("identical runs give byte-identical outputs") {
    TopologyConfig cfg = fig2();
    RunOutputs a = run_scenario(cfg, baseline(), 120.0, cfg.seed);
    RunOutputs b = run_scenario(cfg, baseline(), 120.0, cfg.seed);
    CHECK(ledger_to_csv(a.ledger) == ledger_to_csv(b.ledger));
    CHECK(flows_text(a) == flows_text(b));
    CHECK(alarms_text(a) == alarms_text(b));
    CHECK(report_to_json(a.report) == report_to_json(b.report));
    REQUIRE(a.mesh_log.size() == b.mesh_log.size());
    for (size_t i = 0; i < a.mesh_log.size(); i++)
        CHECK(a.mesh_log[i] == b.mesh_log[i]);
}

TEST_CASE("monitoring does not perturb the production ledger") {
    TopologyConfig cfg = fig2();
    RunOutputs with = run_scenario(cfg, baseline(), 120.0, cfg.seed, true);
    RunOutputs without = run_scenario(cfg, baseline(), 120.0, cfg.seed, false);
    CHECK(with.isolation_violations == 0);
    CHECK(without.isolation_violations == 0);
    CHECK(ledger_to_csv(with.ledger) == ledger_to_csv(without.ledger));
    CHECK(without.collector_streams.empty());
    CHECK(without.alarms.empty());
}

TEST_CASE("silenced collector radio surfaces as a coverage gap") {
    TopologyConfig cfg = fig2();
    TrafficProfile prof = load_profile_file(SCENARIOS + "/collector_silence.json");
    RunOutputs out = run_scenario(cfg, prof, 300.0, cfg.seed);

    CHECK(out.root_ledger.expected_cycles == 10);
    CHECK(cycles(out, "c1") == std::set<uint64_t>{1, 2, 3, 4, 5});
    CHECK(cycles(out, "c2") == std::set<uint64_t>{1, 2, 3, 4, 5, 6, 7, 8, 9, 10});
    CHECK(cycles(out, "g1") == std::set<uint64_t>{1, 2, 3, 4, 5, 6, 7, 8, 9, 10});

    REQUIRE(out.report.coverage_gaps.size() == 1);
    CHECK(out.report.coverage_gaps[0].collector == "c1");
    CHECK(out.report.coverage_gaps[0].cycles == std::vector<uint64_t>{6, 7, 8, 9, 10});

    uint64_t coverage_alarms = 0;
    for (const Alarm& a : out.report.alarms)
        if (a.kind == AlarmKind::coverage_gap) {
            coverage_alarms++;
            CHECK(a.obs_point == "c1");
            CHECK(a.subject == "c1");
            CHECK(a.observed == 5.0);
            CHECK(a.baseline == 10.0);
            CHECK(a.threshold == 2.0);
        }
    CHECK(coverage_alarms == 1);

    // The sender keeps trying and gives up loudly, once per lost batch.
    uint64_t failures = 0;
    for (const Alarm& a : out.alarms)
        if (a.kind == AlarmKind::delivery_failure) {
            failures++;
            CHECK(a.obs_point == "c1");
            CHECK(a.subject == "a1");
            CHECK(a.observed == 6.0); // initial attempt + five retries
            CHECK(a.threshold == 5.0);
        }
    CHECK(failures == 5);
    CHECK(count_log(out.mesh_log, EnvelopeKind::flow_batch, "fail") == 5);
    CHECK(count_log(out.mesh_log, EnvelopeKind::flow_batch, "retry") == 25);
    CHECK(count_log(out.mesh_log, EnvelopeKind::flow_batch, "deliver") == 25); // 5 + 10 + 10

    // Local capture is unaffected; only export coverage suffers.
    CHECK(out.flows_by_collector.at("c1").size() == 5);
    uint64_t pkts = 0;
    for (const FlowRecord& f : out.flows_by_collector.at("c1"))
        pkts += f.fwd_pkts + f.rev_pkts;
    CHECK(pkts == out.tapped_ip_packets_by_collector.at("c1"));
}

TEST_CASE("relay failure on the diamond mesh reroutes without data loss") {
    TopologyConfig cfg = load_config_file(SCENARIOS + "/diamond.json");
    TrafficProfile failure = load_profile_file(SCENARIOS + "/relay_failure.json");
    RunOutputs out = run_scenario(cfg, failure, 180.0, cfg.seed);

    CHECK(out.root_ledger.expected_cycles == 6);
    std::set<uint64_t> all{1, 2, 3, 4, 5, 6};
    CHECK(cycles(out, "c1") == all);
    CHECK(cycles(out, "c2") == all);
    CHECK(cycles(out, "g1") == all);
    CHECK(count_log(out.mesh_log, EnvelopeKind::flow_batch, "fail") == 0);
    CHECK(count_log(out.mesh_log, EnvelopeKind::flow_batch, "retry") == 0);

    bool r1_before = false, r1_after = false, r2_after = false;
    for (const MeshLogRecord& r : out.mesh_log) {
        bool touches_r1 = r.sender == "r1" || r.receiver == "r1";
        bool touches_r2 = r.sender == "r2" || r.receiver == "r2";
        if (r.ts_us < 120'000'000 && touches_r1)
            r1_before = true;
        if (r.ts_us >= 120'000'000 && touches_r1)
            r1_after = true;
        if (r.ts_us >= 120'000'000 && touches_r2)
            r2_after = true;
    }
    CHECK(r1_before);        // preferred relay while both are up
    CHECK_FALSE(r1_after);   // nothing crosses a dead relay
    CHECK(r2_after);         // traffic moved to the surviving one

    // Against the no-failure run: what reaches the root is identical.
    RunOutputs ref = run_scenario(cfg, baseline(), 180.0, cfg.seed);
    CHECK(out.global_flows == ref.global_flows);
    CHECK(out.root_ledger.delivered_cycles == ref.root_ledger.delivered_cycles);
    CHECK(out.alarms.empty());
    CHECK(ref.alarms.empty());
    CHECK(ledger_to_csv(out.ledger) == ledger_to_csv(ref.ledger));
}

TEST_CASE("two-level aggregation forwards everything to the root") {
    TopologyConfig tree = load_config_file(SCENARIOS + "/tree.json");
    RunOutputs out = run_scenario(tree, baseline(), 120.0, tree.seed);
    RunOutputs flat = run_scenario(fig2(), baseline(), 120.0, 42);

    CHECK(out.report.flow_count == 8);
    CHECK(out.global_flows == flat.global_flows);
    std::set<uint64_t> all{1, 2, 3, 4};
    CHECK(cycles(out, "c1") == all);
    CHECK(cycles(out, "c2") == all); // relayed through the mid-tier summaries
    CHECK(cycles(out, "g1") == all);
    CHECK(out.report.coverage_gaps.empty());
    CHECK(out.alarms.empty());
}

TEST_CASE("syn flood trips the volume detector promptly") {
    TopologyConfig cfg = fig2();
    TrafficProfile prof = load_profile_file(SCENARIOS + "/syn_flood.json");
    RunOutputs out = run_scenario(cfg, prof, 400.0, cfg.seed);

    std::vector<const Alarm*> volume;
    for (const Alarm& a : out.alarms)
        if (a.kind == AlarmKind::volume_anomaly)
            volume.push_back(&a);
    REQUIRE(!volume.empty());
    CHECK(volume.front()->ts_us == 310'000'000); // first window boundary past onset
    CHECK(volume.front()->window_index == 30);

    bool syn_at_c1 = false;
    for (const Alarm* a : volume)
        if (a->obs_point == "c1" && a->subject == "syn_count" && a->window_index == 30)
            syn_at_c1 = true;
    CHECK(syn_at_c1);

    // The root heard about it over the mesh.
    bool at_root = false;
    for (const Alarm& a : out.report.alarms)
        if (a.kind == AlarmKind::volume_anomaly && a.obs_point == "c1" &&
            a.subject == "syn_count")
            at_root = true;
    CHECK(at_root);

    // Clean baseline over the same horizon raises nothing.
    RunOutputs quiet = run_scenario(cfg, baseline(), 400.0, cfg.seed);
    CHECK(quiet.alarms.empty());
}

TEST_CASE("single-source port scan is caught locally") {
    TopologyConfig cfg = fig2();
    TrafficProfile prof = load_profile_file(SCENARIOS + "/port_scan.json");
    RunOutputs out = run_scenario(cfg, prof, 400.0, cfg.seed);

    std::vector<const Alarm*> scans;
    for (const Alarm& a : out.alarms)
        if (a.kind == AlarmKind::port_scan)
            scans.push_back(&a);
    REQUIRE(!scans.empty());
    bool local_hit = false;
    for (const Alarm* a : scans)
        // 30 scanned ports plus the two the host touches as part of its
        // normal traffic in that window (502 and the reverse client port).
        if (a->obs_point == "c1" && a->subject == "10.0.1.2" && a->observed == 32.0 &&
            a->threshold == 20.0 && a->window_index == 32)
            local_hit = true;
    CHECK(local_hit);
}

TEST_CASE("distributed scan under local thresholds only shows up globally") {
    TopologyConfig cfg = fig2();
    TrafficProfile prof = load_profile_file(SCENARIOS + "/distributed_scan.json");
    RunOutputs out = run_scenario(cfg, prof, 400.0, cfg.seed);

    uint64_t local_scans = 0, global_scans = 0;
    const Alarm* gs = nullptr;
    for (const Alarm& a : out.alarms) {
        if (a.kind == AlarmKind::port_scan)
            local_scans++;
        if (a.kind == AlarmKind::global_scan) {
            global_scans++;
            gs = &a;
        }
    }
    CHECK(local_scans == 0); // fifteen ports per emitter stays under the knee
    REQUIRE(global_scans == 1);
    CHECK(gs->obs_point == "a1");
    CHECK(gs->subject == "10.0.9.9");
    CHECK(gs->observed == 30.0);
    CHECK(gs->threshold == 25.0);
}

TEST_CASE("exfiltration inflates volume at every tap on its path") {
    TopologyConfig cfg = fig2();
    TrafficProfile prof = load_profile_file(SCENARIOS + "/exfiltration.json");
    RunOutputs out = run_scenario(cfg, prof, 400.0, cfg.seed);

    std::set<std::string> obs_with_volume;
    for (const Alarm& a : out.alarms)
        if (a.kind == AlarmKind::volume_anomaly && a.subject == "pkt_count" &&
            a.window_index == 30)
            obs_with_volume.insert(a.obs_point);
    CHECK(obs_with_volume == std::set<std::string>{"c1", "c2", "g1"});
}

TEST_CASE("write_outputs materializes the expected file set") {
    namespace fs = std::filesystem;
    TopologyConfig cfg = fig2();
    RunOutputs out = run_scenario(cfg, baseline(), 60.0, cfg.seed);
    fs::path dir = fs::temp_directory_path() / "segmon_test_outputs";
    fs::remove_all(dir);

    write_outputs(out, dir.string(), true);
    for (const char* name :
         {"ledger.csv", "flows.jsonl", "alarms.jsonl", "mesh.jsonl", "report.json"})
        CHECK(fs::exists(dir / name));
    std::ifstream csv(dir / "ledger.csv");
    std::string header;
    std::getline(csv, header);
    CHECK(header == "packet_id,send_ts_us,deliver_ts_us");
    std::ifstream rep(dir / "report.json");
    nlohmann::json parsed = nlohmann::json::parse(rep);
    CHECK(parsed.at("flow_count").get<uint64_t>() == out.report.flow_count);

    fs::remove_all(dir);
    RunOutputs bare = run_scenario(cfg, baseline(), 60.0, cfg.seed, false);
    write_outputs(bare, dir.string(), false);
    CHECK(fs::exists(dir / "ledger.csv"));
    CHECK_FALSE(fs::exists(dir / "flows.jsonl"));
    CHECK_FALSE(fs::exists(dir / "report.json"));
    fs::remove_all(dir);
}

TEST_CASE("profiles that cannot run on the topology are rejected up front") {
    TopologyConfig cfg = fig2();
    TrafficProfile prof = load_profile_file(SCENARIOS + "/syn_flood.json");
    // Attack runs until t=360 but the run stops at 350.
    CHECK_THROWS_AS(run_scenario(cfg, prof, 350.0, cfg.seed), ConfigError);
}
