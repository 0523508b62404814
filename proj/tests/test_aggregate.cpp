#include <doctest.h>

#include "segmon/aggregate.hpp"
#include "segmon/prng.hpp"

#include <json.hpp>

#include <algorithm>
#include <vector>

using namespace segmon;

namespace {

constexpr uint64_t SEC = 1'000'000;

FlowRecord rec(const char* obs, uint64_t first_s, uint64_t last_s, uint64_t fwd_pkts = 4,
               uint64_t fwd_bytes = 240, uint16_t port_hi = 49152) {
    FlowRecord f;
    f.key = {0x0A000101, 0x0A000202, 502, port_hi, 6};
    f.initiator_is_lo = false;
    f.first_ts = first_s * SEC;
    f.last_ts = last_s * SEC;
    f.fwd_pkts = fwd_pkts;
    f.fwd_bytes = fwd_bytes;
    f.rev_pkts = fwd_pkts;
    f.rev_bytes = fwd_bytes * 2;
    f.tcp_flags_fwd = TCP_PSH | TCP_ACK;
    f.tcp_flags_rev = TCP_ACK;
    f.obs_point = obs;
    f.export_reason = ExportReason::idle_timeout;
    return f;
}

} // namespace

TEST_CASE("records of one flow from two taps merge without double counting") {
    GlobalView view(15);
    view.merge(rec("c1", 10, 20));
    view.merge(rec("g1", 10, 20));
    REQUIRE(view.flow_count() == 1);
    GlobalFlow g = view.flows()[0];
    CHECK(g.per_obs.size() == 2);
    ObsCounters c = g.canonical();
    CHECK(c.fwd_pkts == 4); // max across taps, not sum
    CHECK(c.fwd_bytes == 240);
    CHECK(c.rev_bytes == 480);
    CHECK(c.flags_fwd == (TCP_PSH | TCP_ACK));
}

TEST_CASE("same-key records join across a gap up to the idle timeout") {
    SUBCASE("gap inside the horizon joins") {
        GlobalView view(15);
        view.merge(rec("c1", 0, 5));
        view.merge(rec("c1", 20, 25, 6, 360));
        REQUIRE(view.flow_count() == 1);
        GlobalFlow g = view.flows()[0];
        CHECK(g.first_ts == 0);
        CHECK(g.last_ts == 25 * SEC);
        CHECK(g.canonical().fwd_pkts == 6); // same tap: later record folds by max
    }
    SUBCASE("gap past the horizon stays split") {
        GlobalView view(15);
        view.merge(rec("c1", 0, 5));
        view.merge(rec("c1", 21, 25));
        CHECK(view.flow_count() == 2);
    }
    SUBCASE("exact boundary joins") {
        GlobalView view(15);
        view.merge(rec("c1", 0, 5));
        view.merge(rec("c1", 20, 25));
        CHECK(view.flow_count() == 1);
    }
}

TEST_CASE("a later record can bridge two existing clusters") {
    GlobalView view(15);
    view.merge(rec("c1", 0, 10));
    view.merge(rec("c1", 40, 50));
    CHECK(view.flow_count() == 2);
    view.merge(rec("g1", 20, 30)); // joins both sides transitively
    REQUIRE(view.flow_count() == 1);
    GlobalFlow g = view.flows()[0];
    CHECK(g.first_ts == 0);
    CHECK(g.last_ts == 50 * SEC);
}

TEST_CASE("merge result is independent of arrival order") {
    std::vector<FlowRecord> batch;
    batch.push_back(rec("c1", 0, 10));
    batch.push_back(rec("g1", 2, 12));
    batch.push_back(rec("c1", 20, 30));
    batch.push_back(rec("c2", 60, 70));
    batch.push_back(rec("g1", 55, 58));
    batch.push_back(rec("c1", 100, 110, 9, 999, 50000)); // different key
    batch.push_back(rec("c1", 130, 140, 2, 100, 50000));

    GlobalView ref(15);
    ref.merge(batch);
    auto want = ref.flows();

    SplitMix64 rng(77);
    for (int trial = 0; trial < 100; trial++) {
        auto shuffled = batch;
        for (size_t i = shuffled.size(); i > 1; i--)
            std::swap(shuffled[i - 1], shuffled[rng.next() % i]);
        GlobalView v(15);
        v.merge(shuffled);
        CHECK(v.flows() == want);
    }
}

TEST_CASE("merging the same batch twice changes nothing") {
    std::vector<FlowRecord> batch{rec("c1", 0, 10), rec("g1", 2, 12), rec("c1", 30, 40)};
    GlobalView view(15);
    view.merge(batch);
    auto once = view.flows();
    view.merge(batch);
    CHECK(view.flows() == once);
}

TEST_CASE("opposite initiators never share a global flow") {
    GlobalView view(15);
    FlowRecord a = rec("c1", 0, 10);
    FlowRecord b = rec("c1", 5, 15);
    b.initiator_is_lo = true;
    view.merge(a);
    view.merge(b);
    CHECK(view.flow_count() == 2);
}

TEST_CASE("export_records reproduces the view when merged again") {
    GlobalView view(15);
    view.merge(rec("c1", 0, 10));
    view.merge(rec("g1", 2, 12));
    view.merge(rec("c2", 2, 12));
    view.merge(rec("c1", 40, 50));
    view.merge(rec("c1", 100, 110, 9, 999, 50000));

    GlobalView upstream(15);
    upstream.merge(view.export_records());
    CHECK(upstream.flows() == view.flows());
}

TEST_CASE("global scan detector needs more distinct targets than the threshold") {
    DetectorConfig cfg; // global_scan_threshold 25
    auto probe = [&](GlobalView& v, uint16_t port, uint64_t first_s) {
        FlowRecord f;
        f.key = {0x0A000909, 0x0A000A0A, 0, 0, 6};
        // scanner 10.0.9.9 initiates toward 10.0.10.10
        f.key.port_lo = 40000;
        f.key.port_hi = port;
        f.initiator_is_lo = true;
        f.first_ts = first_s * SEC;
        f.last_ts = first_s * SEC + 1000;
        f.fwd_pkts = 1;
        f.fwd_bytes = 60;
        f.tcp_flags_fwd = TCP_SYN;
        f.obs_point = "c1";
        v.merge(f);
    };

    SUBCASE("26 targets in one window fires once") {
        GlobalView v(15);
        for (uint16_t i = 0; i < 26; i++)
            probe(v, uint16_t(7000 + i), 3);
        auto alarms = global_scan_detect(v, "a1", cfg);
        REQUIRE(alarms.size() == 1);
        CHECK(alarms[0].kind == AlarmKind::global_scan);
        CHECK(alarms[0].obs_point == "a1");
        CHECK(alarms[0].subject == "10.0.9.9");
        CHECK(alarms[0].observed == 26.0);
        CHECK(alarms[0].threshold == 25.0);
        CHECK(alarms[0].window_index == 0);
    }
    SUBCASE("25 targets stays quiet") {
        GlobalView v(15);
        for (uint16_t i = 0; i < 25; i++)
            probe(v, uint16_t(7000 + i), 3);
        CHECK(global_scan_detect(v, "a1", cfg).empty());
    }
    SUBCASE("split across windows stays quiet") {
        GlobalView v(15);
        for (uint16_t i = 0; i < 13; i++)
            probe(v, uint16_t(7000 + i), 3);
        for (uint16_t i = 13; i < 26; i++)
            probe(v, uint16_t(7000 + i), 47); // gap > idle, same key set
        CHECK(global_scan_detect(v, "a1", cfg).empty());
    }
}

TEST_CASE("report covers range, segments, coverage and talkers") {
    GlobalView view(15);
    view.merge(rec("c1", 10, 20));
    view.merge(rec("g1", 10, 20));
    view.merge(rec("c2", 10, 20));
    view.merge(rec("c1", 50, 60, 9, 999, 50000));

    ReportContext ctx;
    ctx.segment_of_obs = {{"c1", "seg1"}, {"c2", "seg2"}, {"g1", "gw1"}};
    ctx.tapped_packets = 100;
    ctx.ledger.expected_cycles = 10;
    ctx.ledger.delivered_cycles["c1"] = {1, 2, 3, 4, 5};
    ctx.ledger.delivered_cycles["c2"] = {1, 2, 3, 5, 6, 7, 8, 9, 10};
    ctx.ledger.delivered_cycles["g1"] = {1, 4, 5, 6, 7, 8, 9, 10};

    GlobalReport rep = build_report(view, {}, ctx);
    CHECK(rep.range_first_us == 10 * SEC);
    CHECK(rep.range_last_us == 60 * SEC);
    CHECK(rep.flow_count == 2);
    CHECK(rep.compression_ratio == doctest::Approx(0.02));

    REQUIRE(rep.per_segment.size() == 3);
    CHECK(rep.per_segment[0].segment == "gw1");
    CHECK(rep.per_segment[0].pkts == 8);
    CHECK(rep.per_segment[1].segment == "seg1");
    CHECK(rep.per_segment[1].pkts == 8 + 18);
    CHECK(rep.per_segment[1].bytes == 720 + 999 * 3);
    CHECK(rep.per_segment[2].segment == "seg2");
    CHECK(rep.per_segment[2].pkts == 8);

    // c1 missed 6..10 (consecutive), g1 missed 2,3; c2 missed only cycle 4.
    REQUIRE(rep.coverage_gaps.size() == 2);
    CHECK(rep.coverage_gaps[0].collector == "c1");
    CHECK(rep.coverage_gaps[0].cycles == std::vector<uint64_t>{6, 7, 8, 9, 10});
    CHECK(rep.coverage_gaps[1].collector == "g1");
    CHECK(rep.coverage_gaps[1].cycles == std::vector<uint64_t>{2, 3});
    REQUIRE(rep.alarms.size() == 2);
    CHECK(rep.alarms[0].kind == AlarmKind::coverage_gap);
    CHECK(rep.alarms[0].subject == "c1");
    CHECK(rep.alarms[0].observed == 5.0);
    CHECK(rep.alarms[1].subject == "g1");

    // Both endpoints of each flow are credited with its canonical bytes.
    REQUIRE(rep.top_talkers.size() == 2);
    CHECK(rep.top_talkers[0].ip == 0x0A000101); // equal bytes, lower address first
    CHECK(rep.top_talkers[0].bytes == 720 + 999 * 3);
    CHECK(rep.top_talkers[1].ip == 0x0A000202);
    CHECK(rep.top_talkers[1].bytes == 720 + 999 * 3);
}

TEST_CASE("top talker ordering breaks byte ties by address") {
    GlobalView view(15);
    view.merge(rec("c1", 0, 10));
    ReportContext ctx;
    ctx.tapped_packets = 10;
    GlobalReport rep = build_report(view, {}, ctx);
    REQUIRE(rep.top_talkers.size() == 2);
    CHECK(rep.top_talkers[0].bytes == rep.top_talkers[1].bytes);
    CHECK(rep.top_talkers[0].ip < rep.top_talkers[1].ip);
}

TEST_CASE("report JSON carries the fixed field layout") {
    GlobalView view(15);
    view.merge(rec("c1", 10, 20));
    ReportContext ctx;
    ctx.segment_of_obs = {{"c1", "seg1"}};
    ctx.tapped_packets = 50;
    ctx.ledger.expected_cycles = 3;
    ctx.ledger.delivered_cycles["c1"] = {3};

    GlobalReport rep = build_report(view, {}, ctx);
    std::string text = report_to_json(rep);
    CHECK(text.back() == '\n');
    auto j = nlohmann::ordered_json::parse(text);
    std::vector<std::string> keys;
    for (auto it = j.begin(); it != j.end(); ++it)
        keys.push_back(it.key());
    CHECK(keys == std::vector<std::string>{"range_us", "flow_count", "per_segment",
                                           "compression_ratio", "alarms", "coverage_gaps",
                                           "top_talkers"});
    CHECK(j["range_us"][0] == 10 * SEC);
    CHECK(j["range_us"][1] == 20 * SEC);
    CHECK(j["flow_count"] == 1);
    CHECK(j["per_segment"][0]["segment"] == "seg1");
    CHECK(j["per_segment"][0]["pkts"] == 8);
    CHECK(j["compression_ratio"] == doctest::Approx(1.0 / 50.0));
    CHECK(j["coverage_gaps"][0]["collector"] == "c1");
    CHECK(j["coverage_gaps"][0]["cycles"] == nlohmann::ordered_json::array({1, 2}));
    CHECK(j["alarms"][0]["kind"] == "coverage_gap");
    CHECK(j["top_talkers"][0]["ip"] == "10.0.1.1");
    CHECK(j["top_talkers"][0]["bytes"] == 720);
}
