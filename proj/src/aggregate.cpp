#include "segmon/aggregate.hpp"
#include "segmon/util.hpp"

#include <json.hpp>

#include <algorithm>

namespace segmon {

ObsCounters GlobalFlow::canonical() const {
    ObsCounters c;
    for (const auto& [obs, oc] : per_obs) {
        c.fwd_pkts = std::max(c.fwd_pkts, oc.fwd_pkts);
        c.fwd_bytes = std::max(c.fwd_bytes, oc.fwd_bytes);
        c.rev_pkts = std::max(c.rev_pkts, oc.rev_pkts);
        c.rev_bytes = std::max(c.rev_bytes, oc.rev_bytes);
        c.flags_fwd |= oc.flags_fwd;
        c.flags_rev |= oc.flags_rev;
    }
    return c;
}

GlobalView::GlobalView(uint32_t idle_timeout_s)
    : idle_us_(uint64_t(idle_timeout_s) * 1'000'000) {}

namespace {

void fold_obs(ObsCounters& into, const ObsCounters& from) {
    into.fwd_pkts = std::max(into.fwd_pkts, from.fwd_pkts);
    into.fwd_bytes = std::max(into.fwd_bytes, from.fwd_bytes);
    into.rev_pkts = std::max(into.rev_pkts, from.rev_pkts);
    into.rev_bytes = std::max(into.rev_bytes, from.rev_bytes);
    into.flags_fwd |= from.flags_fwd;
    into.flags_rev |= from.flags_rev;
}

bool joinable(const GlobalFlow& a, const GlobalFlow& b, uint64_t idle_us) {
    const GlobalFlow& first = a.first_ts <= b.first_ts ? a : b;
    const GlobalFlow& later = a.first_ts <= b.first_ts ? b : a;
    return later.first_ts <= first.last_ts + idle_us;
}

void absorb(GlobalFlow& into, const GlobalFlow& from) {
    into.first_ts = std::min(into.first_ts, from.first_ts);
    into.last_ts = std::max(into.last_ts, from.last_ts);
    for (const auto& [obs, oc] : from.per_obs)
        fold_obs(into.per_obs[obs], oc);
}

} // namespace

void GlobalView::merge(const FlowRecord& rec) {
    GlobalFlow g;
    g.key = rec.key;
    g.initiator_is_lo = rec.initiator_is_lo;
    g.first_ts = rec.first_ts;
    g.last_ts = rec.last_ts;
    ObsCounters oc{rec.fwd_pkts, rec.fwd_bytes, rec.rev_pkts, rec.rev_bytes,
                   rec.tcp_flags_fwd, rec.tcp_flags_rev};
    g.per_obs[rec.obs_point] = oc;

    Bucket& bucket = buckets_[{rec.key, rec.initiator_is_lo}];
    auto pos = std::upper_bound(bucket.begin(), bucket.end(), g,
                                [](const GlobalFlow& x, const GlobalFlow& y) {
                                    return x.first_ts < y.first_ts;
                                });
    size_t idx = size_t(pos - bucket.begin());
    bucket.insert(pos, std::move(g));

    // Coalesce with neighbors until the bucket is again pairwise non-joinable;
    // merging widens the interval, so re-check both sides after each fold.
    bool changed = true;
    while (changed) {
        changed = false;
        if (idx > 0 && joinable(bucket[idx - 1], bucket[idx], idle_us_)) {
            absorb(bucket[idx - 1], bucket[idx]);
            bucket.erase(bucket.begin() + long(idx));
            idx--;
            changed = true;
        }
        if (idx + 1 < bucket.size() && joinable(bucket[idx], bucket[idx + 1], idle_us_)) {
            absorb(bucket[idx], bucket[idx + 1]);
            bucket.erase(bucket.begin() + long(idx) + 1);
            changed = true;
        }
    }
}

void GlobalView::merge(const std::vector<FlowRecord>& batch) {
    for (const FlowRecord& rec : batch)
        merge(rec);
}

std::vector<GlobalFlow> GlobalView::flows() const {
    std::vector<GlobalFlow> out;
    for (const auto& [key, bucket] : buckets_)
        for (const GlobalFlow& g : bucket)
            out.push_back(g);
    return out;
}

size_t GlobalView::flow_count() const {
    size_t n = 0;
    for (const auto& [key, bucket] : buckets_)
        n += bucket.size();
    return n;
}

std::vector<FlowRecord> GlobalView::export_records() const {
    std::vector<FlowRecord> out;
    for (const auto& [bkey, bucket] : buckets_) {
        for (const GlobalFlow& g : bucket) {
            for (const auto& [obs, oc] : g.per_obs) {
                FlowRecord r;
                r.key = g.key;
                r.initiator_is_lo = g.initiator_is_lo;
                r.first_ts = g.first_ts;
                r.last_ts = g.last_ts;
                r.fwd_pkts = oc.fwd_pkts;
                r.fwd_bytes = oc.fwd_bytes;
                r.rev_pkts = oc.rev_pkts;
                r.rev_bytes = oc.rev_bytes;
                r.tcp_flags_fwd = oc.flags_fwd;
                r.tcp_flags_rev = oc.flags_rev;
                r.obs_point = obs;
                r.export_reason = ExportReason::flush;
                out.push_back(std::move(r));
            }
        }
    }
    return out;
}

std::vector<Alarm> global_scan_detect(const GlobalView& view, const std::string& obs_point,
                                      const DetectorConfig& cfg) {
    std::map<std::pair<uint64_t, uint32_t>, std::set<std::pair<uint32_t, uint16_t>>> targets;
    for (const GlobalFlow& g : view.flows()) {
        uint32_t src = g.initiator_is_lo ? g.key.ip_lo : g.key.ip_hi;
        uint32_t dst = g.initiator_is_lo ? g.key.ip_hi : g.key.ip_lo;
        uint16_t dport = g.initiator_is_lo ? g.key.port_hi : g.key.port_lo;
        uint64_t window = window_of(g.first_ts, cfg);
        targets[{window, src}].insert({dst, dport});
    }
    std::vector<Alarm> out;
    for (const auto& [wsrc, pairs] : targets) {
        if (pairs.size() > cfg.global_scan_threshold) {
            Alarm a;
            a.ts_us = window_end_micros(wsrc.first, cfg);
            a.obs_point = obs_point;
            a.kind = AlarmKind::global_scan;
            a.subject = ipv4_to_string(wsrc.second);
            a.observed = double(pairs.size());
            a.baseline = 0.0;
            a.threshold = double(cfg.global_scan_threshold);
            a.window_index = wsrc.first;
            out.push_back(std::move(a));
        }
    }
    return out;
}

GlobalReport build_report(const GlobalView& view, std::vector<Alarm> alarms,
                          const ReportContext& ctx, size_t top_n) {
    GlobalReport rep;
    std::vector<GlobalFlow> flows = view.flows();
    rep.flow_count = flows.size();

    bool first = true;
    std::map<std::string, SegmentTotals> segments;
    std::map<uint32_t, uint64_t> talker_bytes;
    for (const GlobalFlow& g : flows) {
        if (first) {
            rep.range_first_us = g.first_ts;
            rep.range_last_us = g.last_ts;
            first = false;
        } else {
            rep.range_first_us = std::min(rep.range_first_us, g.first_ts);
            rep.range_last_us = std::max(rep.range_last_us, g.last_ts);
        }

        // Per-segment totals: within each segment the taps saw the same
        // packets, so take the max across that segment's observation points.
        std::map<std::string, std::pair<uint64_t, uint64_t>> seg_max;
        for (const auto& [obs, oc] : g.per_obs) {
            auto it = ctx.segment_of_obs.find(obs);
            std::string seg = it != ctx.segment_of_obs.end() ? it->second : obs;
            auto& [pkts, bytes] = seg_max[seg];
            pkts = std::max(pkts, oc.fwd_pkts + oc.rev_pkts);
            bytes = std::max(bytes, oc.fwd_bytes + oc.rev_bytes);
        }
        for (const auto& [seg, pb] : seg_max) {
            SegmentTotals& st = segments[seg];
            st.segment = seg;
            st.pkts += pb.first;
            st.bytes += pb.second;
        }

        ObsCounters c = g.canonical();
        uint64_t total = c.fwd_bytes + c.rev_bytes;
        talker_bytes[g.key.ip_lo] += total;
        if (g.key.ip_hi != g.key.ip_lo)
            talker_bytes[g.key.ip_hi] += total;
    }
    for (auto& [seg, st] : segments)
        rep.per_segment.push_back(st);

    rep.compression_ratio =
        ctx.tapped_packets == 0 ? 0.0 : compression_ratio(ctx.tapped_packets, rep.flow_count);

    for (const auto& [collector, delivered] : ctx.ledger.delivered_cycles) {
        std::vector<uint64_t> missed;
        for (uint64_t cycle = 1; cycle <= ctx.ledger.expected_cycles; cycle++)
            if (!delivered.count(cycle))
                missed.push_back(cycle);
        bool consecutive = false;
        for (size_t i = 0; i + 1 < missed.size(); i++)
            if (missed[i + 1] == missed[i] + 1)
                consecutive = true;
        if (!consecutive)
            continue;
        rep.coverage_gaps.push_back({collector, missed});
        Alarm a;
        a.ts_us = rep.range_last_us;
        a.obs_point = collector;
        a.kind = AlarmKind::coverage_gap;
        a.subject = collector;
        a.observed = double(missed.size());
        a.baseline = double(ctx.ledger.expected_cycles);
        a.threshold = 2.0;
        a.window_index = 0;
        alarms.push_back(std::move(a));
    }

    std::sort(alarms.begin(), alarms.end(), [](const Alarm& x, const Alarm& y) {
        return std::tie(x.ts_us, x.obs_point, x.kind, x.subject, x.window_index) <
               std::tie(y.ts_us, y.obs_point, y.kind, y.subject, y.window_index);
    });
    rep.alarms = std::move(alarms);

    std::vector<TopTalker> talkers;
    for (const auto& [ip, bytes] : talker_bytes)
        talkers.push_back({ip, bytes});
    std::sort(talkers.begin(), talkers.end(), [](const TopTalker& x, const TopTalker& y) {
        if (x.bytes != y.bytes)
            return x.bytes > y.bytes;
        return x.ip < y.ip;
    });
    if (talkers.size() > top_n)
        talkers.resize(top_n);
    rep.top_talkers = std::move(talkers);
    return rep;
}

std::string report_to_json(const GlobalReport& report) {
    nlohmann::ordered_json j;
    j["range_us"] = {report.range_first_us, report.range_last_us};
    j["flow_count"] = report.flow_count;
    j["per_segment"] = nlohmann::ordered_json::array();
    for (const SegmentTotals& st : report.per_segment) {
        nlohmann::ordered_json s;
        s["segment"] = st.segment;
        s["pkts"] = st.pkts;
        s["bytes"] = st.bytes;
        j["per_segment"].push_back(std::move(s));
    }
    j["compression_ratio"] = report.compression_ratio;
    j["alarms"] = nlohmann::ordered_json::array();
    for (const Alarm& a : report.alarms)
        j["alarms"].push_back(nlohmann::ordered_json::parse(alarm_to_jsonl(a)));
    j["coverage_gaps"] = nlohmann::ordered_json::array();
    for (const CoverageGap& g : report.coverage_gaps) {
        nlohmann::ordered_json e;
        e["collector"] = g.collector;
        e["cycles"] = g.cycles;
        j["coverage_gaps"].push_back(std::move(e));
    }
    j["top_talkers"] = nlohmann::ordered_json::array();
    for (const TopTalker& t : report.top_talkers) {
        nlohmann::ordered_json e;
        e["ip"] = ipv4_to_string(t.ip);
        e["bytes"] = t.bytes;
        j["top_talkers"].push_back(std::move(e));
    }
    return j.dump(2) + "\n";
}

} // namespace segmon
