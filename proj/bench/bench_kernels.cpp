// Compares the serial kernels against their OpenMP variants on a synthetic
// workload and verifies the outputs match while timing them.
//
//   ./bench_kernels [replication]
//
// replication scales the workload (default 8 copies of a 600 s scenario).

#include "segmon/config.hpp"
#include "segmon/engine.hpp"
#include "segmon/pcap.hpp"
#include "segmon/pipeline.hpp"
#include "segmon/traffic.hpp"

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <string>
#include <vector>

using namespace segmon;
using Clock = std::chrono::steady_clock;

namespace {

double best_of(int reps, const std::function<void()>& fn) {
    double best = 1e300;
    for (int i = 0; i < reps; i++) {
        auto t0 = Clock::now();
        fn();
        auto t1 = Clock::now();
        best = std::min(best, std::chrono::duration<double, std::milli>(t1 - t0).count());
    }
    return best;
}

} // namespace

int main(int argc, char** argv) {
    int replication = argc > 1 ? std::atoi(argv[1]) : 8;
    if (replication < 1)
        replication = 1;

    std::string dir = SEGMON_SCENARIO_DIR;
    TopologyConfig cfg = load_config_file(dir + "/fig2.json");
    TrafficProfile prof = load_profile_file(dir + "/syn_flood.json");
    SplitMix64 rng(cfg.seed);
    std::vector<ProductionPacket> base = generate_traffic(cfg, prof, 600.0, rng);

    // Replicate the run back to back to get a capture worth parallelizing.
    std::vector<PacketRecord> records;
    records.reserve(base.size() * size_t(replication));
    uint64_t span = base.back().packet.ts_micros + 1'000'000;
    for (int r = 0; r < replication; r++)
        for (const ProductionPacket& p : base) {
            PacketRecord rec = p.packet;
            rec.ts_micros += uint64_t(r) * span;
            records.push_back(std::move(rec));
        }
    std::vector<uint8_t> capture = write_pcap(records);
    std::printf("workload: %zu frames, %.1f MB capture\n", records.size(),
                double(capture.size()) / 1e6);

    ParseResult serial_parse, parallel_parse;
    double t_parse_s = best_of(3, [&] { serial_parse = parse_pcap(capture, "bench"); });
    double t_parse_p = best_of(3, [&] { parallel_parse = parse_pcap_parallel(capture, "bench"); });
    bool parse_equal = serial_parse.records == parallel_parse.records &&
                       serial_parse.stats == parallel_parse.stats;
    std::printf("parse_pcap        serial %8.2f ms   parallel %8.2f ms   x%.2f   %s\n",
                t_parse_s, t_parse_p, t_parse_s / t_parse_p,
                parse_equal ? "outputs equal" : "OUTPUTS DIFFER");

    // Fan the frames out over synthetic observation points; each stream keeps
    // the time order, so they replay like independent collector taps.
    const int lanes = 8;
    std::vector<std::vector<PacketRecord>> lane_pkts(lanes);
    for (size_t i = 0; i < serial_parse.records.size(); i++)
        lane_pkts[i % lanes].push_back(serial_parse.records[i]);
    std::vector<ObsStream> streams;
    for (int i = 0; i < lanes; i++)
        streams.push_back({"lane" + std::to_string(i), &lane_pkts[i]});

    std::vector<StreamAnalysis> serial_an, parallel_an;
    double t_an_s =
        best_of(3, [&] { serial_an = analyze_streams_serial(streams, cfg.flow, cfg.detector); });
    double t_an_p = best_of(
        3, [&] { parallel_an = analyze_streams_parallel(streams, cfg.flow, cfg.detector); });
    bool an_equal = serial_an.size() == parallel_an.size();
    for (size_t i = 0; an_equal && i < serial_an.size(); i++)
        an_equal = serial_an[i].flows == parallel_an[i].flows &&
                   serial_an[i].alarms == parallel_an[i].alarms;
    std::printf("analyze_streams   serial %8.2f ms   parallel %8.2f ms   x%.2f   %s\n",
                t_an_s, t_an_p, t_an_s / t_an_p, an_equal ? "outputs equal" : "OUTPUTS DIFFER");

    return parse_equal && an_equal ? 0 : 1;
}
