#include "segmon/config.hpp"
#include "segmon/detect.hpp"
#include "segmon/engine.hpp"
#include "segmon/pcap.hpp"
#include "segmon/pipeline.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <iostream>
#include <map>
#include <string>
#include <vector>

namespace {

using namespace segmon;

constexpr int EXIT_OK = 0;
constexpr int EXIT_ALARMS = 1;
constexpr int EXIT_INPUT = 2;
constexpr int EXIT_INTERNAL = 3;

int cmd_run(const std::string& config_path, const std::string& profile_path, double duration,
            uint64_t seed, const std::string& out_dir, bool no_monitoring, bool fail_on_alarm) {
    TopologyConfig config = load_config_file(config_path);
    TrafficProfile profile = load_profile_file(profile_path);
    RunOutputs outputs = run_scenario(config, profile, duration, seed, !no_monitoring);
    write_outputs(outputs, out_dir, !no_monitoring);
    if (fail_on_alarm && !outputs.alarms.empty())
        return EXIT_ALARMS;
    return EXIT_OK;
}

int cmd_flows(const std::string& pcap_path, const std::string& obs_point, uint32_t idle,
              uint32_t active) {
    std::vector<uint8_t> bytes = read_binary_file(pcap_path);
    ParseResult parsed = parse_pcap(bytes, obs_point);
    FlowTableConfig fcfg;
    fcfg.idle_timeout_s = idle;
    fcfg.active_timeout_s = active;
    StreamAnalysis analysis = analyze_stream(parsed.records, obs_point, fcfg, DetectorConfig{});
    for (const FlowRecord& f : analysis.flows)
        std::cout << flow_to_jsonl(f) << "\n";
    return EXIT_OK;
}

DetectorConfig detector_from_config_file(const std::string& path) {
    std::vector<uint8_t> raw = read_binary_file(path);
    std::string text(raw.begin(), raw.end());
    nlohmann::json doc = nlohmann::json::parse(text, nullptr, false);
    if (doc.is_discarded() || !doc.is_object())
        throw ConfigError({"SchemaViolation: detector config is not a JSON object"});
    if (doc.contains("segments")) {
        // Full scenario config; reuse its detector block.
        return load_config(text).detector;
    }
    const nlohmann::json& d = doc.contains("detector") ? doc["detector"] : doc;
    DetectorConfig cfg;
    if (d.contains("window_s")) cfg.window_s = d["window_s"].get<uint32_t>();
    if (d.contains("alpha")) cfg.alpha = d["alpha"].get<double>();
    if (d.contains("k_sigma")) cfg.k_sigma = d["k_sigma"].get<double>();
    if (d.contains("sigma_min")) cfg.sigma_min = d["sigma_min"].get<double>();
    if (d.contains("warmup_windows")) cfg.warmup_windows = d["warmup_windows"].get<uint32_t>();
    if (d.contains("scan_port_threshold"))
        cfg.scan_port_threshold = d["scan_port_threshold"].get<uint32_t>();
    if (d.contains("learning_windows")) cfg.learning_windows = d["learning_windows"].get<uint32_t>();
    if (d.contains("global_scan_threshold"))
        cfg.global_scan_threshold = d["global_scan_threshold"].get<uint32_t>();
    if (!(cfg.alpha > 0.0 && cfg.alpha < 1.0) || !(cfg.k_sigma > 0.0) ||
        !(cfg.sigma_min > 0.0) || cfg.window_s == 0)
        throw ConfigError({"SchemaViolation: detector parameters out of range"});
    return cfg;
}

int cmd_detect(const std::string& flows_path, const std::string& pcap_path,
               const std::string& config_path, const std::string& obs_point, bool fail_on_alarm) {
    DetectorConfig dcfg =
        config_path.empty() ? DetectorConfig{} : detector_from_config_file(config_path);
    std::vector<Alarm> alarms;
    if (!pcap_path.empty()) {
        std::vector<uint8_t> bytes = read_binary_file(pcap_path);
        ParseResult parsed = parse_pcap(bytes, obs_point);
        StreamAnalysis analysis = analyze_stream(parsed.records, obs_point, FlowTableConfig{}, dcfg);
        alarms = analysis.alarms;
    } else {
        std::vector<uint8_t> raw = read_binary_file(flows_path);
        std::string text(raw.begin(), raw.end());
        std::vector<FlowRecord> flows;
        size_t start = 0;
        while (start < text.size()) {
            size_t end = text.find('\n', start);
            if (end == std::string::npos)
                end = text.size();
            std::string line = text.substr(start, end - start);
            if (!line.empty())
                flows.push_back(flow_from_jsonl(line));
            start = end + 1;
        }
        std::map<std::string, DetectorState> states;
        for (const WindowFeatures& w : windowize(flows, dcfg))
            for (const Alarm& a : process_window(states[w.obs_point], w, dcfg))
                alarms.push_back(a);
    }
    for (const Alarm& a : alarms)
        std::cout << alarm_to_jsonl(a) << "\n";
    if (fail_on_alarm && !alarms.empty())
        return EXIT_ALARMS;
    return EXIT_OK;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Passive monitoring toolkit for segmented industrial networks"};
    app.require_subcommand(1);

    auto* run = app.add_subcommand("run", "Simulate a scenario and write its artifacts");
    std::string run_config, run_profile, run_out;
    double run_duration = 0.0;
    uint64_t run_seed = 0;
    bool run_no_monitoring = false, run_fail_on_alarm = false;
    run->add_option("--config", run_config, "Topology config JSON")->required();
    run->add_option("--profile", run_profile, "Traffic profile JSON")->required();
    run->add_option("--duration", run_duration, "Simulated seconds")->required();
    run->add_option("--seed", run_seed, "PRNG seed")->required();
    run->add_option("--out", run_out, "Output directory")->required();
    run->add_flag("--no-monitoring", run_no_monitoring,
                  "Run the production network only (writes just ledger.csv)");
    run->add_flag("--fail-on-alarm", run_fail_on_alarm, "Exit 1 if any alarm was raised");

    auto* flows = app.add_subcommand("flows", "Extract flows from a pcap capture");
    std::string flows_pcap, flows_obs;
    uint32_t flows_idle = 15, flows_active = 300;
    flows->add_option("--pcap", flows_pcap, "Input capture")->required();
    flows->add_option("--obs-point", flows_obs, "Observation point label")->required();
    flows->add_option("--idle", flows_idle, "Idle timeout seconds");
    flows->add_option("--active", flows_active, "Active timeout seconds");

    auto* detect = app.add_subcommand("detect", "Run detectors over flows or a capture");
    std::string det_flows, det_pcap, det_config, det_obs = "capture";
    bool det_fail_on_alarm = false;
    auto* opt_flows = detect->add_option("--flows", det_flows, "Flow JSONL input");
    auto* opt_pcap = detect->add_option("--pcap", det_pcap, "Pcap input");
    opt_flows->excludes(opt_pcap);
    detect->add_option("--config", det_config, "Detector config JSON");
    detect->add_option("--obs-point", det_obs, "Observation point label for pcap input");
    detect->add_flag("--fail-on-alarm", det_fail_on_alarm, "Exit 1 if any alarm was raised");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? EXIT_OK : EXIT_INPUT;
    }

    try {
        if (run->parsed())
            return cmd_run(run_config, run_profile, run_duration, run_seed, run_out,
                           run_no_monitoring, run_fail_on_alarm);
        if (flows->parsed())
            return cmd_flows(flows_pcap, flows_obs, flows_idle, flows_active);
        if (detect->parsed()) {
            if (det_flows.empty() && det_pcap.empty()) {
                std::cerr << "detect: one of --flows or --pcap is required\n";
                return EXIT_INPUT;
            }
            return cmd_detect(det_flows, det_pcap, det_config, det_obs, det_fail_on_alarm);
        }
    } catch (const ConfigError& e) {
        for (const std::string& v : e.violations())
            std::cerr << v << "\n";
        return EXIT_INPUT;
    } catch (const PcapError& e) {
        std::cerr << e.what() << "\n";
        return EXIT_INPUT;
    } catch (const FlowError& e) {
        std::cerr << e.what() << "\n";
        return EXIT_INPUT;
    } catch (const DetectError& e) {
        std::cerr << e.what() << "\n";
        return EXIT_INPUT;
    } catch (const nlohmann::json::exception& e) {
        std::cerr << "malformed input: " << e.what() << "\n";
        return EXIT_INPUT;
    } catch (const std::runtime_error& e) {
        std::cerr << e.what() << "\n";
        return EXIT_INPUT;
    } catch (const std::exception& e) {
        std::cerr << "internal error: " << e.what() << "\n";
        return EXIT_INTERNAL;
    }
    return EXIT_INTERNAL;
}
