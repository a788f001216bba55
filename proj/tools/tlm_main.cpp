#include <optional>
#include <string>

#include "CLI11.hpp"
#include "tlm/cli.hpp"

int main(int argc, char** argv) {
    CLI::App app{"tlm — locate the label-leaking bytes of TLS traffic with interpretable models"};
    app.require_subcommand(1);

    // synth
    std::string profile_path, synth_out, synth_format = "jsonl";
    auto* synth = app.add_subcommand("synth", "generate a labeled synthetic dataset");
    synth->add_option("--profile", profile_path, "leakage profile JSON")->required();
    synth->add_option("--out", synth_out, "output path")->required();
    synth->add_option("--format", synth_format, "pcap|jsonl (default jsonl)");

    // ingest
    tlm::IngestOptions ingest_opts;
    auto* ingest = app.add_subcommand("ingest", "normalize captures into session JSONL");
    ingest->add_option("--pcap", ingest_opts.pcap_path, "pcap file (with --labels)");
    ingest->add_option("--labels", ingest_opts.labels_path, "flow-key/file-stem label map JSON");
    ingest->add_option("--pcap-dir", ingest_opts.pcap_dir, "directory of <label>/*.pcap");
    ingest->add_option("--jsonl", ingest_opts.jsonl_path, "session JSONL to re-normalize");
    ingest->add_option("--out", ingest_opts.out_path, "output JSONL path")->required();
    ingest->add_option("--direction", ingest_opts.direction, "both|c2s|s2c (default both)");

    // run
    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> out_dir;
    std::optional<int> threads;
    auto* run = app.add_subcommand("run", "execute the leaker-detection loop");
    run->add_option("--config", config_path, "run configuration JSON")->required();
    run->add_option("--seed", seed, "override the config seed");
    run->add_option("--out", out_dir, "override the output directory");
    run->add_option("--threads", threads, "worker cap (tree/net in parallel, search trials)");

    // report
    std::string report_path, report_out;
    bool plot_data = false;
    auto* report = app.add_subcommand("report", "re-render a run report");
    report->add_option("--report", report_path, "report.json from a run")->required();
    report->add_flag("--plot-data", plot_data, "write per-iteration offset-importance TSVs");
    report->add_option("--out", report_out, "directory for TSVs (default: next to the report)");

    CLI11_PARSE(app, argc, argv);

    if (synth->parsed()) return tlm::cmd_synth(profile_path, synth_out, synth_format);
    if (ingest->parsed()) return tlm::cmd_ingest(ingest_opts);
    if (run->parsed()) {
        tlm::RunOverrides overrides;
        overrides.seed = seed;
        overrides.out_dir = out_dir;
        overrides.threads = threads;
        return tlm::cmd_run(config_path, overrides);
    }
    if (report->parsed()) return tlm::cmd_report(report_path, plot_data, report_out);
    return 1;
}
