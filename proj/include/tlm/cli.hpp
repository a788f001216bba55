#pragma once

#include <optional>
#include <string>

#include "json.hpp"
#include "tlm/ingest.hpp"

namespace tlm {

// Exit codes for `run`: 0 ok, 1 config error, 2 data error, 3 training failure.
inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 1;
inline constexpr int kExitData = 2;
inline constexpr int kExitTraining = 3;

int cmd_synth(const std::string& profile_path, const std::string& out_path,
              const std::string& format);

struct IngestOptions {
    std::string pcap_path;    // single pcap (requires labels_path)
    std::string labels_path;  // JSON {"flow key or file stem": "label"}
    std::string pcap_dir;     // directory of <label>/*.pcap
    std::string jsonl_path;   // already-normalized sessions
    std::string out_path;     // output JSONL
    std::string direction = "both";  // both|c2s|s2c
};

int cmd_ingest(const IngestOptions& opts);

struct RunOverrides {
    std::optional<std::uint64_t> seed;
    std::optional<std::string> out_dir;
    std::optional<int> threads;
};

// Config file: FrameworkConfig fields plus
//   "dataset": {"synth_profile": p} | {"jsonl": p} | {"pcap": p, "labels": p}
//              | {"pcap_dir": p}
//   "out_dir": directory for report.json, timings.json, impact CSVs, model
//              JSONs; "direction": both|c2s|s2c.
int cmd_run(const std::string& config_path, const RunOverrides& overrides = {});

int cmd_report(const std::string& report_path, bool plot_data,
               const std::string& out_dir = "");

// Loads the dataset named by a run config's "dataset" object.
LabeledDataset load_dataset(const nlohmann::json& dataset_spec, const std::string& direction);

}  // namespace tlm
