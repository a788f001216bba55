#include "tlm/cli.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>

#include "tlm/framework.hpp"
#include "tlm/synth.hpp"

namespace tlm {

namespace fs = std::filesystem;

namespace {

nlohmann::json load_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path);
    nlohmann::json j;
    in >> j;
    return j;
}

void write_text_file(const std::string& path, const std::string& text) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path);
    out << text;
    if (!out) throw IoError("write failed for " + path);
}

std::size_t total_segments(const LabeledDataset& ds) {
    std::size_t n = 0;
    for (const Session& s : ds.sessions) n += s.segments.size();
    return n;
}

std::optional<Direction> parse_direction(const std::string& s) {
    if (s == "both") return std::nullopt;
    if (s == "c2s") return Direction::ClientToServer;
    if (s == "s2c") return Direction::ServerToClient;
    throw Error("direction must be both, c2s or s2c");
}

// Accuracy table in the layout of the run's iterations: one row per model
// kind, one column per iteration, test accuracy in percent.
void print_report_summary(const nlohmann::json& report, std::FILE* out) {
    const auto& iterations = report.at("iterations");
    std::fprintf(out, "%-12s", "Model");
    for (const auto& it : iterations) {
        std::fprintf(out, "  Itr. %-3d", it.at("index").get<int>());
    }
    std::fprintf(out, "\n");

    const std::vector<std::pair<std::string, std::string>> rows = {
        {"cnn", "1-D Conv"}, {"decision_tree", "DT"}};
    for (const auto& [kind, title] : rows) {
        std::fprintf(out, "%-12s", title.c_str());
        for (const auto& it : iterations) {
            double acc = 0.0;
            for (const auto& m : it.at("models")) {
                if (m.at("kind") == kind) acc = m.at("test_accuracy").get<double>();
            }
            std::fprintf(out, "  %7.2f ", acc * 100.0);
        }
        std::fprintf(out, "\n");
    }

    for (const auto& it : iterations) {
        const auto& sel = it.at("selection");
        std::string offsets;
        for (const auto& o : sel.at("offsets")) {
            if (!offsets.empty()) offsets += ",";
            offsets += std::to_string(o.get<int>());
        }
        std::fprintf(out, "iteration %d: view=%s mask=%d leakers={%s} mass=%.3f conc=%.3f%s%s\n",
                     it.at("index").get<int>(),
                     it.at("view").at("kind").get<std::string>().c_str(),
                     it.at("view").at("per_packet_mask").get<int>(), offsets.c_str(),
                     sel.at("mass_covered").get<double>(),
                     sel.at("concentration").get<double>(),
                     it.at("terminated").get<bool>() ? " terminated=" : "",
                     it.at("terminated").get<bool>()
                         ? it.at("termination_reason").get<std::string>().c_str()
                         : "");
    }
}

}  // namespace

LabeledDataset load_dataset(const nlohmann::json& dataset_spec, const std::string& direction) {
    LabeledDataset ds;
    if (dataset_spec.contains("synth_profile")) {
        const LeakageProfile profile =
            LeakageProfile::from_file(dataset_spec["synth_profile"].get<std::string>());
        ds = generate(profile);
    } else if (dataset_spec.contains("jsonl")) {
        ds = read_sessions_jsonl(dataset_spec["jsonl"].get<std::string>());
    } else if (dataset_spec.contains("pcap")) {
        if (!dataset_spec.contains("labels")) throw Error("pcap dataset needs a labels map");
        const std::string pcap_path = dataset_spec["pcap"].get<std::string>();
        const nlohmann::json labels = load_json_file(dataset_spec["labels"].get<std::string>());
        const PcapParse parsed = parse_pcap_file(pcap_path);
        const auto labeler = [&labels](const FlowKey& key) -> std::optional<std::string> {
            const auto it = labels.find(key.str());
            if (it == labels.end()) return std::nullopt;
            return it->get<std::string>();
        };
        std::size_t dropped = 0;
        ds = assemble_sessions(parsed.pairs, labeler, Origin{Origin::Kind::Pcap, pcap_path, 0},
                               &dropped);
    } else if (dataset_spec.contains("pcap_dir")) {
        // <dir>/<label>/*.pcap — every flow in a file takes the directory name.
        const fs::path root(dataset_spec["pcap_dir"].get<std::string>());
        if (!fs::is_directory(root)) throw IoError(root.string() + " is not a directory");
        std::vector<Session> sessions;
        std::vector<fs::path> subdirs;
        for (const auto& e : fs::directory_iterator(root)) {
            if (e.is_directory()) subdirs.push_back(e.path());
        }
        std::sort(subdirs.begin(), subdirs.end());
        for (const fs::path& sub : subdirs) {
            const std::string label = sub.filename().string();
            std::vector<fs::path> files;
            for (const auto& e : fs::directory_iterator(sub)) {
                if (e.path().extension() == ".pcap") files.push_back(e.path());
            }
            std::sort(files.begin(), files.end());
            for (const fs::path& file : files) {
                const PcapParse parsed = parse_pcap_file(file.string());
                const auto labeler = [&label](const FlowKey&) { return std::optional(label); };
                LabeledDataset one = assemble_sessions(
                    parsed.pairs, labeler, Origin{Origin::Kind::Pcap, file.string(), 0});
                const std::string stem = file.stem().string();
                for (Session& s : one.sessions) {
                    s.id = label + "/" + stem + "/" + s.id;
                    sessions.push_back(std::move(s));
                }
            }
        }
        ds = LabeledDataset::from_sessions(std::move(sessions));
    } else {
        throw Error("dataset must name synth_profile, jsonl, pcap or pcap_dir");
    }
    return filter_direction(ds, parse_direction(direction));
}

int cmd_synth(const std::string& profile_path, const std::string& out_path,
              const std::string& format) {
    try {
        const LeakageProfile profile = LeakageProfile::from_file(profile_path);
        const LabeledDataset ds = generate(profile);
        if (format == "pcap") {
            write_pcap(ds, out_path);
            write_text_file(out_path + ".labels.json", make_label_map(ds).dump(2) + "\n");
        } else if (format == "jsonl") {
            write_sessions_jsonl(ds, out_path);
        } else {
            std::fprintf(stderr, "unknown format '%s' (pcap|jsonl)\n", format.c_str());
            return 1;
        }
        std::printf("wrote %s: %zu classes, %zu sessions, %zu segments\n", out_path.c_str(),
                    ds.class_names.size(), ds.sessions.size(), total_segments(ds));
        return 0;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "synth failed: %s\n", e.what());
        return 1;
    }
}

int cmd_ingest(const IngestOptions& opts) {
    try {
        nlohmann::json dataset_spec = nlohmann::json::object();
        if (!opts.jsonl_path.empty()) dataset_spec["jsonl"] = opts.jsonl_path;
        else if (!opts.pcap_dir.empty()) dataset_spec["pcap_dir"] = opts.pcap_dir;
        else if (!opts.pcap_path.empty()) {
            dataset_spec["pcap"] = opts.pcap_path;
            dataset_spec["labels"] = opts.labels_path;
        } else {
            std::fprintf(stderr, "ingest needs --pcap, --pcap-dir or --jsonl\n");
            return kExitConfig;
        }
        const LabeledDataset ds = load_dataset(dataset_spec, opts.direction);
        write_sessions_jsonl(ds, opts.out_path);
        std::printf("wrote %s: %zu classes, %zu sessions, %zu segments\n", opts.out_path.c_str(),
                    ds.class_names.size(), ds.sessions.size(), total_segments(ds));
        return 0;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "ingest failed: %s\n", e.what());
        return kExitData;
    }
}

int cmd_run(const std::string& config_path, const RunOverrides& overrides) {
    // Configuration stage.
    nlohmann::json config_json;
    FrameworkConfig cfg;
    std::string out_dir;
    std::string direction;
    try {
        config_json = load_json_file(config_path);
        cfg = FrameworkConfig::from_json(config_json);
        if (overrides.seed) cfg.seed = *overrides.seed;
        if (overrides.threads) cfg.threads = *overrides.threads;
        out_dir = config_json.value("out_dir", std::string("tlm-out"));
        if (overrides.out_dir) out_dir = *overrides.out_dir;
        direction = config_json.value("direction", std::string("both"));
        if (!config_json.contains("dataset")) throw Error("config missing 'dataset'");
        parse_direction(direction);
    } catch (const std::exception& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return kExitConfig;
    }

    // Data stage.
    LabeledDataset ds;
    try {
        ds = load_dataset(config_json["dataset"], direction);
        if (ds.sessions.empty()) throw Error("dataset has no sessions");
    } catch (const std::exception& e) {
        std::fprintf(stderr, "data error: %s\n", e.what());
        return kExitData;
    }

    // Training stage.
    std::vector<IterationReport> reports;
    const auto t0 = std::chrono::steady_clock::now();
    try {
        reports = cfg.mode == RunMode::Scripted ? run_scripted(ds, cfg) : run_auto(ds, cfg);
    } catch (const EmptyView& e) {
        std::fprintf(stderr, "data error: %s\n", e.what());
        return kExitData;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "training error: %s\n", e.what());
        return kExitTraining;
    }
    const double elapsed =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

    // Artifacts.
    try {
        fs::create_directories(out_dir);
        nlohmann::json report = report_to_json(cfg, ds, reports);
        for (std::size_t i = 0; i < reports.size(); i++) {
            const std::string tag = "it" + std::to_string(reports[i].index);
            const std::string csv = "impact_" + tag + ".csv";
            const std::string tree_file = "tree_" + tag + ".json";
            const std::string cnn_file = "cnn_" + tag + ".json";
            export_impact_csv(reports[i].impact, reports[i].view, (fs::path(out_dir) / csv).string());
            write_text_file((fs::path(out_dir) / tree_file).string(), reports[i].tree_json.dump(2) + "\n");
            write_text_file((fs::path(out_dir) / cnn_file).string(), reports[i].cnn_json.dump() + "\n");
            report["iterations"][i]["artifacts"] = {
                {"impact_csv", csv}, {"tree_json", tree_file}, {"cnn_json", cnn_file}};
        }
        write_text_file((fs::path(out_dir) / "report.json").string(), report.dump(2) + "\n");
        write_text_file((fs::path(out_dir) / "timings.json").string(),
                        nlohmann::json{{"total_seconds", elapsed}}.dump(2) + "\n");
        print_report_summary(report, stdout);
        std::printf("report: %s\n", (fs::path(out_dir) / "report.json").string().c_str());
        return 0;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "artifact error: %s\n", e.what());
        return kExitData;
    }
}

int cmd_report(const std::string& report_path, bool plot_data, const std::string& out_dir) {
    nlohmann::json report;
    try {
        report = load_json_file(report_path);
        print_report_summary(report, stdout);
    } catch (const std::exception& e) {
        std::fprintf(stderr, "report error: %s\n", e.what());
        return 1;
    }
    if (!plot_data) return 0;
    try {
        const fs::path dir = out_dir.empty() ? fs::path(report_path).parent_path() : fs::path(out_dir);
        fs::create_directories(dir.empty() ? "." : dir);
        for (const auto& it : report.at("iterations")) {
            const auto& imp = it.at("offset_importance");
            const std::string name = "offsets_it" + std::to_string(it.at("index").get<int>()) + ".tsv";
            std::ofstream f(dir / name);
            if (!f) throw IoError("cannot write " + (dir / name).string());
            f << "offset\timportance\n";
            char buf[64];
            for (std::size_t i = 0; i < imp.size(); i++) {
                std::snprintf(buf, sizeof(buf), "%.12g", imp[i].get<double>());
                f << i << '\t' << buf << '\n';
            }
            std::printf("wrote %s\n", (dir / name).string().c_str());
        }
        return 0;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "report error: %s\n", e.what());
        return 1;
    }
}

}  // namespace tlm
