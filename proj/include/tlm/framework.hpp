#pragma once

#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "tlm/cnn.hpp"
#include "tlm/interpret.hpp"
#include "tlm/tree.hpp"

namespace tlm {

enum class RunMode { Scripted, Auto };

enum class TerminationReason { ImportanceDiffuse, TreeLagsDeepModel, MaxIterations, ManualScript };

std::string to_string(TerminationReason r);

struct ModelReport {
    std::string kind;  // "decision_tree" | "cnn"
    nlohmann::json hyperparams;
    double train_accuracy = 0.0;
    double test_accuracy = 0.0;
    std::uint64_t seed = 0;

    nlohmann::json to_json() const;
};

// One pass of the leaker-detection loop.
struct IterationReport {
    int index = 0;
    ViewSpec view;
    std::vector<ModelReport> models;  // [0] decision tree, [1] cnn
    ImpactVector impact;
    std::vector<double> offset_importance;  // aggregated per offset
    LeakerSelection selection;
    bool dt_close_to_nn = false;
    bool terminated = false;
    std::optional<TerminationReason> termination_reason;
    std::size_t train_samples = 0, test_samples = 0;
    std::size_t dropped_all_zero = 0;

    // Serialized models, written to standalone files by the CLI.
    nlohmann::json tree_json;
    nlohmann::json cnn_json;

    double tree_test_accuracy() const { return models.at(0).test_accuracy; }
    double cnn_test_accuracy() const { return models.at(1).test_accuracy; }

    nlohmann::json to_json() const;
};

struct FrameworkConfig {
    RunMode mode = RunMode::Scripted;
    double closeness_ratio = 0.85;
    double concentration_threshold = 0.30;
    int top_k = 16;
    double min_share = 0.02;
    int max_iterations = 8;
    double chance_margin = 0.10;
    double test_fraction = 0.2;
    std::uint64_t seed = 42;

    std::vector<int> tree_depths = {4, 6, 8, 10, 12, 16, 20};
    int tree_min_samples_split = 2;
    SplitCriterion tree_criterion = SplitCriterion::Gini;
    double val_fraction = 0.25;  // tuning holdout inside the training split

    int cnn_epochs = 30;
    int cnn_batch = 64;
    int cnn_search_budget = 0;  // 0: use cnn_hyperparams (or the small default)
    std::optional<CnnHyperparams> cnn_hyperparams;

    int importance_repeats = 1;  // >1 averages tree impact over retrain seeds
    int threads = 1;
    ViewSpec initial_view;  // auto-mode starting view

    void validate() const;
    nlohmann::json to_json() const;
    static FrameworkConfig from_json(const nlohmann::json& j);
};

// Desk-scale architecture used when no search budget and no explicit
// hyperparameters are configured.
CnnHyperparams default_cnn_hyperparams();

// One pass: build view, split, tune + train tree and reference net, compute
// accuracies, closeness, impact, selection. Does not decide masking.
IterationReport run_iteration(const LabeledDataset& ds, const ViewSpec& spec,
                              const FrameworkConfig& cfg, int index = 1);

// The fixed five-view sequence: raw TCP payloads; app-data records; app-data
// with a 5-byte header mask; with a 21-byte header+IV mask; and 2000-byte
// concatenated payloads with the per-payload 21-byte mask. The last report is
// marked terminated (ManualScript).
std::vector<IterationReport> run_scripted(const LabeledDataset& ds, const FrameworkConfig& cfg);

// Starts from cfg.initial_view and grows the per-packet mask to the prefix
// covering all selected offsets each round. Stops when importance is diffuse,
// the tree accuracy falls to chance + margin (both recorded as
// ImportanceDiffuse), the tree lags the reference net, or the budget runs out.
std::vector<IterationReport> run_auto(const LabeledDataset& ds, const FrameworkConfig& cfg);

// Deterministic run report (config echo + iterations). Wall-clock timings are
// deliberately not part of this document.
nlohmann::json report_to_json(const FrameworkConfig& cfg, const LabeledDataset& ds,
                              const std::vector<IterationReport>& reports);

}  // namespace tlm
