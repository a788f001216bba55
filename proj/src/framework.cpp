#include "tlm/framework.hpp"

#include <algorithm>
#include <cmath>
#include <future>

#include "tlm/search.hpp"

namespace tlm {

std::string to_string(TerminationReason r) {
    switch (r) {
        case TerminationReason::ImportanceDiffuse: return "importance_diffuse";
        case TerminationReason::TreeLagsDeepModel: return "tree_lags_deep_model";
        case TerminationReason::MaxIterations: return "max_iterations";
        case TerminationReason::ManualScript: return "manual_script";
    }
    return "?";
}

nlohmann::json ModelReport::to_json() const {
    return nlohmann::json{{"kind", kind},
                          {"hyperparams", hyperparams},
                          {"train_accuracy", train_accuracy},
                          {"test_accuracy", test_accuracy},
                          {"seed", seed}};
}

nlohmann::json IterationReport::to_json() const {
    nlohmann::json models_j = nlohmann::json::array();
    for (const ModelReport& m : models) models_j.push_back(m.to_json());
    return nlohmann::json{
        {"index", index},
        {"view", view.to_json()},
        {"models", std::move(models_j)},
        {"impact", impact.values},
        {"offset_importance", offset_importance},
        {"selection",
         {{"offsets", selection.offsets},
          {"mass_covered", selection.mass_covered},
          {"concentration", selection.concentration}}},
        {"dt_close_to_nn", dt_close_to_nn},
        {"terminated", terminated},
        {"termination_reason",
         termination_reason ? nlohmann::json(to_string(*termination_reason)) : nlohmann::json()},
        {"counts",
         {{"train_samples", train_samples},
          {"test_samples", test_samples},
          {"dropped_all_zero", dropped_all_zero}}}};
}

void FrameworkConfig::validate() const {
    auto ratio_ok = [](double r) { return r > 0.0 && r <= 1.0; };
    if (!ratio_ok(closeness_ratio)) throw Error("closeness_ratio must be in (0,1]");
    if (!ratio_ok(concentration_threshold)) throw Error("concentration_threshold must be in (0,1]");
    if (!(min_share >= 0.0 && min_share <= 1.0)) throw Error("min_share must be in [0,1]");
    if (!(chance_margin >= 0.0 && chance_margin <= 1.0)) throw Error("chance_margin must be in [0,1]");
    if (!(test_fraction > 0.0 && test_fraction < 1.0)) throw Error("test_fraction must be in (0,1)");
    if (!(val_fraction > 0.0 && val_fraction < 1.0)) throw Error("val_fraction must be in (0,1)");
    if (top_k < 1) throw Error("top_k must be >= 1");
    if (max_iterations < 1) throw Error("max_iterations must be >= 1");
    if (tree_depths.empty()) throw Error("tree_depths must not be empty");
    if (cnn_epochs < 0 || cnn_batch < 1) throw Error("bad cnn epochs/batch");
    if (importance_repeats < 1) throw Error("importance_repeats must be >= 1");
    if (threads < 1) throw Error("threads must be >= 1");
}

nlohmann::json FrameworkConfig::to_json() const {
    nlohmann::json j{{"mode", mode == RunMode::Scripted ? "scripted" : "auto"},
                     {"closeness_ratio", closeness_ratio},
                     {"concentration_threshold", concentration_threshold},
                     {"top_k", top_k},
                     {"min_share", min_share},
                     {"max_iterations", max_iterations},
                     {"chance_margin", chance_margin},
                     {"test_fraction", test_fraction},
                     {"seed", seed},
                     {"tree_depths", tree_depths},
                     {"tree_min_samples_split", tree_min_samples_split},
                     {"tree_criterion", tree_criterion == SplitCriterion::Gini ? "gini" : "entropy"},
                     {"val_fraction", val_fraction},
                     {"cnn_epochs", cnn_epochs},
                     {"cnn_batch", cnn_batch},
                     {"cnn_search_budget", cnn_search_budget},
                     {"importance_repeats", importance_repeats},
                     {"threads", threads},
                     {"initial_view", initial_view.to_json()}};
    if (cnn_hyperparams) j["cnn_hyperparams"] = cnn_hyperparams->to_json();
    return j;
}

FrameworkConfig FrameworkConfig::from_json(const nlohmann::json& j) {
    FrameworkConfig c;
    const std::string mode = j.value("mode", std::string("scripted"));
    if (mode == "scripted") c.mode = RunMode::Scripted;
    else if (mode == "auto") c.mode = RunMode::Auto;
    else throw Error("mode must be 'scripted' or 'auto'");
    c.closeness_ratio = j.value("closeness_ratio", c.closeness_ratio);
    c.concentration_threshold = j.value("concentration_threshold", c.concentration_threshold);
    c.top_k = j.value("top_k", c.top_k);
    c.min_share = j.value("min_share", c.min_share);
    c.max_iterations = j.value("max_iterations", c.max_iterations);
    c.chance_margin = j.value("chance_margin", c.chance_margin);
    c.test_fraction = j.value("test_fraction", c.test_fraction);
    c.seed = j.value("seed", c.seed);
    c.tree_depths = j.value("tree_depths", c.tree_depths);
    c.tree_min_samples_split = j.value("tree_min_samples_split", c.tree_min_samples_split);
    c.tree_criterion = j.value("tree_criterion", std::string("gini")) == "entropy"
                           ? SplitCriterion::Entropy
                           : SplitCriterion::Gini;
    c.val_fraction = j.value("val_fraction", c.val_fraction);
    c.cnn_epochs = j.value("cnn_epochs", c.cnn_epochs);
    c.cnn_batch = j.value("cnn_batch", c.cnn_batch);
    c.cnn_search_budget = j.value("cnn_search_budget", c.cnn_search_budget);
    c.importance_repeats = j.value("importance_repeats", c.importance_repeats);
    c.threads = j.value("threads", c.threads);
    if (j.contains("initial_view")) c.initial_view = ViewSpec::from_json(j["initial_view"]);
    if (j.contains("cnn_hyperparams")) {
        c.cnn_hyperparams = CnnHyperparams::from_json(j["cnn_hyperparams"]);
    }
    c.validate();
    return c;
}

CnnHyperparams default_cnn_hyperparams() {
    CnnHyperparams h;
    h.conv = {ConvSpec{16, 8, 4}};
    h.fc = {64};
    h.activation = Activation::Relu;
    h.dropout = 0.1;
    h.learning_rate = 1e-3;
    return h;
}

namespace {

struct TreeOutcome {
    DecisionTree tree;
    ModelReport report;
    ImpactVector impact;
};

TreeOutcome run_tree_side(const ViewDataset& train, const ViewDataset& test,
                          const FrameworkConfig& cfg, int index) {
    const std::uint64_t tree_seed = stream_key(cfg.seed, 0x74726565, static_cast<std::uint64_t>(index));
    TreeConfig base;
    base.min_samples_split = cfg.tree_min_samples_split;
    base.criterion = cfg.tree_criterion;

    const int depth = select_tree_depth(train, cfg.tree_depths, cfg.val_fraction, base, tree_seed);
    TreeConfig config = base;
    config.max_depth = depth;
    DecisionTree tree = train_tree(train, config, tree_seed);

    TreeOutcome out;
    out.report.kind = "decision_tree";
    out.report.hyperparams = {{"max_depth", depth},
                              {"min_samples_split", config.min_samples_split},
                              {"criterion", config.criterion == SplitCriterion::Gini ? "gini" : "entropy"}};
    out.report.train_accuracy = accuracy(tree, train);
    out.report.test_accuracy = accuracy(tree, test);
    out.report.seed = tree_seed;

    if (cfg.importance_repeats <= 1) {
        out.impact.values = tree_importance(tree);
    } else {
        // Mean impact over retrain seeds, renormalized.
        std::vector<double> sum(static_cast<std::size_t>(train.dims()), 0.0);
        for (int r = 0; r < cfg.importance_repeats; r++) {
            const DecisionTree t =
                r == 0 ? tree : train_tree(train, config, stream_key(tree_seed, static_cast<std::uint64_t>(r)));
            const std::vector<double> imp = tree_importance(t);
            for (std::size_t i = 0; i < sum.size(); i++) sum[i] += imp[i];
        }
        double total = 0.0;
        for (double v : sum) total += v;
        if (total > 0.0) {
            for (double& v : sum) v /= total;
        }
        out.impact.values = std::move(sum);
    }
    out.tree = std::move(tree);
    return out;
}

struct CnnOutcome {
    CnnModel model;
    ModelReport report;
};

CnnOutcome run_cnn_side(const ViewDataset& train, const ViewDataset& test,
                        const FrameworkConfig& cfg, int index) {
    const std::uint64_t cnn_seed = stream_key(cfg.seed, 0x636e6e, static_cast<std::uint64_t>(index));

    CnnHyperparams h;
    if (cfg.cnn_search_budget >= 1) {
        auto [subtrain, val] = split_view_stratified(train, cfg.val_fraction, cnn_seed);
        const auto objective = [&](const Assignment& a) -> double {
            try {
                const CnnHyperparams cand = cnn_hyperparams_from_assignment(a);
                const CnnModel m = train_cnn(subtrain, cand, cfg.cnn_epochs, cfg.cnn_batch, cnn_seed);
                return accuracy(m, val);
            } catch (const ShapeError&) {
                return -1.0;  // architecture does not fit this input length
            } catch (const NonFiniteLoss&) {
                return -1.0;
            }
        };
        const SearchResult found = random_search(default_cnn_space(), cfg.cnn_search_budget,
                                                 objective, cnn_seed, cfg.threads);
        h = cnn_hyperparams_from_assignment(found.best);
    } else if (cfg.cnn_hyperparams) {
        h = *cfg.cnn_hyperparams;
    } else {
        h = default_cnn_hyperparams();
    }

    CnnOutcome out;
    out.model = train_cnn(train, h, cfg.cnn_epochs, cfg.cnn_batch, cnn_seed);
    out.report.kind = "cnn";
    out.report.hyperparams = h.to_json();
    out.report.hyperparams["epochs"] = cfg.cnn_epochs;
    out.report.hyperparams["batch_size"] = cfg.cnn_batch;
    out.report.train_accuracy = accuracy(out.model, train);
    out.report.test_accuracy = accuracy(out.model, test);
    out.report.seed = cnn_seed;
    return out;
}

}  // namespace

IterationReport run_iteration(const LabeledDataset& ds, const ViewSpec& spec,
                              const FrameworkConfig& cfg, int index) {
    cfg.validate();
    spec.validate();

    LabeledDataset keyed = ds;
    keyed.split_seed = stream_key(cfg.seed, 0x73706c6974);
    auto [train_ds, test_ds] = split_dataset(keyed, cfg.test_fraction);
    const ViewDataset train = build_view(train_ds, spec);
    const ViewDataset test = build_view(test_ds, spec);

    IterationReport rep;
    rep.index = index;
    rep.view = spec;
    rep.train_samples = train.samples.size();
    rep.test_samples = test.samples.size();
    rep.dropped_all_zero = train.dropped_all_zero + test.dropped_all_zero;

    TreeOutcome tree_out;
    CnnOutcome cnn_out;
    if (cfg.threads > 1) {
        auto tree_fut = std::async(std::launch::async,
                                   [&] { return run_tree_side(train, test, cfg, index); });
        cnn_out = run_cnn_side(train, test, cfg, index);
        tree_out = tree_fut.get();
    } else {
        tree_out = run_tree_side(train, test, cfg, index);
        cnn_out = run_cnn_side(train, test, cfg, index);
    }

    rep.models.push_back(tree_out.report);
    rep.models.push_back(cnn_out.report);
    rep.impact = std::move(tree_out.impact);
    rep.offset_importance = aggregate_importance(rep.impact, spec);
    rep.selection = select_leakers(rep.impact, spec, LeakerPolicy{cfg.top_k, cfg.min_share});

    const double tree_acc = rep.tree_test_accuracy();
    const double nn_acc = rep.cnn_test_accuracy();
    rep.dt_close_to_nn = tree_acc >= cfg.closeness_ratio * std::max(nn_acc, tree_acc);

    rep.tree_json = tree_out.tree.to_json();
    rep.cnn_json = cnn_out.model.to_json();
    return rep;
}

std::vector<IterationReport> run_scripted(const LabeledDataset& ds, const FrameworkConfig& cfg) {
    if (cfg.mode != RunMode::Scripted) throw Error("run_scripted requires scripted mode");

    std::vector<ViewSpec> specs(5);
    specs[0].kind = ViewKind::TcpPayload;
    specs[1].kind = ViewKind::TlsAppData;
    specs[2].kind = ViewKind::TlsAppData;
    specs[2].per_packet_mask = 5;
    specs[3].kind = ViewKind::TlsAppData;
    specs[3].per_packet_mask = 21;
    specs[4].kind = ViewKind::ConcatTls;
    specs[4].per_packet_mask = 21;
    specs[4].concat_length = 2000;

    std::vector<IterationReport> reports;
    for (std::size_t i = 0; i < specs.size(); i++) {
        log_info("scripted iteration " + std::to_string(i + 1) + " (" + to_string(specs[i].kind) + ")");
        IterationReport rep = run_iteration(ds, specs[i], cfg, static_cast<int>(i + 1));
        if (i + 1 == specs.size()) {
            rep.terminated = true;
            rep.termination_reason = TerminationReason::ManualScript;
        }
        reports.push_back(std::move(rep));
    }
    return reports;
}

std::vector<IterationReport> run_auto(const LabeledDataset& ds, const FrameworkConfig& cfg) {
    if (cfg.mode != RunMode::Auto) throw Error("run_auto requires auto mode");
    ViewSpec spec = cfg.initial_view;
    if (spec.kind == ViewKind::ConcatTls) {
        throw Error("auto mode needs a packetized starting view");
    }

    const double chance = 1.0 / static_cast<double>(ds.class_names.size());
    std::vector<IterationReport> reports;
    for (int round = 1; round <= cfg.max_iterations; round++) {
        log_info("auto round " + std::to_string(round) + ", mask prefix " +
                 std::to_string(spec.per_packet_mask));
        IterationReport rep = run_iteration(ds, spec, cfg, round);

        std::optional<TerminationReason> reason;
        if (rep.selection.concentration < cfg.concentration_threshold) {
            reason = TerminationReason::ImportanceDiffuse;
        } else if (rep.tree_test_accuracy() <= chance + cfg.chance_margin) {
            reason = TerminationReason::ImportanceDiffuse;  // nothing left to extract
        } else if (!rep.dt_close_to_nn) {
            reason = TerminationReason::TreeLagsDeepModel;
        } else if (round == cfg.max_iterations) {
            reason = TerminationReason::MaxIterations;
        }

        if (reason) {
            rep.terminated = true;
            rep.termination_reason = reason;
            reports.push_back(std::move(rep));
            break;
        }

        // Prefix closure over the selected offsets.
        if (!rep.selection.offsets.empty()) {
            const int extent = rep.selection.offsets.back() + 1;
            spec.per_packet_mask =
                std::min(std::max(spec.per_packet_mask, extent), spec.bytes_per_packet);
        }
        reports.push_back(std::move(rep));
    }
    return reports;
}

nlohmann::json report_to_json(const FrameworkConfig& cfg, const LabeledDataset& ds,
                              const std::vector<IterationReport>& reports) {
    nlohmann::json iterations = nlohmann::json::array();
    for (const IterationReport& r : reports) iterations.push_back(r.to_json());
    return nlohmann::json{{"config", cfg.to_json()},
                          {"class_names", ds.class_names},
                          {"session_count", ds.sessions.size()},
                          {"iterations", std::move(iterations)}};
}

}  // namespace tlm
