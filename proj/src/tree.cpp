#include "tlm/tree.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <functional>
#include <numeric>

namespace tlm {

namespace {

using u128 = unsigned __int128;

// Sum of squared class counts; Gini(node) = 1 - sq_sum / n^2.
std::uint64_t sq_sum(std::span<const std::uint32_t> counts) {
    std::uint64_t s = 0;
    for (std::uint32_t c : counts) s += static_cast<std::uint64_t>(c) * c;
    return s;
}

double gini_of(std::span<const std::uint32_t> counts, std::uint64_t n) {
    if (n == 0) return 0.0;
    return 1.0 - static_cast<double>(sq_sum(counts)) / (static_cast<double>(n) * static_cast<double>(n));
}

double entropy_of(std::span<const std::uint32_t> counts, std::uint64_t n) {
    if (n == 0) return 0.0;
    double h = 0.0;
    for (std::uint32_t c : counts) {
        if (c == 0) continue;
        const double p = static_cast<double>(c) / static_cast<double>(n);
        h -= p * std::log2(p);
    }
    return h;
}

// Split quality. For Gini the score is the exact rational
//   sq_l/n_l + sq_r/n_r  ==  (sq_l*n_r + sq_r*n_l) / (n_l*n_r)
// (maximizing it minimizes the weighted child Gini); comparisons cross-multiply
// in 128 bits so equal-gain splits tie exactly and the feature/threshold
// tie-break decides. Entropy falls back to doubles.
struct SplitScore {
    std::uint64_t num = 0, den = 0;  // Gini rational
    double neg_entropy = 0.0;        // Entropy: higher is better
    SplitCriterion criterion = SplitCriterion::Gini;

    bool better_than(const SplitScore& o) const {
        if (criterion == SplitCriterion::Gini) {
            return static_cast<u128>(num) * o.den > static_cast<u128>(o.num) * den;
        }
        return neg_entropy > o.neg_entropy;
    }
    bool equal_to(const SplitScore& o) const {
        if (criterion == SplitCriterion::Gini) {
            return static_cast<u128>(num) * o.den == static_cast<u128>(o.num) * den;
        }
        return neg_entropy == o.neg_entropy;
    }
};

// True iff the split strictly improves on the unsplit parent.
bool improves_parent(const SplitScore& s, std::uint64_t parent_sq, std::uint64_t parent_n,
                     double parent_entropy) {
    if (s.criterion == SplitCriterion::Gini) {
        // sq_l/n_l + sq_r/n_r > sq_p/n_p
        return static_cast<u128>(s.num) * parent_n > static_cast<u128>(parent_sq) * s.den;
    }
    const double child = -s.neg_entropy / static_cast<double>(parent_n);
    return child < parent_entropy - 1e-15;
}

struct BestSplit {
    bool found = false;
    int feature = -1;
    std::uint8_t threshold = 0;
    SplitScore score;
    std::uint64_t n_left = 0;
};

class TreeBuilder {
public:
    TreeBuilder(const ViewDataset& view, const TreeConfig& config)
        : view_(view), config_(config), d_(view.dims()), c_(view.num_classes()),
          n_(view.samples.size()) {
        // Column-major copy: columns_[f * n_ + i] is feature f of sample i.
        columns_.resize(static_cast<std::size_t>(d_) * n_);
        for (std::size_t i = 0; i < n_; i++) {
            const Bytes& row = view_.samples[i].features;
            for (int f = 0; f < d_; f++) {
                columns_[static_cast<std::size_t>(f) * n_ + i] = row[static_cast<std::size_t>(f)];
            }
        }
        order_.resize(n_);
        std::iota(order_.begin(), order_.end(), 0u);
        labels_.resize(n_);
        for (std::size_t i = 0; i < n_; i++) {
            labels_[i] = static_cast<std::uint32_t>(view_.samples[i].class_index);
        }
        hist_.resize(256 * static_cast<std::size_t>(c_));
    }

    DecisionTree build(std::uint64_t seed) {
        DecisionTree t;
        t.num_features = d_;
        t.num_classes = c_;
        t.config = config_;
        t.seed = seed;
        t.total_training_samples = n_;
        tree_ = &t;
        grow(0, n_, 0);
        tree_ = nullptr;
        return t;
    }

private:
    std::uint8_t value(int f, std::uint32_t sample) const {
        return columns_[static_cast<std::size_t>(f) * n_ + sample];
    }

    std::vector<std::uint32_t> node_counts(std::size_t lo, std::size_t hi) const {
        std::vector<std::uint32_t> counts(static_cast<std::size_t>(c_), 0);
        for (std::size_t i = lo; i < hi; i++) counts[labels_[order_[i]]]++;
        return counts;
    }

    // Scans thresholds of one feature given per-value class histograms laid out
    // in hist_[value * c_ + class].
    void scan_feature(int f, std::span<const std::uint32_t> parent_counts, std::uint64_t n,
                      BestSplit& best) {
        std::vector<std::uint32_t> left(static_cast<std::size_t>(c_), 0);
        std::uint64_t n_left = 0;

        int prev_value = -1;
        for (int v = 0; v < 256; v++) {
            const std::uint32_t* bucket = hist_.data() + static_cast<std::size_t>(v) * c_;
            std::uint64_t bucket_n = 0;
            for (int k = 0; k < c_; k++) bucket_n += bucket[k];
            if (bucket_n == 0) continue;

            if (prev_value >= 0) {
                // Candidate split between prev_value and v.
                const std::uint64_t n_right = n - n_left;
                SplitScore score;
                score.criterion = config_.criterion;
                if (config_.criterion == SplitCriterion::Gini) {
                    std::uint64_t sq_left = 0, sq_right = 0;
                    for (int k = 0; k < c_; k++) {
                        const std::uint64_t l = left[static_cast<std::size_t>(k)];
                        const std::uint64_t r = parent_counts[static_cast<std::size_t>(k)] - l;
                        sq_left += l * l;
                        sq_right += r * r;
                    }
                    score.num = sq_left * n_right + sq_right * n_left;
                    score.den = n_left * n_right;
                } else {
                    std::vector<std::uint32_t> right(static_cast<std::size_t>(c_));
                    for (int k = 0; k < c_; k++) {
                        right[static_cast<std::size_t>(k)] =
                            parent_counts[static_cast<std::size_t>(k)] - left[static_cast<std::size_t>(k)];
                    }
                    const double weighted = static_cast<double>(n_left) * entropy_of(left, n_left) +
                                            static_cast<double>(n_right) * entropy_of(right, n_right);
                    score.neg_entropy = -weighted;
                }
                const std::uint8_t threshold = static_cast<std::uint8_t>((prev_value + v) / 2);
                if (!best.found || score.better_than(best.score) ||
                    (score.equal_to(best.score) &&
                     (f < best.feature || (f == best.feature && threshold < best.threshold)))) {
                    best.found = true;
                    best.feature = f;
                    best.threshold = threshold;
                    best.score = score;
                    best.n_left = n_left;
                }
            }

            for (int k = 0; k < c_; k++) left[static_cast<std::size_t>(k)] += bucket[k];
            n_left += bucket_n;
            prev_value = v;
        }
    }

    BestSplit find_best_split(std::size_t lo, std::size_t hi,
                              std::span<const std::uint32_t> parent_counts) {
        BestSplit best;
        const std::uint64_t n = hi - lo;
        for (int f = 0; f < d_; f++) {
            const std::uint8_t* col = columns_.data() + static_cast<std::size_t>(f) * n_;
            bool varied = false;
            const std::uint8_t first = col[order_[lo]];
            for (std::size_t i = lo; i < hi; i++) {
                const std::uint32_t s = order_[i];
                hist_[static_cast<std::size_t>(col[s]) * c_ + labels_[s]]++;
                varied |= col[s] != first;
            }
            if (varied) scan_feature(f, parent_counts, n, best);
            // Walk-clear instead of a full memset: O(node size) per feature.
            for (std::size_t i = lo; i < hi; i++) {
                const std::uint32_t s = order_[i];
                hist_[static_cast<std::size_t>(col[s]) * c_ + labels_[s]] = 0;
            }
        }
        return best;
    }

    int grow(std::size_t lo, std::size_t hi, int depth) {
        const int node_id = static_cast<int>(tree_->nodes.size());
        tree_->nodes.emplace_back();
        auto counts = node_counts(lo, hi);
        const std::uint64_t n = hi - lo;
        const double impurity = config_.criterion == SplitCriterion::Gini
                                    ? gini_of(counts, n)
                                    : entropy_of(counts, n);
        tree_->nodes[static_cast<std::size_t>(node_id)].class_counts = counts;
        tree_->nodes[static_cast<std::size_t>(node_id)].impurity = impurity;

        const bool pure = std::count_if(counts.begin(), counts.end(),
                                        [](std::uint32_t c) { return c > 0; }) <= 1;
        if (depth >= config_.max_depth || pure ||
            n < static_cast<std::uint64_t>(config_.min_samples_split)) {
            return node_id;
        }

        BestSplit best = find_best_split(lo, hi, counts);
        if (!best.found || !improves_parent(best.score, sq_sum(counts), n, impurity)) {
            return node_id;
        }

        // Partition order_[lo, hi) around the split, preserving determinism
        // (stable partition keeps relative order).
        std::stable_partition(order_.begin() + static_cast<std::ptrdiff_t>(lo),
                              order_.begin() + static_cast<std::ptrdiff_t>(hi),
                              [&](std::uint32_t s) { return value(best.feature, s) <= best.threshold; });
        const std::size_t mid = lo + static_cast<std::size_t>(best.n_left);

        const int left_id = grow(lo, mid, depth + 1);
        const int right_id = grow(mid, hi, depth + 1);

        TreeNode& node = tree_->nodes[static_cast<std::size_t>(node_id)];
        node.feature = best.feature;
        node.threshold = best.threshold;
        node.left = left_id;
        node.right = right_id;
        const TreeNode& l = tree_->nodes[static_cast<std::size_t>(left_id)];
        const TreeNode& r = tree_->nodes[static_cast<std::size_t>(right_id)];
        const double n_l = static_cast<double>(best.n_left);
        const double n_r = static_cast<double>(n - best.n_left);
        node.decrease =
            node.impurity - (n_l * l.impurity + n_r * r.impurity) / static_cast<double>(n);
        return node_id;
    }

    const ViewDataset& view_;
    TreeConfig config_;
    int d_, c_;
    std::size_t n_;
    std::vector<std::uint8_t> columns_;
    std::vector<std::uint32_t> order_;
    std::vector<std::uint32_t> labels_;
    std::vector<std::uint32_t> hist_;
    DecisionTree* tree_ = nullptr;
};

int leaf_majority(const TreeNode& node) {
    int best = 0;
    for (std::size_t k = 1; k < node.class_counts.size(); k++) {
        if (node.class_counts[k] > node.class_counts[static_cast<std::size_t>(best)]) {
            best = static_cast<int>(k);
        }
    }
    return best;
}

}  // namespace

int DecisionTree::predict(std::span<const std::uint8_t> sample) const {
    if (sample.size() != static_cast<std::size_t>(num_features)) {
        throw DimensionMismatch("sample has " + std::to_string(sample.size()) +
                                " features, tree expects " + std::to_string(num_features));
    }
    const TreeNode* node = &nodes[0];
    while (node->feature >= 0) {
        node = sample[static_cast<std::size_t>(node->feature)] <= node->threshold
                   ? &nodes[static_cast<std::size_t>(node->left)]
                   : &nodes[static_cast<std::size_t>(node->right)];
    }
    return leaf_majority(*node);
}

int DecisionTree::depth() const {
    // Node depths via one pass; children always appear after their parent.
    std::vector<int> depth_of(nodes.size(), 0);
    int max_d = 0;
    for (std::size_t i = 0; i < nodes.size(); i++) {
        if (nodes[i].feature < 0) continue;
        depth_of[static_cast<std::size_t>(nodes[i].left)] = depth_of[i] + 1;
        depth_of[static_cast<std::size_t>(nodes[i].right)] = depth_of[i] + 1;
        max_d = std::max(max_d, depth_of[i] + 1);
    }
    return max_d;
}

std::size_t DecisionTree::internal_node_count() const {
    return static_cast<std::size_t>(
        std::count_if(nodes.begin(), nodes.end(), [](const TreeNode& n) { return n.feature >= 0; }));
}

DecisionTree train_tree(const ViewDataset& train, const TreeConfig& config, std::uint64_t seed) {
    if (train.samples.empty()) throw DegenerateData("empty training set");
    std::vector<bool> seen(static_cast<std::size_t>(train.num_classes()), false);
    for (const SampleMatrix& s : train.samples) seen[static_cast<std::size_t>(s.class_index)] = true;
    if (std::count(seen.begin(), seen.end(), true) < 2) {
        throw DegenerateData("training set contains a single class");
    }
    TreeBuilder builder(train, config);
    return builder.build(seed);
}

DecisionTree truncate_tree(const DecisionTree& t, int depth) {
    DecisionTree out;
    out.num_features = t.num_features;
    out.num_classes = t.num_classes;
    out.config = t.config;
    out.config.max_depth = depth;
    out.seed = t.seed;
    out.total_training_samples = t.total_training_samples;

    // Recursive copy, cutting at the requested depth.
    std::function<int(int, int)> copy = [&](int src, int d) -> int {
        const TreeNode& s = t.nodes[static_cast<std::size_t>(src)];
        const int id = static_cast<int>(out.nodes.size());
        out.nodes.emplace_back();
        out.nodes[static_cast<std::size_t>(id)].class_counts = s.class_counts;
        out.nodes[static_cast<std::size_t>(id)].impurity = s.impurity;
        if (s.feature >= 0 && d < depth) {
            const int l = copy(s.left, d + 1);
            const int r = copy(s.right, d + 1);
            TreeNode& n = out.nodes[static_cast<std::size_t>(id)];
            n.feature = s.feature;
            n.threshold = s.threshold;
            n.left = l;
            n.right = r;
            n.decrease = s.decrease;
        }
        return id;
    };
    copy(0, 0);
    return out;
}

std::vector<double> tree_importance(const DecisionTree& t, std::size_t total_train_samples) {
    std::vector<double> imp(static_cast<std::size_t>(t.num_features), 0.0);
    const double total = static_cast<double>(total_train_samples);
    for (const TreeNode& node : t.nodes) {
        if (node.feature < 0) continue;
        std::uint64_t n = 0;
        for (std::uint32_t c : node.class_counts) n += c;
        imp[static_cast<std::size_t>(node.feature)] += (static_cast<double>(n) / total) * node.decrease;
    }
    const double sum = std::accumulate(imp.begin(), imp.end(), 0.0);
    if (sum > 0.0) {
        for (double& v : imp) v /= sum;
    }
    return imp;
}

std::vector<double> tree_importance(const DecisionTree& t) {
    return tree_importance(t, t.total_training_samples);
}

double accuracy(const DecisionTree& t, const ViewDataset& view) {
    if (view.samples.empty()) return 0.0;
    std::size_t correct = 0;
    for (const SampleMatrix& s : view.samples) {
        if (t.predict(s.features) == s.class_index) correct++;
    }
    return static_cast<double>(correct) / static_cast<double>(view.samples.size());
}

std::pair<ViewDataset, ViewDataset> split_view_stratified(const ViewDataset& v, double fraction_b,
                                                          std::uint64_t seed) {
    std::vector<std::vector<std::size_t>> per_class(static_cast<std::size_t>(v.num_classes()));
    for (std::size_t i = 0; i < v.samples.size(); i++) {
        per_class[static_cast<std::size_t>(v.samples[i].class_index)].push_back(i);
    }
    std::vector<bool> in_b(v.samples.size(), false);
    for (std::size_t c = 0; c < per_class.size(); c++) {
        auto& idx = per_class[c];
        if (idx.empty()) continue;
        Rng rng(stream_key(seed, c, 0x76696577));
        for (std::size_t i = idx.size() - 1; i > 0; i--) std::swap(idx[i], idx[bounded(rng, i + 1)]);
        std::size_t n_b = static_cast<std::size_t>(
            std::lround(fraction_b * static_cast<double>(idx.size())));
        if (idx.size() >= 2) n_b = std::clamp<std::size_t>(n_b, 1, idx.size() - 1);
        for (std::size_t i = 0; i < n_b; i++) in_b[idx[i]] = true;
    }
    ViewDataset a, b;
    a.spec = b.spec = v.spec;
    a.class_names = b.class_names = v.class_names;
    for (std::size_t i = 0; i < v.samples.size(); i++) {
        (in_b[i] ? b : a).samples.push_back(v.samples[i]);
    }
    return {std::move(a), std::move(b)};
}

int select_tree_depth(const ViewDataset& train, std::span<const int> depths, double val_fraction,
                      const TreeConfig& base, std::uint64_t seed) {
    if (depths.empty()) throw Error("no candidate depths");
    auto [subtrain, val] = split_view_stratified(train, val_fraction, seed);
    TreeConfig config = base;
    config.max_depth = *std::max_element(depths.begin(), depths.end());
    const DecisionTree full = train_tree(subtrain, config, seed);

    int best_depth = depths[0];
    double best_acc = -1.0;
    for (int d : depths) {
        const double acc = accuracy(truncate_tree(full, d), val);
        if (acc > best_acc || (acc == best_acc && d < best_depth)) {
            best_acc = acc;
            best_depth = d;
        }
    }
    return best_depth;
}

// --------------------------------------------------------------------------
// JSON serialization
// --------------------------------------------------------------------------

nlohmann::json DecisionTree::to_json() const {
    nlohmann::json jn = nlohmann::json::array();
    for (const TreeNode& n : nodes) {
        nlohmann::json e{{"counts", n.class_counts}, {"impurity", n.impurity}};
        if (n.feature >= 0) {
            e["feature"] = n.feature;
            e["threshold"] = n.threshold;
            e["left"] = n.left;
            e["right"] = n.right;
            e["decrease"] = n.decrease;
        }
        jn.push_back(std::move(e));
    }
    return nlohmann::json{{"kind", "decision_tree"},
                          {"num_features", num_features},
                          {"num_classes", num_classes},
                          {"max_depth", config.max_depth},
                          {"min_samples_split", config.min_samples_split},
                          {"criterion", config.criterion == SplitCriterion::Gini ? "gini" : "entropy"},
                          {"seed", seed},
                          {"total_training_samples", total_training_samples},
                          {"nodes", std::move(jn)}};
}

DecisionTree DecisionTree::from_json(const nlohmann::json& j) {
    DecisionTree t;
    t.num_features = j.at("num_features").get<int>();
    t.num_classes = j.at("num_classes").get<int>();
    t.config.max_depth = j.at("max_depth").get<int>();
    t.config.min_samples_split = j.at("min_samples_split").get<int>();
    t.config.criterion = j.at("criterion").get<std::string>() == "entropy" ? SplitCriterion::Entropy
                                                                           : SplitCriterion::Gini;
    t.seed = j.at("seed").get<std::uint64_t>();
    t.total_training_samples = j.at("total_training_samples").get<std::size_t>();
    for (const auto& e : j.at("nodes")) {
        TreeNode n;
        n.class_counts = e.at("counts").get<std::vector<std::uint32_t>>();
        n.impurity = e.at("impurity").get<double>();
        if (e.contains("feature")) {
            n.feature = e.at("feature").get<int>();
            n.threshold = e.at("threshold").get<std::uint8_t>();
            n.left = e.at("left").get<int>();
            n.right = e.at("right").get<int>();
            n.decrease = e.at("decrease").get<double>();
        }
        t.nodes.push_back(std::move(n));
    }
    if (t.nodes.empty()) throw Error("tree JSON has no nodes");
    return t;
}

}  // namespace tlm
