#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "json.hpp"
#include "tlm/features.hpp"

namespace tlm {

enum class SplitCriterion { Gini, Entropy };

struct TreeConfig {
    int max_depth = 10;
    int min_samples_split = 2;
    SplitCriterion criterion = SplitCriterion::Gini;
};

// Flat node array; node 0 is the root. Internal nodes carry feature/threshold
// and child ids, every node keeps its training class counts so truncation and
// importance work without the training data.
struct TreeNode {
    int feature = -1;  // -1 for leaves
    std::uint8_t threshold = 0;
    int left = -1, right = -1;
    std::vector<std::uint32_t> class_counts;
    double impurity = 0.0;
    double decrease = 0.0;  // impurity decrease of this split, internal nodes only
};

struct DecisionTree {
    std::vector<TreeNode> nodes;
    int num_features = 0;
    int num_classes = 0;
    TreeConfig config;
    std::uint64_t seed = 0;
    std::size_t total_training_samples = 0;

    // Root-to-leaf descent, split test is feature <= threshold, leaf majority
    // class (ties to the lowest index). Throws DimensionMismatch.
    int predict(std::span<const std::uint8_t> sample) const;

    int depth() const;
    std::size_t internal_node_count() const;

    nlohmann::json to_json() const;
    static DecisionTree from_json(const nlohmann::json& j);
};

// Greedy binary CART. At each node the (feature, threshold) maximizing the
// impurity decrease wins; ties go to the lowest feature index, then the lowest
// threshold. Thresholds sit at midpoints between consecutive distinct feature
// values. Gini comparisons are exact (128-bit rational arithmetic), so tie
// handling is reproducible bit-for-bit. Throws DegenerateData on single-class
// input.
DecisionTree train_tree(const ViewDataset& train, const TreeConfig& config,
                        std::uint64_t seed = 0);

// The tree train_tree would have produced with max_depth = depth: nodes below
// the cut become leaves predicting their stored majority.
DecisionTree truncate_tree(const DecisionTree& t, int depth);

// Mean-decrease-in-impurity importance: importance[f] sums
// (node_samples / total) * decrease over internal nodes splitting on f,
// normalized to sum 1. A single-leaf tree yields the all-zero vector.
std::vector<double> tree_importance(const DecisionTree& t, std::size_t total_train_samples);
std::vector<double> tree_importance(const DecisionTree& t);

double accuracy(const DecisionTree& t, const ViewDataset& view);

// Stratified per-class sample split used for hyperparameter tuning.
std::pair<ViewDataset, ViewDataset> split_view_stratified(const ViewDataset& v, double fraction_b,
                                                          std::uint64_t seed);

// Trains once at max(depths) on a stratified subtrain split, scores each
// truncation depth on the held-out part, returns the best depth (ties to the
// smallest). This is exact because greedy split choices are depth-independent.
int select_tree_depth(const ViewDataset& train, std::span<const int> depths, double val_fraction,
                      const TreeConfig& base, std::uint64_t seed);

}  // namespace tlm
