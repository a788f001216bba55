#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "json.hpp"
#include "tlm/cnn.hpp"

namespace tlm {

// One named search dimension: a finite choice list or a uniform real interval.
struct HyperDimension {
    enum class Kind { Choice, Uniform };
    std::string name;
    Kind kind = Kind::Choice;
    std::vector<nlohmann::json> choices;
    double lo = 0.0, hi = 0.0;

    static HyperDimension choice(std::string name, std::vector<nlohmann::json> values);
    static HyperDimension uniform(std::string name, double lo, double hi);
};

struct HyperparamSpace {
    std::vector<HyperDimension> dims;
    void validate() const;  // throws Error on empty dimensions
};

using Assignment = nlohmann::json;  // object: dimension name -> drawn value

struct SearchTrial {
    Assignment params;
    double score = 0.0;
};

struct SearchResult {
    Assignment best;
    double best_score = 0.0;
    std::vector<SearchTrial> trace;  // length == budget
};

// budget i.i.d. draws (uniform over choices, uniform over intervals),
// deterministic per seed. Draws are generated up front; objectives may be
// evaluated on up to `threads` workers without affecting the result — the
// argmax takes the highest score, ties to the earliest trial.
SearchResult random_search(const HyperparamSpace& space, int budget,
                           const std::function<double(const Assignment&)>& objective,
                           std::uint64_t seed, int threads = 1);

// The convolutional network search space: learning rate, stride, layer counts,
// per-layer filters/kernels, FC widths, activation, dropout.
HyperparamSpace default_cnn_space();

// Interprets a draw from default_cnn_space().
CnnHyperparams cnn_hyperparams_from_assignment(const Assignment& a);

}  // namespace tlm
