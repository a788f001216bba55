#include "tlm/search.hpp"

#include <future>

namespace tlm {

HyperDimension HyperDimension::choice(std::string name, std::vector<nlohmann::json> values) {
    HyperDimension d;
    d.name = std::move(name);
    d.kind = Kind::Choice;
    d.choices = std::move(values);
    return d;
}

HyperDimension HyperDimension::uniform(std::string name, double lo, double hi) {
    HyperDimension d;
    d.name = std::move(name);
    d.kind = Kind::Uniform;
    d.lo = lo;
    d.hi = hi;
    return d;
}

void HyperparamSpace::validate() const {
    if (dims.empty()) throw Error("hyperparameter space has no dimensions");
    for (const HyperDimension& d : dims) {
        if (d.kind == HyperDimension::Kind::Choice && d.choices.empty()) {
            throw Error("dimension '" + d.name + "' has an empty choice list");
        }
        if (d.kind == HyperDimension::Kind::Uniform && !(d.lo <= d.hi)) {
            throw Error("dimension '" + d.name + "' has an empty interval");
        }
    }
}

SearchResult random_search(const HyperparamSpace& space, int budget,
                           const std::function<double(const Assignment&)>& objective,
                           std::uint64_t seed, int threads) {
    space.validate();
    if (budget < 1) throw Error("search budget must be >= 1");

    // All draws first, from one sequential stream.
    Rng rng(stream_key(seed, 0x736561726368));
    std::vector<Assignment> draws(static_cast<std::size_t>(budget));
    for (Assignment& a : draws) {
        a = Assignment::object();
        for (const HyperDimension& d : space.dims) {
            if (d.kind == HyperDimension::Kind::Choice) {
                a[d.name] = d.choices[bounded(rng, d.choices.size())];
            } else {
                a[d.name] = d.lo + (d.hi - d.lo) * unit_real(rng);
            }
        }
    }

    std::vector<double> scores(static_cast<std::size_t>(budget));
    if (threads <= 1 || budget == 1) {
        for (int i = 0; i < budget; i++) scores[static_cast<std::size_t>(i)] = objective(draws[static_cast<std::size_t>(i)]);
    } else {
        std::atomic<int> next{0};
        auto worker = [&] {
            for (;;) {
                const int i = next.fetch_add(1);
                if (i >= budget) return;
                scores[static_cast<std::size_t>(i)] = objective(draws[static_cast<std::size_t>(i)]);
            }
        };
        std::vector<std::future<void>> pool;
        const int n_workers = std::min(threads, budget);
        pool.reserve(static_cast<std::size_t>(n_workers));
        for (int t = 0; t < n_workers; t++) pool.push_back(std::async(std::launch::async, worker));
        for (auto& f : pool) f.get();
    }

    SearchResult result;
    result.trace.reserve(static_cast<std::size_t>(budget));
    int best = 0;
    for (int i = 0; i < budget; i++) {
        result.trace.push_back(SearchTrial{draws[static_cast<std::size_t>(i)], scores[static_cast<std::size_t>(i)]});
        if (scores[static_cast<std::size_t>(i)] > scores[static_cast<std::size_t>(best)]) best = i;
    }
    result.best = draws[static_cast<std::size_t>(best)];
    result.best_score = scores[static_cast<std::size_t>(best)];
    return result;
}

HyperparamSpace default_cnn_space() {
    HyperparamSpace s;
    s.dims.push_back(HyperDimension::choice("learning_rate", {0.001, 0.0001}));
    s.dims.push_back(HyperDimension::choice("stride", {1, 4, 8}));
    s.dims.push_back(HyperDimension::choice("conv_layers", {1, 2, 3}));
    for (int i = 0; i < 3; i++) {
        s.dims.push_back(HyperDimension::choice("filters_" + std::to_string(i), {64, 128, 256}));
        s.dims.push_back(HyperDimension::choice("kernel_" + std::to_string(i), {8, 32, 128}));
    }
    s.dims.push_back(HyperDimension::choice("fc_layers", {1, 2, 3}));
    for (int i = 0; i < 3; i++) {
        s.dims.push_back(HyperDimension::choice("fc_neurons_" + std::to_string(i), {128, 256, 512}));
    }
    s.dims.push_back(HyperDimension::choice("activation", {"relu", "tanh", "softplus"}));
    s.dims.push_back(HyperDimension::uniform("dropout", 0.0, 0.5));
    return s;
}

CnnHyperparams cnn_hyperparams_from_assignment(const Assignment& a) {
    CnnHyperparams h;
    h.learning_rate = a.at("learning_rate").get<double>();
    const int stride = a.at("stride").get<int>();
    const int n_conv = a.at("conv_layers").get<int>();
    for (int i = 0; i < n_conv; i++) {
        h.conv.push_back(ConvSpec{a.at("filters_" + std::to_string(i)).get<int>(),
                                  a.at("kernel_" + std::to_string(i)).get<int>(), stride});
    }
    const int n_fc = a.at("fc_layers").get<int>();
    for (int i = 0; i < n_fc; i++) {
        h.fc.push_back(a.at("fc_neurons_" + std::to_string(i)).get<int>());
    }
    h.activation = activation_from_string(a.at("activation").get<std::string>());
    h.dropout = a.at("dropout").get<double>();
    return h;
}

}  // namespace tlm
