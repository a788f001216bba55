#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "json.hpp"
#include "tlm/features.hpp"

namespace tlm {

enum class Activation { Relu, Tanh, Softplus, Identity };

std::string to_string(Activation a);
Activation activation_from_string(const std::string& s);

struct ConvSpec {
    int filters = 8;
    int kernel = 8;
    int stride = 1;
    bool operator==(const ConvSpec&) const = default;
};

struct CnnHyperparams {
    std::vector<ConvSpec> conv;  // may be empty (pure MLP)
    std::vector<int> fc;         // hidden layer widths, may be empty
    Activation activation = Activation::Relu;
    double dropout = 0.0;
    double learning_rate = 1e-3;

    nlohmann::json to_json() const;
    static CnnHyperparams from_json(const nlohmann::json& j);
};

// 1-D convolutional classifier: [conv (valid, strided) -> activation ->
// max-pool width 2]* -> flatten -> [fc -> activation -> dropout]* -> fc ->
// softmax. All math is double precision.
struct CnnModel {
    struct ConvLayer {
        int in_channels = 1, filters = 0, kernel = 0, stride = 1;
        int in_len = 0, out_len = 0, pooled_len = 0;
        std::vector<double> w;  // [filter][in_channel][k]
        std::vector<double> b;  // [filter]
    };
    struct FcLayer {
        int in = 0, out = 0;
        std::vector<double> w;  // [out][in]
        std::vector<double> b;  // [out]
    };

    CnnHyperparams h;
    int input_dim = 0;
    int num_classes = 0;
    std::vector<ConvLayer> conv_layers;
    std::vector<FcLayer> fc_layers;  // hidden layers then the output layer
    std::vector<double> epoch_losses;

    // Inference (no dropout). Softmax output sums to 1 within 1e-6.
    std::vector<double> probabilities(std::span<const std::uint8_t> sample) const;
    int predict(std::span<const std::uint8_t> sample) const;

    std::size_t parameter_count() const;

    nlohmann::json to_json() const;
    static CnnModel from_json(const nlohmann::json& j);
};

// Glorot-uniform init (±sqrt(6/(fan_in+fan_out))), biases zero, deterministic
// in seed. Throws ShapeError if the conv stack reduces the length below 1.
CnnModel init_cnn(const CnnHyperparams& h, int input_dim, int num_classes, std::uint64_t seed);

// Minibatch cross-entropy training with Adam (b1=0.9, b2=0.999, eps=1e-8).
// Bytes are scaled to [0,1] by /255 at the input. Deterministic in seed (init,
// shuffle order, dropout masks). Throws NonFiniteLoss, ShapeError,
// DegenerateData (empty training set).
CnnModel train_cnn(const ViewDataset& train, const CnnHyperparams& h, int epochs, int batch_size,
                   std::uint64_t seed);

double accuracy(const CnnModel& m, const ViewDataset& view);

// Compares analytic gradients of the mean batch loss against central finite
// differences (step 1e-5) on a fresh model, dropout disabled. Returns the max
// relative error over min(max_params, all) deterministically-sampled
// parameters; relative error uses max(|analytic|, |numeric|, 1e-6) as the
// denominator so true-zero gradients do not divide by noise.
double cnn_gradient_check(const CnnHyperparams& h, const ViewDataset& batch, std::uint64_t seed,
                          std::size_t max_params = 128);

}  // namespace tlm
