#include "tlm/cnn.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <numeric>

namespace tlm {

namespace {

constexpr double kAdamBeta1 = 0.9;
constexpr double kAdamBeta2 = 0.999;
constexpr double kAdamEps = 1e-8;

double activate(Activation a, double z) {
    switch (a) {
        case Activation::Relu: return z > 0.0 ? z : 0.0;
        case Activation::Tanh: return std::tanh(z);
        case Activation::Softplus: return z > 30.0 ? z : std::log1p(std::exp(z));
        case Activation::Identity: return z;
    }
    return z;
}

double activate_grad(Activation a, double z) {
    switch (a) {
        case Activation::Relu: return z > 0.0 ? 1.0 : 0.0;
        case Activation::Tanh: {
            const double t = std::tanh(z);
            return 1.0 - t * t;
        }
        case Activation::Softplus: return 1.0 / (1.0 + std::exp(-z));
        case Activation::Identity: return 1.0;
    }
    return 1.0;
}

void softmax_inplace(std::vector<double>& v) {
    const double mx = *std::max_element(v.begin(), v.end());
    double sum = 0.0;
    for (double& x : v) {
        x = std::exp(x - mx);
        sum += x;
    }
    for (double& x : v) x /= sum;
}

// Per-sample forward caches; reused across samples.
struct Workspace {
    std::vector<std::vector<double>> conv_in;   // input of conv layer l
    std::vector<std::vector<double>> conv_z;    // pre-activation
    std::vector<std::vector<double>> pool_out;  // pooled activations
    std::vector<std::vector<int>> pool_idx;     // argmax within each window
    std::vector<std::vector<double>> fc_in;     // input of fc layer i
    std::vector<std::vector<double>> fc_z;
    std::vector<std::vector<double>> fc_mask;   // dropout masks (train only)
    std::vector<double> probs;

    explicit Workspace(const CnnModel& m) {
        for (const auto& c : m.conv_layers) {
            conv_in.emplace_back(static_cast<std::size_t>(c.in_channels) * c.in_len);
            conv_z.emplace_back(static_cast<std::size_t>(c.filters) * c.out_len);
            pool_out.emplace_back(static_cast<std::size_t>(c.filters) * c.pooled_len);
            pool_idx.emplace_back(static_cast<std::size_t>(c.filters) * c.pooled_len);
        }
        for (const auto& f : m.fc_layers) {
            fc_in.emplace_back(static_cast<std::size_t>(f.in));
            fc_z.emplace_back(static_cast<std::size_t>(f.out));
            fc_mask.emplace_back(static_cast<std::size_t>(f.out), 1.0);
        }
        probs.resize(static_cast<std::size_t>(m.num_classes));
    }
};

// Gradient buffers mirroring the weight tensors.
struct Gradients {
    std::vector<std::vector<double>> conv_w, conv_b, fc_w, fc_b;

    explicit Gradients(const CnnModel& m) {
        for (const auto& c : m.conv_layers) {
            conv_w.emplace_back(c.w.size(), 0.0);
            conv_b.emplace_back(c.b.size(), 0.0);
        }
        for (const auto& f : m.fc_layers) {
            fc_w.emplace_back(f.w.size(), 0.0);
            fc_b.emplace_back(f.b.size(), 0.0);
        }
    }
    void zero() {
        for (auto& v : conv_w) std::fill(v.begin(), v.end(), 0.0);
        for (auto& v : conv_b) std::fill(v.begin(), v.end(), 0.0);
        for (auto& v : fc_w) std::fill(v.begin(), v.end(), 0.0);
        for (auto& v : fc_b) std::fill(v.begin(), v.end(), 0.0);
    }
};

void scale_input(std::span<const std::uint8_t> sample, std::vector<double>& out) {
    for (std::size_t i = 0; i < sample.size(); i++) out[i] = sample[i] / 255.0;
}

// Forward pass through one sample. When rng is non-null, dropout masks are
// drawn (training mode); otherwise masks stay at 1.
void forward(const CnnModel& m, std::span<const std::uint8_t> sample, Workspace& ws, Rng* rng) {
    const Activation act = m.h.activation;

    const std::vector<double>* cur = nullptr;
    std::vector<double> input_buf;
    if (m.conv_layers.empty()) {
        input_buf.resize(sample.size());
        scale_input(sample, input_buf);
        cur = &input_buf;
    } else {
        scale_input(sample, ws.conv_in[0]);
        for (std::size_t l = 0; l < m.conv_layers.size(); l++) {
            const auto& c = m.conv_layers[l];
            const std::vector<double>& in = ws.conv_in[l];
            std::vector<double>& z = ws.conv_z[l];
            for (int f = 0; f < c.filters; f++) {
                const double* wf = c.w.data() + static_cast<std::size_t>(f) * c.in_channels * c.kernel;
                for (int i = 0; i < c.out_len; i++) {
                    double sum = c.b[static_cast<std::size_t>(f)];
                    for (int ch = 0; ch < c.in_channels; ch++) {
                        const double* row = in.data() + static_cast<std::size_t>(ch) * c.in_len +
                                            static_cast<std::size_t>(i) * c.stride;
                        const double* wk = wf + static_cast<std::size_t>(ch) * c.kernel;
                        for (int k = 0; k < c.kernel; k++) sum += wk[k] * row[k];
                    }
                    z[static_cast<std::size_t>(f) * c.out_len + i] = sum;
                }
            }
            // Activation + max-pool (width 2, stride 2); ties keep the earlier
            // position.
            std::vector<double>& pooled = ws.pool_out[l];
            std::vector<int>& idx = ws.pool_idx[l];
            for (int f = 0; f < c.filters; f++) {
                for (int j = 0; j < c.pooled_len; j++) {
                    const int i0 = 2 * j, i1 = 2 * j + 1;
                    const double a0 = activate(act, z[static_cast<std::size_t>(f) * c.out_len + i0]);
                    const double a1 = activate(act, z[static_cast<std::size_t>(f) * c.out_len + i1]);
                    const bool second = a1 > a0;
                    pooled[static_cast<std::size_t>(f) * c.pooled_len + j] = second ? a1 : a0;
                    idx[static_cast<std::size_t>(f) * c.pooled_len + j] = second ? i1 : i0;
                }
            }
            if (l + 1 < m.conv_layers.size()) ws.conv_in[l + 1] = pooled;
            cur = &pooled;
        }
    }

    for (std::size_t i = 0; i < m.fc_layers.size(); i++) {
        const auto& f = m.fc_layers[i];
        ws.fc_in[i] = *cur;
        std::vector<double>& z = ws.fc_z[i];
        const std::vector<double>& in = ws.fc_in[i];
        for (int o = 0; o < f.out; o++) {
            const double* row = f.w.data() + static_cast<std::size_t>(o) * f.in;
            double sum = f.b[static_cast<std::size_t>(o)];
            for (int k = 0; k < f.in; k++) sum += row[k] * in[static_cast<std::size_t>(k)];
            z[static_cast<std::size_t>(o)] = sum;
        }
        const bool output_layer = (i + 1 == m.fc_layers.size());
        if (output_layer) {
            ws.probs.assign(z.begin(), z.end());
            softmax_inplace(ws.probs);
        } else {
            std::vector<double>& mask = ws.fc_mask[i];
            std::vector<double> a(z.size());
            for (std::size_t o = 0; o < z.size(); o++) a[o] = activate(act, z[o]);
            if (rng && m.h.dropout > 0.0) {
                const double keep = 1.0 - m.h.dropout;
                for (std::size_t o = 0; o < a.size(); o++) {
                    mask[o] = unit_real(*rng) < keep ? 1.0 / keep : 0.0;
                    a[o] *= mask[o];
                }
            } else {
                std::fill(mask.begin(), mask.end(), 1.0);
            }
            // The activated (and masked) output becomes the next layer's input.
            ws.fc_in[i + 1] = a;
            cur = &ws.fc_in[i + 1];
        }
    }
}

// Backward pass for one sample; gradients of loss/batch_size accumulate into g.
void backward(const CnnModel& m, Workspace& ws, int label, double inv_batch, Gradients& g) {
    const Activation act = m.h.activation;

    // d(logits): softmax cross-entropy.
    std::vector<double> delta(ws.probs);
    delta[static_cast<std::size_t>(label)] -= 1.0;
    for (double& d : delta) d *= inv_batch;

    for (std::size_t ii = m.fc_layers.size(); ii-- > 0;) {
        const auto& f = m.fc_layers[ii];
        const bool output_layer = (ii + 1 == m.fc_layers.size());
        std::vector<double> dz;
        if (output_layer) {
            dz = std::move(delta);
        } else {
            // delta is d(output of this hidden layer after mask).
            dz.resize(static_cast<std::size_t>(f.out));
            for (int o = 0; o < f.out; o++) {
                const double da = delta[static_cast<std::size_t>(o)] * ws.fc_mask[ii][static_cast<std::size_t>(o)];
                dz[static_cast<std::size_t>(o)] = da * activate_grad(act, ws.fc_z[ii][static_cast<std::size_t>(o)]);
            }
        }
        const std::vector<double>& in = ws.fc_in[ii];
        for (int o = 0; o < f.out; o++) {
            const double d = dz[static_cast<std::size_t>(o)];
            if (d == 0.0) continue;
            double* gw = g.fc_w[ii].data() + static_cast<std::size_t>(o) * f.in;
            for (int k = 0; k < f.in; k++) gw[k] += d * in[static_cast<std::size_t>(k)];
            g.fc_b[ii][static_cast<std::size_t>(o)] += d;
        }
        // Propagate to the layer input.
        std::vector<double> din(static_cast<std::size_t>(f.in), 0.0);
        for (int o = 0; o < f.out; o++) {
            const double d = dz[static_cast<std::size_t>(o)];
            if (d == 0.0) continue;
            const double* row = f.w.data() + static_cast<std::size_t>(o) * f.in;
            for (int k = 0; k < f.in; k++) din[static_cast<std::size_t>(k)] += d * row[k];
        }
        delta = std::move(din);
    }

    // delta now matches the flattened pooled output of the last conv layer
    // (or the scaled input when there are no conv layers — nothing to do).
    for (std::size_t ll = m.conv_layers.size(); ll-- > 0;) {
        const auto& c = m.conv_layers[ll];
        // Through the pool: route into pre-activation gradient.
        std::vector<double> dz(static_cast<std::size_t>(c.filters) * c.out_len, 0.0);
        for (int f = 0; f < c.filters; f++) {
            for (int j = 0; j < c.pooled_len; j++) {
                const std::size_t pj = static_cast<std::size_t>(f) * c.pooled_len + j;
                const int zi = ws.pool_idx[ll][pj];
                const double z = ws.conv_z[ll][static_cast<std::size_t>(f) * c.out_len + zi];
                dz[static_cast<std::size_t>(f) * c.out_len + zi] +=
                    delta[pj] * activate_grad(act, z);
            }
        }
        const std::vector<double>& in = ws.conv_in[ll];
        const bool need_din = ll > 0;
        std::vector<double> din;
        if (need_din) din.assign(in.size(), 0.0);
        for (int f = 0; f < c.filters; f++) {
            double* gw = g.conv_w[ll].data() + static_cast<std::size_t>(f) * c.in_channels * c.kernel;
            for (int i = 0; i < c.out_len; i++) {
                const double d = dz[static_cast<std::size_t>(f) * c.out_len + i];
                if (d == 0.0) continue;
                g.conv_b[ll][static_cast<std::size_t>(f)] += d;
                for (int ch = 0; ch < c.in_channels; ch++) {
                    const std::size_t base = static_cast<std::size_t>(ch) * c.in_len +
                                             static_cast<std::size_t>(i) * c.stride;
                    double* wk = gw + static_cast<std::size_t>(ch) * c.kernel;
                    const double* w = c.w.data() +
                                      (static_cast<std::size_t>(f) * c.in_channels + ch) * c.kernel;
                    for (int k = 0; k < c.kernel; k++) {
                        wk[k] += d * in[base + k];
                        if (need_din) din[base + k] += d * w[k];
                    }
                }
            }
        }
        if (need_din) delta = std::move(din);
    }
}

struct AdamState {
    Gradients m, v;
    long t = 0;
    explicit AdamState(const CnnModel& model) : m(model), v(model) {}
};

void adam_update(std::vector<double>& w, const std::vector<double>& g, std::vector<double>& m,
                 std::vector<double>& v, double lr, double bc1, double bc2) {
    for (std::size_t i = 0; i < w.size(); i++) {
        m[i] = kAdamBeta1 * m[i] + (1.0 - kAdamBeta1) * g[i];
        v[i] = kAdamBeta2 * v[i] + (1.0 - kAdamBeta2) * g[i] * g[i];
        w[i] -= lr * (m[i] / bc1) / (std::sqrt(v[i] / bc2) + kAdamEps);
    }
}

void adam_step(CnnModel& model, const Gradients& g, AdamState& st, double lr) {
    st.t++;
    const double bc1 = 1.0 - std::pow(kAdamBeta1, static_cast<double>(st.t));
    const double bc2 = 1.0 - std::pow(kAdamBeta2, static_cast<double>(st.t));
    for (std::size_t l = 0; l < model.conv_layers.size(); l++) {
        adam_update(model.conv_layers[l].w, g.conv_w[l], st.m.conv_w[l], st.v.conv_w[l], lr, bc1, bc2);
        adam_update(model.conv_layers[l].b, g.conv_b[l], st.m.conv_b[l], st.v.conv_b[l], lr, bc1, bc2);
    }
    for (std::size_t l = 0; l < model.fc_layers.size(); l++) {
        adam_update(model.fc_layers[l].w, g.fc_w[l], st.m.fc_w[l], st.v.fc_w[l], lr, bc1, bc2);
        adam_update(model.fc_layers[l].b, g.fc_b[l], st.m.fc_b[l], st.v.fc_b[l], lr, bc1, bc2);
    }
}

double sample_loss(const Workspace& ws, int label) {
    return -std::log(std::max(ws.probs[static_cast<std::size_t>(label)], 1e-300));
}

}  // namespace

std::string to_string(Activation a) {
    switch (a) {
        case Activation::Relu: return "relu";
        case Activation::Tanh: return "tanh";
        case Activation::Softplus: return "softplus";
        case Activation::Identity: return "identity";
    }
    return "?";
}

Activation activation_from_string(const std::string& s) {
    if (s == "relu") return Activation::Relu;
    if (s == "tanh") return Activation::Tanh;
    if (s == "softplus") return Activation::Softplus;
    if (s == "identity") return Activation::Identity;
    throw Error("unknown activation '" + s + "'");
}

nlohmann::json CnnHyperparams::to_json() const {
    nlohmann::json convs = nlohmann::json::array();
    for (const ConvSpec& c : conv) {
        convs.push_back({{"filters", c.filters}, {"kernel", c.kernel}, {"stride", c.stride}});
    }
    return nlohmann::json{{"conv", std::move(convs)}, {"fc", fc},
                          {"activation", to_string(activation)}, {"dropout", dropout},
                          {"learning_rate", learning_rate}};
}

CnnHyperparams CnnHyperparams::from_json(const nlohmann::json& j) {
    CnnHyperparams h;
    for (const auto& c : j.value("conv", nlohmann::json::array())) {
        h.conv.push_back(ConvSpec{c.at("filters").get<int>(), c.at("kernel").get<int>(),
                                  c.at("stride").get<int>()});
    }
    h.fc = j.value("fc", std::vector<int>{});
    h.activation = activation_from_string(j.value("activation", std::string("relu")));
    h.dropout = j.value("dropout", 0.0);
    h.learning_rate = j.value("learning_rate", 1e-3);
    return h;
}

CnnModel init_cnn(const CnnHyperparams& h, int input_dim, int num_classes, std::uint64_t seed) {
    if (input_dim < 1 || num_classes < 2) throw ShapeError("need input_dim >= 1 and >= 2 classes");
    CnnModel m;
    m.h = h;
    m.input_dim = input_dim;
    m.num_classes = num_classes;

    Rng rng(stream_key(seed, 0x636e6e69));

    auto glorot = [&](std::vector<double>& w, int fan_in, int fan_out) {
        const double limit = std::sqrt(6.0 / (fan_in + fan_out));
        for (double& x : w) x = (2.0 * unit_real(rng) - 1.0) * limit;
    };

    int channels = 1;
    int length = input_dim;
    for (const ConvSpec& spec : h.conv) {
        if (spec.filters < 1 || spec.kernel < 1 || spec.stride < 1) {
            throw ShapeError("conv layer parameters must be positive");
        }
        if (length < spec.kernel) {
            throw ShapeError("conv kernel " + std::to_string(spec.kernel) +
                             " exceeds input length " + std::to_string(length));
        }
        CnnModel::ConvLayer layer;
        layer.in_channels = channels;
        layer.filters = spec.filters;
        layer.kernel = spec.kernel;
        layer.stride = spec.stride;
        layer.in_len = length;
        layer.out_len = (length - spec.kernel) / spec.stride + 1;
        layer.pooled_len = layer.out_len / 2;
        if (layer.pooled_len < 1) throw ShapeError("conv stack reduces length below 1");
        layer.w.resize(static_cast<std::size_t>(spec.filters) * channels * spec.kernel);
        layer.b.assign(static_cast<std::size_t>(spec.filters), 0.0);
        glorot(layer.w, channels * spec.kernel, spec.filters * spec.kernel);
        m.conv_layers.push_back(std::move(layer));
        channels = spec.filters;
        length = m.conv_layers.back().pooled_len;
    }

    int width = m.conv_layers.empty() ? input_dim : channels * length;
    for (int hidden : h.fc) {
        if (hidden < 1) throw ShapeError("fc width must be positive");
        CnnModel::FcLayer layer;
        layer.in = width;
        layer.out = hidden;
        layer.w.resize(static_cast<std::size_t>(hidden) * width);
        layer.b.assign(static_cast<std::size_t>(hidden), 0.0);
        glorot(layer.w, width, hidden);
        m.fc_layers.push_back(std::move(layer));
        width = hidden;
    }
    CnnModel::FcLayer out_layer;
    out_layer.in = width;
    out_layer.out = num_classes;
    out_layer.w.resize(static_cast<std::size_t>(num_classes) * width);
    out_layer.b.assign(static_cast<std::size_t>(num_classes), 0.0);
    glorot(out_layer.w, width, num_classes);
    m.fc_layers.push_back(std::move(out_layer));
    return m;
}

CnnModel train_cnn(const ViewDataset& train, const CnnHyperparams& h, int epochs, int batch_size,
                   std::uint64_t seed) {
    if (train.samples.empty()) throw DegenerateData("empty training set");
    if (batch_size < 1) throw Error("batch_size must be >= 1");
    CnnModel model = init_cnn(h, train.dims(), train.num_classes(), seed);

    Rng rng(stream_key(seed, 0x747261696e));
    Workspace ws(model);
    Gradients grads(model);
    AdamState adam(model);

    const std::size_t n = train.samples.size();
    std::vector<std::uint32_t> order(n);
    std::iota(order.begin(), order.end(), 0u);

    for (int epoch = 0; epoch < epochs; epoch++) {
        for (std::size_t i = n - 1; i > 0; i--) std::swap(order[i], order[bounded(rng, i + 1)]);
        double epoch_loss = 0.0;
        for (std::size_t start = 0; start < n; start += static_cast<std::size_t>(batch_size)) {
            const std::size_t end = std::min(n, start + static_cast<std::size_t>(batch_size));
            const double inv_batch = 1.0 / static_cast<double>(end - start);
            grads.zero();
            for (std::size_t i = start; i < end; i++) {
                const SampleMatrix& s = train.samples[order[i]];
                forward(model, s.features, ws, &rng);
                const double loss = sample_loss(ws, s.class_index);
                if (!std::isfinite(loss)) {
                    throw NonFiniteLoss("loss became non-finite at epoch " +
                                        std::to_string(epoch) + ", sample " + std::to_string(i));
                }
                epoch_loss += loss;
                backward(model, ws, s.class_index, inv_batch, grads);
            }
            adam_step(model, grads, adam, h.learning_rate);
        }
        model.epoch_losses.push_back(epoch_loss / static_cast<double>(n));
    }
    return model;
}

std::vector<double> CnnModel::probabilities(std::span<const std::uint8_t> sample) const {
    if (sample.size() != static_cast<std::size_t>(input_dim)) {
        throw DimensionMismatch("sample has " + std::to_string(sample.size()) +
                                " features, model expects " + std::to_string(input_dim));
    }
    Workspace ws(*this);
    forward(*this, sample, ws, nullptr);
    return ws.probs;
}

int CnnModel::predict(std::span<const std::uint8_t> sample) const {
    const std::vector<double> p = probabilities(sample);
    return static_cast<int>(std::max_element(p.begin(), p.end()) - p.begin());
}

std::size_t CnnModel::parameter_count() const {
    std::size_t n = 0;
    for (const auto& c : conv_layers) n += c.w.size() + c.b.size();
    for (const auto& f : fc_layers) n += f.w.size() + f.b.size();
    return n;
}

double accuracy(const CnnModel& m, const ViewDataset& view) {
    if (view.samples.empty()) return 0.0;
    Workspace ws(m);
    std::size_t correct = 0;
    for (const SampleMatrix& s : view.samples) {
        forward(m, s.features, ws, nullptr);
        const int pred = static_cast<int>(
            std::max_element(ws.probs.begin(), ws.probs.end()) - ws.probs.begin());
        if (pred == s.class_index) correct++;
    }
    return static_cast<double>(correct) / static_cast<double>(view.samples.size());
}

double cnn_gradient_check(const CnnHyperparams& h, const ViewDataset& batch, std::uint64_t seed,
                          std::size_t max_params) {
    CnnHyperparams hh = h;
    hh.dropout = 0.0;
    CnnModel model = init_cnn(hh, batch.dims(), batch.num_classes(), seed);
    Workspace ws(model);

    const double inv_batch = 1.0 / static_cast<double>(batch.samples.size());
    auto batch_loss = [&]() {
        double total = 0.0;
        for (const SampleMatrix& s : batch.samples) {
            forward(model, s.features, ws, nullptr);
            total += sample_loss(ws, s.class_index);
        }
        return total * inv_batch;
    };

    Gradients grads(model);
    for (const SampleMatrix& s : batch.samples) {
        forward(model, s.features, ws, nullptr);
        backward(model, ws, s.class_index, inv_batch, grads);
    }

    // Flatten parameter/gradient pairs.
    std::vector<std::pair<double*, const double*>> params;
    auto collect = [&](std::vector<double>& w, const std::vector<double>& g) {
        for (std::size_t i = 0; i < w.size(); i++) params.emplace_back(&w[i], &g[i]);
    };
    for (std::size_t l = 0; l < model.conv_layers.size(); l++) {
        collect(model.conv_layers[l].w, grads.conv_w[l]);
        collect(model.conv_layers[l].b, grads.conv_b[l]);
    }
    for (std::size_t l = 0; l < model.fc_layers.size(); l++) {
        collect(model.fc_layers[l].w, grads.fc_w[l]);
        collect(model.fc_layers[l].b, grads.fc_b[l]);
    }

    std::vector<std::size_t> chosen(params.size());
    std::iota(chosen.begin(), chosen.end(), std::size_t{0});
    if (params.size() > max_params) {
        Rng rng(stream_key(seed, 0x67726164));
        for (std::size_t i = chosen.size() - 1; i > 0; i--) {
            std::swap(chosen[i], chosen[bounded(rng, i + 1)]);
        }
        chosen.resize(max_params);
    }

    const double step = 1e-5;
    double max_rel = 0.0;
    for (std::size_t idx : chosen) {
        double* w = params[idx].first;
        const double analytic = *params[idx].second;
        const double saved = *w;
        *w = saved + step;
        const double up = batch_loss();
        *w = saved - step;
        const double down = batch_loss();
        *w = saved;
        const double numeric = (up - down) / (2.0 * step);
        const double rel = std::abs(analytic - numeric) /
                           std::max({std::abs(analytic), std::abs(numeric), 1e-6});
        max_rel = std::max(max_rel, rel);
    }
    return max_rel;
}

// --------------------------------------------------------------------------
// JSON serialization
// --------------------------------------------------------------------------

nlohmann::json CnnModel::to_json() const {
    nlohmann::json convs = nlohmann::json::array();
    for (const auto& c : conv_layers) {
        convs.push_back({{"in_channels", c.in_channels}, {"filters", c.filters},
                         {"kernel", c.kernel}, {"stride", c.stride}, {"in_len", c.in_len},
                         {"out_len", c.out_len}, {"pooled_len", c.pooled_len},
                         {"w", c.w}, {"b", c.b}});
    }
    nlohmann::json fcs = nlohmann::json::array();
    for (const auto& f : fc_layers) {
        fcs.push_back({{"in", f.in}, {"out", f.out}, {"w", f.w}, {"b", f.b}});
    }
    return nlohmann::json{{"kind", "cnn"}, {"hyperparams", h.to_json()},
                          {"input_dim", input_dim}, {"num_classes", num_classes},
                          {"conv_layers", std::move(convs)}, {"fc_layers", std::move(fcs)},
                          {"epoch_losses", epoch_losses}};
}

CnnModel CnnModel::from_json(const nlohmann::json& j) {
    CnnModel m;
    m.h = CnnHyperparams::from_json(j.at("hyperparams"));
    m.input_dim = j.at("input_dim").get<int>();
    m.num_classes = j.at("num_classes").get<int>();
    for (const auto& c : j.at("conv_layers")) {
        CnnModel::ConvLayer layer;
        layer.in_channels = c.at("in_channels").get<int>();
        layer.filters = c.at("filters").get<int>();
        layer.kernel = c.at("kernel").get<int>();
        layer.stride = c.at("stride").get<int>();
        layer.in_len = c.at("in_len").get<int>();
        layer.out_len = c.at("out_len").get<int>();
        layer.pooled_len = c.at("pooled_len").get<int>();
        layer.w = c.at("w").get<std::vector<double>>();
        layer.b = c.at("b").get<std::vector<double>>();
        m.conv_layers.push_back(std::move(layer));
    }
    for (const auto& f : j.at("fc_layers")) {
        CnnModel::FcLayer layer;
        layer.in = f.at("in").get<int>();
        layer.out = f.at("out").get<int>();
        layer.w = f.at("w").get<std::vector<double>>();
        layer.b = f.at("b").get<std::vector<double>>();
        m.fc_layers.push_back(std::move(layer));
    }
    m.epoch_losses = j.value("epoch_losses", std::vector<double>{});
    return m;
}

}  // namespace tlm
