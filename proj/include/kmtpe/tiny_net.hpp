#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <string>
#include <vector>

#include <json.hpp>

#include "kmtpe/errors.hpp"
#include "kmtpe/layer_shape.hpp"
#include "kmtpe/quantize.hpp"
#include "kmtpe/rng.hpp"

namespace kmtpe {

enum class Loss { cross_entropy, mse };

inline std::string to_string(Loss l) { return l == Loss::cross_entropy ? "cross_entropy" : "mse"; }

inline Loss loss_from_string(const std::string& s) {
    if (s == "cross_entropy") return Loss::cross_entropy;
    if (s == "mse") return Loss::mse;
    throw config_error("unknown loss: " + s);
}

/// Labeled samples. `labels` back cross-entropy, `targets` back MSE; only
/// the one matching the net's loss has to be populated.
struct Dataset {
    std::vector<std::vector<double>> x;
    std::vector<int> labels;
    std::vector<std::vector<double>> targets;

    std::size_t size() const { return x.size(); }
};

/// A small bias-free network of conv2d/dense layers with ReLU between
/// layers. Convolutions are stride-1, no padding; dense layers flatten
/// whatever precedes them. Forward evaluation is pure, so everything
/// downstream (gradients, Hessian probes, training) is deterministic.
struct TinyNet {
    std::vector<LayerShape> layers;
    std::vector<int> in_h;  // per-layer input plane, dense layers use 1x1
    std::vector<int> in_w;
    std::vector<std::vector<double>> weights;
    Loss loss = Loss::mse;

    std::size_t layer_count() const { return layers.size(); }

    std::size_t input_size() const {
        return static_cast<std::size_t>(layers.front().in_channels) * in_h.front() * in_w.front();
    }

    std::size_t output_size() const {
        const auto& last = layers.back();
        return static_cast<std::size_t>(last.out_channels) * last.out_h * last.out_w;
    }

    std::size_t parameter_count() const {
        std::size_t n = 0;
        for (const auto& w : weights) n += w.size();
        return n;
    }

    void validate() const {
        if (layers.empty()) throw config_error("net has no layers");
        if (in_h.size() != layers.size() || in_w.size() != layers.size() ||
            weights.size() != layers.size())
            throw config_error("net: per-layer arrays out of sync");
        for (std::size_t l = 0; l < layers.size(); ++l) {
            layers[l].validate();
            if (weights[l].size() != layers[l].weight_count())
                throw config_error("net: weight buffer size mismatch in layer '" +
                                   layers[l].name + "'");
            if (layers[l].kind == LayerKind::conv2d) {
                if (layers[l].out_h != in_h[l] - layers[l].kernel_h + 1 ||
                    layers[l].out_w != in_w[l] - layers[l].kernel_w + 1)
                    throw config_error("net: conv output plane inconsistent in layer '" +
                                       layers[l].name + "'");
            }
            if (l > 0) {
                const auto& prev = layers[l - 1];
                const std::size_t prev_flat =
                    static_cast<std::size_t>(prev.out_channels) * prev.out_h * prev.out_w;
                if (layers[l].kind == LayerKind::dense) {
                    if (static_cast<std::size_t>(layers[l].in_channels) != prev_flat)
                        throw config_error("net: dense fan-in mismatch in layer '" +
                                           layers[l].name + "'");
                } else {
                    if (layers[l].in_channels != prev.out_channels || in_h[l] != prev.out_h ||
                        in_w[l] != prev.out_w)
                        throw config_error("net: conv input mismatch in layer '" +
                                           layers[l].name + "'");
                }
            }
        }
    }
};

/// Per-layer fake-quantization bit-widths; empty means full precision.
/// Weights and the layer's input activations share one bit-width.
struct QuantPlan {
    std::vector<int> bits;

    bool active() const { return !bits.empty(); }
};

inline TinyNet make_mlp(int input_dim, const std::vector<int>& hidden, int output_dim, Loss loss) {
    TinyNet net;
    net.loss = loss;
    int in = input_dim;
    std::vector<int> dims = hidden;
    dims.push_back(output_dim);
    for (std::size_t i = 0; i < dims.size(); ++i) {
        net.layers.push_back(dense_shape("dense" + std::to_string(i), in, dims[i]));
        net.in_h.push_back(1);
        net.in_w.push_back(1);
        net.weights.emplace_back(net.layers.back().weight_count(), 0.0);
        in = dims[i];
    }
    net.validate();
    return net;
}

inline void init_weights(TinyNet& net, Rng& rng) {
    for (std::size_t l = 0; l < net.layer_count(); ++l) {
        const double scale =
            1.0 / std::sqrt(static_cast<double>(net.layers[l].weight_count()) /
                            net.layers[l].out_channels);
        for (auto& w : net.weights[l]) w = rng.normal() * scale;
    }
}

namespace detail {

inline void apply_linear(const LayerShape& shape, int in_h, int in_w,
                         const std::vector<double>& weights, const std::vector<double>& input,
                         std::vector<double>& output) {
    if (shape.kind == LayerKind::dense) {
        const int in_dim = shape.in_channels, out_dim = shape.out_channels;
        output.assign(static_cast<std::size_t>(out_dim), 0.0);
        for (int o = 0; o < out_dim; ++o) {
            double acc = 0.0;
            const double* wrow = weights.data() + static_cast<std::size_t>(o) * in_dim;
            for (int i = 0; i < in_dim; ++i) acc += wrow[i] * input[static_cast<std::size_t>(i)];
            output[static_cast<std::size_t>(o)] = acc;
        }
        return;
    }
    const int C = shape.in_channels, K = shape.out_channels;
    const int kh = shape.kernel_h, kw = shape.kernel_w;
    const int oh = shape.out_h, ow = shape.out_w;
    output.assign(static_cast<std::size_t>(K) * oh * ow, 0.0);
    for (int oc = 0; oc < K; ++oc)
        for (int oy = 0; oy < oh; ++oy)
            for (int ox = 0; ox < ow; ++ox) {
                double acc = 0.0;
                for (int ic = 0; ic < C; ++ic)
                    for (int ky = 0; ky < kh; ++ky)
                        for (int kx = 0; kx < kw; ++kx) {
                            const std::size_t wi =
                                ((static_cast<std::size_t>(oc) * C + ic) * kh + ky) * kw + kx;
                            const std::size_t xi =
                                (static_cast<std::size_t>(ic) * in_h + oy + ky) * in_w + ox + kx;
                            acc += weights[wi] * input[xi];
                        }
                output[(static_cast<std::size_t>(oc) * oh + oy) * ow + ox] = acc;
            }
}

// Accumulates dL/dW into grad and returns dL/dinput.
inline std::vector<double> backprop_linear(const LayerShape& shape, int in_h, int in_w,
                                           const std::vector<double>& weights,
                                           const std::vector<double>& input,
                                           const std::vector<double>& delta_out,
                                           std::vector<double>& grad) {
    std::vector<double> delta_in(input.size(), 0.0);
    if (shape.kind == LayerKind::dense) {
        const int in_dim = shape.in_channels, out_dim = shape.out_channels;
        for (int o = 0; o < out_dim; ++o) {
            const double d = delta_out[static_cast<std::size_t>(o)];
            if (d == 0.0) continue;
            double* grow = grad.data() + static_cast<std::size_t>(o) * in_dim;
            const double* wrow = weights.data() + static_cast<std::size_t>(o) * in_dim;
            for (int i = 0; i < in_dim; ++i) {
                grow[i] += d * input[static_cast<std::size_t>(i)];
                delta_in[static_cast<std::size_t>(i)] += d * wrow[i];
            }
        }
        return delta_in;
    }
    const int C = shape.in_channels, K = shape.out_channels;
    const int kh = shape.kernel_h, kw = shape.kernel_w;
    const int oh = shape.out_h, ow = shape.out_w;
    for (int oc = 0; oc < K; ++oc)
        for (int oy = 0; oy < oh; ++oy)
            for (int ox = 0; ox < ow; ++ox) {
                const double d = delta_out[(static_cast<std::size_t>(oc) * oh + oy) * ow + ox];
                if (d == 0.0) continue;
                for (int ic = 0; ic < C; ++ic)
                    for (int ky = 0; ky < kh; ++ky)
                        for (int kx = 0; kx < kw; ++kx) {
                            const std::size_t wi =
                                ((static_cast<std::size_t>(oc) * C + ic) * kh + ky) * kw + kx;
                            const std::size_t xi =
                                (static_cast<std::size_t>(ic) * in_h + oy + ky) * in_w + ox + kx;
                            grad[wi] += d * input[xi];
                            delta_in[xi] += d * weights[wi];
                        }
            }
    return delta_in;
}

inline std::vector<double> softmax(const std::vector<double>& z) {
    std::vector<double> p(z.size());
    const double m = *std::max_element(z.begin(), z.end());
    double sum = 0.0;
    for (std::size_t i = 0; i < z.size(); ++i) {
        p[i] = std::exp(z[i] - m);
        sum += p[i];
    }
    for (auto& v : p) v /= sum;
    return p;
}

}  // namespace detail

/// Forward pass for one sample. With a quantization plan, the layer's input
/// activations and its weights are both fake-quantized at the layer's
/// bit-width before the linear op (input quantization happens after the
/// previous nonlinearity).
inline std::vector<double> forward(const TinyNet& net, const std::vector<double>& x,
                                   const QuantPlan& plan = {}) {
    if (x.size() != net.input_size()) throw input_error("forward: input size mismatch");
    std::vector<double> act = x;
    for (std::size_t l = 0; l < net.layer_count(); ++l) {
        const std::vector<double>* w = &net.weights[l];
        std::vector<double> qw, qa;
        if (plan.active()) {
            qa = quantize_tensor(act, plan.bits[l]);
            qw = quantize_tensor(net.weights[l], plan.bits[l]);
            act = std::move(qa);
            w = &qw;
        }
        std::vector<double> z;
        detail::apply_linear(net.layers[l], net.in_h[l], net.in_w[l], *w, act, z);
        if (l + 1 < net.layer_count())
            for (auto& v : z) v = v > 0.0 ? v : 0.0;
        act = std::move(z);
    }
    return act;
}

/// Mean loss over a batch.
inline double loss_value(const TinyNet& net, const Dataset& data, const QuantPlan& plan = {}) {
    if (data.size() == 0) throw input_error("loss_value: empty batch");
    double total = 0.0;
    for (std::size_t i = 0; i < data.size(); ++i) {
        const auto out = forward(net, data.x[i], plan);
        if (net.loss == Loss::mse) {
            const auto& y = data.targets[i];
            for (std::size_t o = 0; o < out.size(); ++o) {
                const double d = out[o] - y[o];
                total += d * d;
            }
        } else {
            const auto p = detail::softmax(out);
            total -= std::log(std::max(p[static_cast<std::size_t>(data.labels[i])], 1e-300));
        }
    }
    return total / static_cast<double>(data.size());
}

/// Exact reverse-mode gradient of the mean loss, per layer. Quantization,
/// when active, uses the straight-through estimator: forward sees quantized
/// weights/activations, the backward pass treats both quantizers as
/// identity.
inline std::vector<std::vector<double>> gradient(const TinyNet& net, const Dataset& data,
                                                 const QuantPlan& plan = {}) {
    if (data.size() == 0) throw input_error("gradient: empty batch");
    const std::size_t L = net.layer_count();
    std::vector<std::vector<double>> grads(L);
    for (std::size_t l = 0; l < L; ++l) grads[l].assign(net.weights[l].size(), 0.0);

    const double inv_n = 1.0 / static_cast<double>(data.size());
    std::vector<std::vector<double>> inputs(L);   // layer inputs as seen by the linear op
    std::vector<std::vector<double>> preacts(L);  // pre-ReLU outputs
    std::vector<std::vector<double>> qweights(L);

    for (std::size_t i = 0; i < data.size(); ++i) {
        if (data.x[i].size() != net.input_size()) throw input_error("gradient: input size mismatch");
        std::vector<double> act = data.x[i];
        for (std::size_t l = 0; l < L; ++l) {
            if (plan.active()) {
                act = quantize_tensor(act, plan.bits[l]);
                qweights[l] = quantize_tensor(net.weights[l], plan.bits[l]);
            }
            inputs[l] = act;
            const std::vector<double>& w = plan.active() ? qweights[l] : net.weights[l];
            detail::apply_linear(net.layers[l], net.in_h[l], net.in_w[l], w, act, preacts[l]);
            act = preacts[l];
            if (l + 1 < L)
                for (auto& v : act) v = v > 0.0 ? v : 0.0;
        }

        std::vector<double> delta(act.size());
        if (net.loss == Loss::mse) {
            const auto& y = data.targets[i];
            for (std::size_t o = 0; o < act.size(); ++o) delta[o] = 2.0 * inv_n * (act[o] - y[o]);
        } else {
            delta = detail::softmax(act);
            delta[static_cast<std::size_t>(data.labels[i])] -= 1.0;
            for (auto& v : delta) v *= inv_n;
        }

        for (std::size_t lr = L; lr-- > 0;) {
            const std::vector<double>& w = plan.active() ? qweights[lr] : net.weights[lr];
            std::vector<double> delta_in = detail::backprop_linear(
                net.layers[lr], net.in_h[lr], net.in_w[lr], w, inputs[lr], delta, grads[lr]);
            if (lr > 0) {
                for (std::size_t j = 0; j < delta_in.size(); ++j)
                    if (preacts[lr - 1][j] <= 0.0) delta_in[j] = 0.0;
                delta = std::move(delta_in);
            }
        }
    }
    return grads;
}

/// Fraction of samples whose argmax output matches the label.
inline double accuracy(const TinyNet& net, const Dataset& data, const QuantPlan& plan = {}) {
    if (data.size() == 0) throw input_error("accuracy: empty dataset");
    std::size_t hits = 0;
    for (std::size_t i = 0; i < data.size(); ++i) {
        const auto out = forward(net, data.x[i], plan);
        const auto it = std::max_element(out.begin(), out.end());
        if (static_cast<int>(it - out.begin()) == data.labels[i]) ++hits;
    }
    return static_cast<double>(hits) / static_cast<double>(data.size());
}

/// Plain minibatch SGD; shuffling comes from the supplied RNG, so the whole
/// trajectory is reproducible. Returns false if the loss went non-finite.
inline bool train_sgd(TinyNet& net, const Dataset& data, int epochs, double learning_rate,
                      int batch_size, Rng& rng, const QuantPlan& plan = {}) {
    if (epochs < 1) throw config_error("train_sgd: epochs must be >= 1");
    const std::size_t n = data.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    for (int e = 0; e < epochs; ++e) {
        // Fisher-Yates with our own RNG.
        for (std::size_t i = n; i > 1; --i) {
            const std::size_t j = rng.below(i);
            std::swap(order[i - 1], order[j]);
        }
        for (std::size_t start = 0; start < n; start += static_cast<std::size_t>(batch_size)) {
            Dataset batch;
            const std::size_t stop = std::min(n, start + static_cast<std::size_t>(batch_size));
            for (std::size_t i = start; i < stop; ++i) {
                batch.x.push_back(data.x[order[i]]);
                if (!data.labels.empty()) batch.labels.push_back(data.labels[order[i]]);
                if (!data.targets.empty()) batch.targets.push_back(data.targets[order[i]]);
            }
            const auto grads = gradient(net, batch, plan);
            for (std::size_t l = 0; l < net.layer_count(); ++l)
                for (std::size_t j = 0; j < grads[l].size(); ++j) {
                    net.weights[l][j] -= learning_rate * grads[l][j];
                    if (!std::isfinite(net.weights[l][j])) return false;
                }
        }
    }
    return true;
}

inline void to_json(nlohmann::json& j, const TinyNet& net) {
    nlohmann::json layers = nlohmann::json::array();
    for (std::size_t l = 0; l < net.layer_count(); ++l) {
        nlohmann::json lj;
        to_json(lj, net.layers[l]);
        lj["in_h"] = net.in_h[l];
        lj["in_w"] = net.in_w[l];
        lj["weights"] = net.weights[l];
        layers.push_back(std::move(lj));
    }
    j = nlohmann::json{{"schema_version", 1}, {"loss", to_string(net.loss)}, {"layers", layers}};
}

inline void from_json(const nlohmann::json& j, TinyNet& net) {
    net.loss = loss_from_string(j.at("loss").get<std::string>());
    net.layers.clear();
    net.in_h.clear();
    net.in_w.clear();
    net.weights.clear();
    for (const auto& lj : j.at("layers")) {
        LayerShape shape;
        from_json(lj, shape);
        net.layers.push_back(shape);
        net.in_h.push_back(lj.value("in_h", 1));
        net.in_w.push_back(lj.value("in_w", 1));
        net.weights.push_back(lj.at("weights").get<std::vector<double>>());
    }
    net.validate();
}

}  // namespace kmtpe
