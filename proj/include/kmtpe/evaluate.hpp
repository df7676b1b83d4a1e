#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "kmtpe/errors.hpp"
#include "kmtpe/hw.hpp"
#include "kmtpe/layer_shape.hpp"
#include "kmtpe/quantize.hpp"
#include "kmtpe/rng.hpp"
#include "kmtpe/tasks.hpp"
#include "kmtpe/tiny_net.hpp"
#include "kmtpe/trial.hpp"

namespace kmtpe {

/// Upper bounds on model size / latency / energy and a lower bound on
/// throughput; all optional. Violations enter the objective as Lagrangian
/// penalties on the normalized violation.
struct ConstraintSet {
    std::optional<double> model_size_bytes;
    std::optional<double> latency_cycles;
    std::optional<double> energy_proxy;
    std::optional<double> throughput_proxy;
    double penalty_lambda = 10.0;

    void validate() const {
        for (const auto& b :
             {model_size_bytes, latency_cycles, energy_proxy, throughput_proxy})
            if (b && *b <= 0.0) throw config_error("constraints: bounds must be positive");
        if (penalty_lambda < 0.0) throw config_error("constraints: lambda must be >= 0");
    }

    double penalty(const CostReport& cost) const {
        double total = 0.0;
        auto over = [&](double value, double bound) {
            return std::max(0.0, (value - bound) / bound);
        };
        if (model_size_bytes)
            total += penalty_lambda * over(static_cast<double>(cost.model_size_bytes),
                                           *model_size_bytes);
        if (latency_cycles)
            total +=
                penalty_lambda * over(static_cast<double>(cost.latency_cycles), *latency_cycles);
        if (energy_proxy) total += penalty_lambda * over(cost.energy_proxy, *energy_proxy);
        if (throughput_proxy)
            total += penalty_lambda *
                     std::max(0.0, (*throughput_proxy - cost.throughput_proxy) / *throughput_proxy);
        return total;
    }
};

inline void to_json(nlohmann::json& j, const ConstraintSet& c) {
    j = nlohmann::json::object();
    j["model_size_bytes"] = c.model_size_bytes ? nlohmann::json(*c.model_size_bytes) : nullptr;
    j["latency_cycles"] = c.latency_cycles ? nlohmann::json(*c.latency_cycles) : nullptr;
    j["energy_proxy"] = c.energy_proxy ? nlohmann::json(*c.energy_proxy) : nullptr;
    j["throughput_proxy"] = c.throughput_proxy ? nlohmann::json(*c.throughput_proxy) : nullptr;
    j["penalty_lambda"] = c.penalty_lambda;
}

inline void from_json(const nlohmann::json& j, ConstraintSet& c) {
    auto opt = [&](const char* key) -> std::optional<double> {
        if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
        return j.at(key).get<double>();
    };
    c.model_size_bytes = opt("model_size_bytes");
    c.latency_cycles = opt("latency_cycles");
    c.energy_proxy = opt("energy_proxy");
    c.throughput_proxy = opt("throughput_proxy");
    c.penalty_lambda = j.value("penalty_lambda", 10.0);
    c.validate();
}

struct EvalOptions {
    int epochs = 4;  // a handful of tuning epochs per configuration suffices
    double learning_rate = 0.1;
    int batch_size = 32;
};

/// Builds the width-scaled net for a configuration, seeded from the shared
/// template: overlapping weight blocks are copied, channels that exist only
/// in the widened net get fresh (seeded) initialization. The classifier's
/// output count is pinned to the task's class count regardless of the last
/// width multiplier — scaling away output classes would change the task.
inline TinyNet build_scaled_net(const TinyNet& tmpl, const Configuration& config, Rng& rng) {
    if (config.widths.size() != tmpl.layer_count())
        throw config_error("configuration does not cover every template layer");
    TinyNet net;
    net.loss = tmpl.loss;
    net.layers = effective_shapes(tmpl.layers, config);
    net.layers.back().out_channels = tmpl.layers.back().out_channels;
    net.in_h = tmpl.in_h;
    net.in_w = tmpl.in_w;
    // Dense fan-ins follow the (possibly rescaled) flattened previous layer.
    for (std::size_t l = 1; l < net.layers.size(); ++l)
        if (net.layers[l].kind == LayerKind::dense)
            net.layers[l].in_channels = net.layers[l - 1].out_channels *
                                        net.layers[l - 1].out_h * net.layers[l - 1].out_w;
    net.weights.resize(net.layers.size());
    for (std::size_t l = 0; l < net.layers.size(); ++l) {
        const auto& old_shape = tmpl.layers[l];
        const auto& new_shape = net.layers[l];
        std::vector<double>& w = net.weights[l];
        w.assign(new_shape.weight_count(), 0.0);
        const double init_scale =
            1.0 / std::sqrt(static_cast<double>(new_shape.weight_count()) /
                            new_shape.out_channels);
        for (int o = 0; o < new_shape.out_channels; ++o)
            for (int i = 0; i < new_shape.in_channels; ++i)
                for (int ky = 0; ky < new_shape.kernel_h; ++ky)
                    for (int kx = 0; kx < new_shape.kernel_w; ++kx) {
                        const std::size_t dst =
                            ((static_cast<std::size_t>(o) * new_shape.in_channels + i) *
                                 new_shape.kernel_h +
                             ky) *
                                new_shape.kernel_w +
                            kx;
                        if (o < old_shape.out_channels && i < old_shape.in_channels) {
                            const std::size_t src =
                                ((static_cast<std::size_t>(o) * old_shape.in_channels + i) *
                                     old_shape.kernel_h +
                                 ky) *
                                    old_shape.kernel_w +
                                kx;
                            w[dst] = tmpl.weights[l][src];
                        } else {
                            w[dst] = rng.normal() * init_scale;
                        }
                    }
    }
    net.validate();
    return net;
}

/// Evaluates one configuration: fine-tunes the width-scaled net for a few
/// epochs under straight-through fake quantization (weights and input
/// activations share the layer's bit-width), measures test accuracy, prices
/// the deployed net with the hardware model and applies constraint
/// penalties. Pure in (template, data, config, seed).
inline Trial evaluate_configuration(const Configuration& config, const TinyNet& tmpl,
                                    const Dataset& train, const Dataset& test,
                                    const ConstraintSet& constraints, const HardwareSpec& hw,
                                    const EvalOptions& opts, std::uint64_t seed) {
    Trial trial;
    trial.config = config;

    Rng rng(derive_seed(seed, 0xe7a1));
    TinyNet net = build_scaled_net(tmpl, config, rng);

    QuantPlan plan;
    plan.bits = config.bits;
    const bool ok = train_sgd(net, train, opts.epochs, opts.learning_rate, opts.batch_size, rng,
                              plan);

    Configuration deployed;  // bits as searched, widths already baked into net.layers
    deployed.bits = config.bits;
    deployed.widths.assign(net.layers.size(), 1.0);
    const CostReport deployed_cost = cost_report(net.layers, deployed, hw);
    trial.model_size_bytes = deployed_cost.model_size_bytes;
    trial.latency_cycles = deployed_cost.latency_cycles;

    if (!ok) {
        trial.failed = true;
        trial.objective = Trial::failed_objective();
        return trial;
    }

    trial.accuracy = accuracy(net, test, plan);
    trial.penalties = constraints.penalty(deployed_cost);
    trial.objective = trial.accuracy - trial.penalties;
    if (!std::isfinite(trial.objective)) {
        trial.failed = true;
        trial.objective = Trial::failed_objective();
    }
    return trial;
}

}  // namespace kmtpe
