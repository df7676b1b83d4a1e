#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "kmtpe/errors.hpp"

namespace kmtpe {

enum class LayerKind { conv2d, dense };

inline std::string to_string(LayerKind k) { return k == LayerKind::conv2d ? "conv2d" : "dense"; }

inline LayerKind layer_kind_from_string(const std::string& s) {
    if (s == "conv2d") return LayerKind::conv2d;
    if (s == "dense") return LayerKind::dense;
    throw config_error("unknown layer kind: " + s);
}

/// Static shape of one weight layer. Dense layers are 1x1 "convolutions"
/// with unit output plane. Depthwise convolutions are represented with
/// in_channels = 1 (per-output-channel kernels), which keeps the
/// weight_count invariant exact.
struct LayerShape {
    std::string name;
    LayerKind kind = LayerKind::dense;
    int in_channels = 0;
    int out_channels = 0;
    int kernel_h = 1;
    int kernel_w = 1;
    int out_h = 1;
    int out_w = 1;

    std::uint64_t weight_count() const {
        return static_cast<std::uint64_t>(in_channels) * out_channels * kernel_h * kernel_w;
    }

    /// Multiply-accumulates per inference.
    std::uint64_t mac_count() const {
        return weight_count() * static_cast<std::uint64_t>(out_h) * out_w;
    }

    void validate() const {
        if (in_channels < 1 || out_channels < 1 || kernel_h < 1 || kernel_w < 1 || out_h < 1 ||
            out_w < 1)
            throw config_error("layer '" + name + "': all dimensions must be >= 1");
        if (kind == LayerKind::dense && (kernel_h != 1 || kernel_w != 1 || out_h != 1 || out_w != 1))
            throw config_error("layer '" + name + "': dense layers are 1x1 with unit output plane");
    }
};

inline LayerShape conv_shape(std::string name, int in_ch, int out_ch, int k, int out_hw) {
    LayerShape s;
    s.name = std::move(name);
    s.kind = LayerKind::conv2d;
    s.in_channels = in_ch;
    s.out_channels = out_ch;
    s.kernel_h = s.kernel_w = k;
    s.out_h = s.out_w = out_hw;
    return s;
}

inline LayerShape dense_shape(std::string name, int in_dim, int out_dim) {
    LayerShape s;
    s.name = std::move(name);
    s.kind = LayerKind::dense;
    s.in_channels = in_dim;
    s.out_channels = out_dim;
    return s;
}

/// One point of the joint search space: a bit-width and a width multiplier
/// per layer.
struct Configuration {
    std::vector<int> bits;
    std::vector<double> widths;

    std::size_t layer_count() const { return bits.size(); }

    bool operator==(const Configuration& other) const = default;
};

/// Width multipliers scale filter counts: round to nearest, at least one
/// channel survives.
inline int scale_channels(int channels, double width) {
    const long long scaled = std::llround(static_cast<double>(channels) * width);
    return scaled < 1 ? 1 : static_cast<int>(scaled);
}

/// Effective (width-scaled) shapes of a whole network. A layer's own
/// multiplier scales its out_channels; its in_channels inherit the previous
/// layer's multiplier, so channel counts stay consistent along the chain.
/// The first layer's input (the data) is never scaled.
inline std::vector<LayerShape> effective_shapes(const std::vector<LayerShape>& layers,
                                                const Configuration& config) {
    if (config.widths.size() != layers.size())
        throw config_error("configuration does not cover every layer");
    std::vector<LayerShape> out = layers;
    for (std::size_t l = 0; l < layers.size(); ++l) {
        if (l > 0) out[l].in_channels = scale_channels(layers[l].in_channels, config.widths[l - 1]);
        out[l].out_channels = scale_channels(layers[l].out_channels, config.widths[l]);
    }
    return out;
}

inline void to_json(nlohmann::json& j, const LayerShape& s) {
    j = nlohmann::json{{"name", s.name},
                       {"kind", to_string(s.kind)},
                       {"in_channels", s.in_channels},
                       {"out_channels", s.out_channels},
                       {"kernel_h", s.kernel_h},
                       {"kernel_w", s.kernel_w},
                       {"out_h", s.out_h},
                       {"out_w", s.out_w}};
}

inline void from_json(const nlohmann::json& j, LayerShape& s) {
    s.name = j.at("name").get<std::string>();
    s.kind = layer_kind_from_string(j.at("kind").get<std::string>());
    s.in_channels = j.at("in_channels").get<int>();
    s.out_channels = j.at("out_channels").get<int>();
    s.kernel_h = j.value("kernel_h", 1);
    s.kernel_w = j.value("kernel_w", 1);
    s.out_h = j.value("out_h", 1);
    s.out_w = j.value("out_w", 1);
    s.validate();
}

inline void to_json(nlohmann::json& j, const Configuration& c) {
    j = nlohmann::json{{"bits", c.bits}, {"widths", c.widths}};
}

inline void from_json(const nlohmann::json& j, Configuration& c) {
    c.bits = j.at("bits").get<std::vector<int>>();
    if (j.contains("widths"))
        c.widths = j.at("widths").get<std::vector<double>>();
    else
        c.widths.assign(c.bits.size(), 1.0);
    if (c.widths.size() != c.bits.size())
        throw config_error("configuration bits/widths length mismatch");
}

}  // namespace kmtpe
