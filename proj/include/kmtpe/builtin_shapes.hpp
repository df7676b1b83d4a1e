#pragma once

#include <string>
#include <vector>

#include "kmtpe/errors.hpp"
#include "kmtpe/layer_shape.hpp"

namespace kmtpe {

/// Standard architecture weight-layer lists (convolutions and the final
/// classifier; batch norms and biases carry no searchable bit-width and are
/// not listed). Depthwise convolutions use in_channels = 1 so their weight
/// count is exact. Spatial sizes follow the stock ImageNet-224 / CIFAR-32
/// variants.
namespace builtin {

namespace detail {

inline void add(std::vector<LayerShape>& v, LayerShape s) { v.push_back(std::move(s)); }

}  // namespace detail

inline std::vector<LayerShape> resnet18() {
    std::vector<LayerShape> v;
    detail::add(v, conv_shape("conv1", 3, 64, 7, 112));
    int idx = 0;
    auto basic_stage = [&](int in_ch, int ch, int blocks, int out_hw, bool downsample) {
        for (int b = 0; b < blocks; ++b) {
            const int cin = b == 0 ? in_ch : ch;
            detail::add(v, conv_shape("layer" + std::to_string(idx) + "a", cin, ch, 3, out_hw));
            detail::add(v, conv_shape("layer" + std::to_string(idx) + "b", ch, ch, 3, out_hw));
            if (b == 0 && downsample)
                detail::add(v, conv_shape("layer" + std::to_string(idx) + "ds", cin, ch, 1, out_hw));
            ++idx;
        }
    };
    basic_stage(64, 64, 2, 56, false);
    basic_stage(64, 128, 2, 28, true);
    basic_stage(128, 256, 2, 14, true);
    basic_stage(256, 512, 2, 7, true);
    detail::add(v, dense_shape("fc", 512, 1000));
    return v;
}

inline std::vector<LayerShape> resnet20(int classes = 10) {
    std::vector<LayerShape> v;
    detail::add(v, conv_shape("conv1", 3, 16, 3, 32));
    int idx = 0;
    // CIFAR ResNets use parameter-free (option A) shortcuts, so each stage
    // contributes exactly 2 convs per block.
    auto stage = [&](int in_ch, int ch, int out_hw) {
        for (int b = 0; b < 3; ++b) {
            const int cin = b == 0 ? in_ch : ch;
            detail::add(v, conv_shape("layer" + std::to_string(idx) + "a", cin, ch, 3, out_hw));
            detail::add(v, conv_shape("layer" + std::to_string(idx) + "b", ch, ch, 3, out_hw));
            ++idx;
        }
    };
    stage(16, 16, 32);
    stage(16, 32, 16);
    stage(32, 64, 8);
    detail::add(v, dense_shape("fc", 64, classes));
    return v;
}

inline std::vector<LayerShape> resnet50() {
    std::vector<LayerShape> v;
    detail::add(v, conv_shape("conv1", 3, 64, 7, 112));
    int idx = 0;
    auto bottleneck_stage = [&](int in_ch, int width, int blocks, int out_hw) {
        const int out_ch = width * 4;
        for (int b = 0; b < blocks; ++b) {
            const int cin = b == 0 ? in_ch : out_ch;
            const std::string base = "layer" + std::to_string(idx);
            detail::add(v, conv_shape(base + "a", cin, width, 1, out_hw));
            detail::add(v, conv_shape(base + "b", width, width, 3, out_hw));
            detail::add(v, conv_shape(base + "c", width, out_ch, 1, out_hw));
            if (b == 0) detail::add(v, conv_shape(base + "ds", cin, out_ch, 1, out_hw));
            ++idx;
        }
    };
    bottleneck_stage(64, 64, 3, 56);
    bottleneck_stage(256, 128, 4, 28);
    bottleneck_stage(512, 256, 6, 14);
    bottleneck_stage(1024, 512, 3, 7);
    detail::add(v, dense_shape("fc", 2048, 1000));
    return v;
}

inline std::vector<LayerShape> mobilenet_v2() {
    std::vector<LayerShape> v;
    detail::add(v, conv_shape("conv1", 3, 32, 3, 112));
    int idx = 0;
    int in_ch = 32;
    int in_hw = 112;
    auto inverted_residual = [&](int expand, int out_ch, int blocks, int stride) {
        for (int b = 0; b < blocks; ++b) {
            const int s = b == 0 ? stride : 1;
            const int out_hw = in_hw / s;
            const int mid = in_ch * expand;
            const std::string base = "block" + std::to_string(idx);
            if (expand != 1) detail::add(v, conv_shape(base + "_exp", in_ch, mid, 1, in_hw));
            detail::add(v, conv_shape(base + "_dw", 1, mid, 3, out_hw));
            detail::add(v, conv_shape(base + "_proj", mid, out_ch, 1, out_hw));
            in_ch = out_ch;
            in_hw = out_hw;
            ++idx;
        }
    };
    inverted_residual(1, 16, 1, 1);
    inverted_residual(6, 24, 2, 2);
    inverted_residual(6, 32, 3, 2);
    inverted_residual(6, 64, 4, 2);
    inverted_residual(6, 96, 3, 1);
    inverted_residual(6, 160, 3, 2);
    inverted_residual(6, 320, 1, 1);
    detail::add(v, conv_shape("head", 320, 1280, 1, 7));
    detail::add(v, dense_shape("fc", 1280, 1000));
    return v;
}

/// 28 weight layers: the stem conv, 13 depthwise/pointwise pairs and the
/// classifier. CIFAR variant (stride-1 stem on 32x32 input).
inline std::vector<LayerShape> mobilenet_v1_cifar(int classes = 100) {
    std::vector<LayerShape> v;
    detail::add(v, conv_shape("conv1", 3, 32, 3, 32));
    int in_ch = 32;
    int in_hw = 32;
    int idx = 0;
    auto pair = [&](int out_ch, int stride) {
        const int out_hw = in_hw / stride;
        detail::add(v, conv_shape("dw" + std::to_string(idx), 1, in_ch, 3, out_hw));
        detail::add(v, conv_shape("pw" + std::to_string(idx), in_ch, out_ch, 1, out_hw));
        in_ch = out_ch;
        in_hw = out_hw;
        ++idx;
    };
    pair(64, 1);
    pair(128, 2);
    pair(128, 1);
    pair(256, 2);
    pair(256, 1);
    pair(512, 2);
    for (int i = 0; i < 5; ++i) pair(512, 1);
    pair(1024, 2);
    pair(1024, 1);
    detail::add(v, dense_shape("fc", 1024, classes));
    return v;
}

inline std::vector<LayerShape> by_name(const std::string& name) {
    if (name == "resnet18") return resnet18();
    if (name == "resnet20") return resnet20();
    if (name == "resnet50") return resnet50();
    if (name == "mobilenetv2") return mobilenet_v2();
    if (name == "mobilenetv1-cifar") return mobilenet_v1_cifar();
    throw config_error("unknown builtin architecture: " + name);
}

}  // namespace builtin
}  // namespace kmtpe
