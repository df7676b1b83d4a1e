#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "kmtpe/errors.hpp"

namespace kmtpe {

inline bool supported_bit_width(int bits) {
    return bits == 2 || bits == 3 || bits == 4 || bits == 6 || bits == 8 || bits == 16;
}

/// Symmetric uniform per-tensor fake quantization. The scale is
/// max|w| / (2^(bits-1) - 1); values snap to integer multiples of it and
/// 16 bits passes the tensor through untouched. An all-zero tensor maps to
/// itself (the degenerate scale is not an error).
///
/// Each output is computed as (k / K) * max|w| with integer k, so the
/// largest-magnitude element lands on +-max|w| exactly and requantizing a
/// quantized tensor reproduces it bit for bit.
inline std::vector<double> quantize_tensor(const std::vector<double>& w, int bits) {
    if (!supported_bit_width(bits))
        throw input_error("quantize_tensor: unsupported bit-width " + std::to_string(bits));
    if (bits == 16) return w;

    double max_abs = 0.0;
    for (double v : w) max_abs = std::max(max_abs, std::fabs(v));
    if (max_abs == 0.0) return std::vector<double>(w.size(), 0.0);

    const double grid_max = static_cast<double>((1 << (bits - 1)) - 1);
    const double scale = max_abs / grid_max;
    std::vector<double> out(w.size());
    for (std::size_t i = 0; i < w.size(); ++i) {
        double level = std::nearbyint(w[i] / scale);
        level = std::min(std::max(level, -grid_max), grid_max);
        out[i] = (level / grid_max) * max_abs;
    }
    return out;
}

}  // namespace kmtpe
