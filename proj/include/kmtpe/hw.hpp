#pragma once

#include <cmath>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "kmtpe/errors.hpp"
#include "kmtpe/layer_shape.hpp"

namespace kmtpe {

struct PackingEntry {
    int mults_per_dsp = 1;
    int adds_per_dsp = 0;
};

/// Packing capacities per bit-width: how many multiplications (and carried
/// additions) one DSP performs per cycle at that operand width. The default
/// table is 2 mults for 8/6 bits, 6 mults + 2 adds for 4/3 bits and
/// 15 mults + 8 adds for 2 bits, with 16-bit operands as the unpacked
/// baseline.
inline std::map<int, PackingEntry> default_packing_table() {
    return {{16, {1, 0}}, {8, {2, 0}}, {6, {2, 0}}, {4, {6, 2}}, {3, {6, 2}}, {2, {15, 8}}};
}

/// Systolic-array target: an M x N grid of DSP-based processing elements,
/// each doing one 27x18-bit multiply with 48-bit accumulation per cycle.
struct HardwareSpec {
    int rows = 16;  // M: output channels processed per invocation
    int cols = 16;  // N: patch entries processed per cycle
    int mult_width_wide = 27;
    int mult_width_narrow = 18;
    int accumulator_width = 48;
    std::map<int, PackingEntry> packing_table = default_packing_table();
    double clock_mhz = 200.0;

    const PackingEntry& packing(int bits) const {
        const auto it = packing_table.find(bits);
        if (it == packing_table.end())
            throw config_error("hardware: bit-width " + std::to_string(bits) +
                               " missing from packing table");
        return it->second;
    }

    void validate() const {
        if (rows < 1 || cols < 1) throw config_error("hardware: array dimensions must be >= 1");
        for (const auto& [bits, entry] : packing_table)
            if (bits < 1 || entry.mults_per_dsp < 1 || entry.adds_per_dsp < 0)
                throw config_error("hardware: malformed packing table entry");
    }
};

// ---------------------------------------------------------------------------
// Packed multiply-accumulate
// ---------------------------------------------------------------------------

/// Guard-bit field stride for packing n b-bit operands: each product field
/// carries 2b bits plus headroom for the operand count plus one guard bit.
inline int packing_stride(int bits, int n) {
    int log2n = 0;
    while ((1 << log2n) < n) ++log2n;
    return 2 * bits + log2n + 1;
}

/// Largest operand count the simple one-multiplier layout can actually hold:
/// packed operands must fit the wide (27-bit) port, the weight the narrow
/// (18-bit) port, and the full product the 48-bit accumulator. The default
/// table's denser counts for <= 4-bit operands exceed this layout; they are
/// still honored as throughput capacity, but bit-exact simulation admits
/// only what fits.
inline int admitted_packing_capacity(const HardwareSpec& hw, int bits) {
    if (bits > hw.mult_width_narrow) return 0;
    int best = 0;
    for (int n = 1; n <= 64; ++n) {
        const int g = packing_stride(bits, n);
        const long long operand_bits = static_cast<long long>(n - 1) * g + bits;
        const long long product_bits = static_cast<long long>(n - 1) * g + 2 * bits + 1;
        if (operand_bits <= hw.mult_width_wide && product_bits <= hw.accumulator_width)
            best = n;
    }
    return best;
}

struct PackingClassification {
    int bits = 0;
    int table_mults = 0;
    int admitted_mults = 0;
    bool fits = false;  // table capacity admitted by the bit-exact layout
};

/// Startup check: classifies every packing-table row against the layout the
/// simulator can prove exact.
inline std::vector<PackingClassification> classify_packing(const HardwareSpec& hw) {
    std::vector<PackingClassification> out;
    for (const auto& [bits, entry] : hw.packing_table) {
        PackingClassification c;
        c.bits = bits;
        c.table_mults = entry.mults_per_dsp;
        c.admitted_mults = admitted_packing_capacity(hw, bits);
        c.fits = c.table_mults <= c.admitted_mults;
        out.push_back(c);
    }
    return out;
}

/// Packs n signed b-bit operands against one signed b-bit weight, performs a
/// single wide multiply with 48-bit accumulation, and recovers the n exact
/// products by per-field signed extraction with borrow compensation.
inline std::vector<std::int64_t> packed_mac_simulate(const std::vector<std::int64_t>& operands,
                                                     std::int64_t weight, int bits,
                                                     const HardwareSpec& hw) {
    if (operands.empty()) throw input_error("packed_mac_simulate: no operands");
    const int n = static_cast<int>(operands.size());
    const PackingEntry& entry = hw.packing(bits);
    const int admitted = admitted_packing_capacity(hw, bits);
    if (n > entry.mults_per_dsp || n > admitted)
        throw capacity_error("packed_mac_simulate: " + std::to_string(n) + " operands exceed " +
                             std::to_string(bits) + "-bit packing capacity (table " +
                             std::to_string(entry.mults_per_dsp) + ", layout " +
                             std::to_string(admitted) + ")");

    const std::int64_t lo = -(std::int64_t(1) << (bits - 1));
    const std::int64_t hi = (std::int64_t(1) << (bits - 1)) - 1;
    if (weight < lo || weight > hi)
        throw input_error("packed_mac_simulate: weight outside signed range");
    for (const auto a : operands)
        if (a < lo || a > hi) throw input_error("packed_mac_simulate: operand outside signed range");

    const int g = packing_stride(bits, n);
    std::int64_t packed = 0;
    for (int i = 0; i < n; ++i) packed += operands[static_cast<std::size_t>(i)] << (i * g);

    const std::int64_t product = packed * weight;  // the one DSP multiply

    // Field extraction: take the signed residue of the low g bits, subtract
    // it out (this is the sign/borrow correction) and shift to the next
    // field. Exact because |a*w| < 2^(g-1) by the guard-bit construction.
    std::vector<std::int64_t> result(static_cast<std::size_t>(n));
    const std::int64_t field = std::int64_t(1) << g;
    const std::int64_t half = std::int64_t(1) << (g - 1);
    std::int64_t rest = product;
    for (int i = 0; i < n; ++i) {
        std::int64_t residue = ((rest % field) + field) % field;
        if (residue >= half) residue -= field;
        result[static_cast<std::size_t>(i)] = residue;
        rest = (rest - residue) / field;
    }
    return result;
}

// ---------------------------------------------------------------------------
// Cost models
// ---------------------------------------------------------------------------

/// Stored size in bytes: width-scaled weight counts times bits, rounded up
/// to whole bytes per layer. Integer arithmetic throughout, so large layer
/// lists accumulate exactly.
inline std::uint64_t model_size_bytes(const std::vector<LayerShape>& layers,
                                      const Configuration& config) {
    if (config.bits.size() != layers.size())
        throw config_error("model_size: configuration does not cover every layer");
    const auto scaled = effective_shapes(layers, config);
    std::uint64_t total = 0;
    for (std::size_t l = 0; l < layers.size(); ++l) {
        const std::uint64_t bit_count =
            scaled[l].weight_count() * static_cast<std::uint64_t>(config.bits[l]);
        total += (bit_count + 7) / 8;
    }
    return total;
}

/// Cycles for one inference. Per layer, the array runs
/// ceil(M'/M) * ceil(N'/(N*p)) invocations (p = packed mults at the layer's
/// bit-width), each invocation streaming out_h*out_w accumulation passes
/// plus an M+N-1 pipeline fill.
inline std::uint64_t latency_cycles(const std::vector<LayerShape>& layers,
                                    const Configuration& config, const HardwareSpec& hw) {
    if (config.bits.size() != layers.size())
        throw config_error("latency: configuration does not cover every layer");
    hw.validate();
    const auto scaled = effective_shapes(layers, config);
    std::uint64_t total = 0;
    for (std::size_t l = 0; l < layers.size(); ++l) {
        const auto& s = scaled[l];
        const std::uint64_t m_prime = static_cast<std::uint64_t>(s.out_channels);
        const std::uint64_t n_prime =
            static_cast<std::uint64_t>(s.kernel_h) * s.kernel_w * s.in_channels;
        const std::uint64_t p = static_cast<std::uint64_t>(hw.packing(config.bits[l]).mults_per_dsp);
        const std::uint64_t row_tiles = (m_prime + hw.rows - 1) / hw.rows;
        const std::uint64_t col_tiles = (n_prime + hw.cols * p - 1) / (hw.cols * p);
        const std::uint64_t passes = static_cast<std::uint64_t>(s.out_h) * s.out_w;
        const std::uint64_t fill = static_cast<std::uint64_t>(hw.rows) + hw.cols - 1;
        total += row_tiles * col_tiles * (passes + fill);
    }
    return total;
}

inline Configuration uniform_configuration(std::size_t layer_count, int bits, double width = 1.0) {
    Configuration c;
    c.bits.assign(layer_count, bits);
    c.widths.assign(layer_count, width);
    return c;
}

/// Latency ratio of a baseline configuration over this one (> 1 means this
/// configuration is faster).
inline double speedup_between(const std::vector<LayerShape>& layers, const Configuration& baseline,
                              const Configuration& config, const HardwareSpec& hw) {
    return static_cast<double>(latency_cycles(layers, baseline, hw)) /
           static_cast<double>(latency_cycles(layers, config, hw));
}

/// Speedup against the unmodified network at uniform baseline bits.
inline double speedup(const std::vector<LayerShape>& layers, const Configuration& config,
                      const HardwareSpec& hw, int baseline_bits = 16) {
    return speedup_between(layers, uniform_configuration(layers.size(), baseline_bits), config, hw);
}

struct CostReport {
    struct PerLayer {
        std::string name;
        int bits = 0;
        double width = 1.0;
        int eff_in_channels = 0;
        int eff_out_channels = 0;
        std::uint64_t weight_count = 0;
        std::uint64_t size_bytes = 0;
        std::uint64_t cycles = 0;
        std::uint64_t macs = 0;
    };

    std::uint64_t model_size_bytes = 0;
    std::uint64_t latency_cycles = 0;
    double latency_ms = 0.0;
    double speedup_vs_baseline = 1.0;
    double energy_proxy = 0.0;      // packed-cycle count, a stated proxy
    double throughput_proxy = 0.0;  // 1 / latency_cycles
    std::vector<PerLayer> per_layer;
    std::vector<PackingClassification> packing_flags;  // rows beyond the exact layout
};

/// Assembles all cost metrics for one configuration. Energy and throughput
/// are explicit cycle-count proxies, not calibrated models.
inline CostReport cost_report(const std::vector<LayerShape>& layers, const Configuration& config,
                              const HardwareSpec& hw, int baseline_bits = 16) {
    CostReport report;
    report.model_size_bytes = model_size_bytes(layers, config);
    report.latency_cycles = latency_cycles(layers, config, hw);
    report.latency_ms =
        hw.clock_mhz > 0.0 ? static_cast<double>(report.latency_cycles) / (hw.clock_mhz * 1e3)
                           : 0.0;
    report.speedup_vs_baseline = speedup(layers, config, hw, baseline_bits);
    report.throughput_proxy = 1.0 / static_cast<double>(report.latency_cycles);

    const auto scaled = effective_shapes(layers, config);
    for (std::size_t l = 0; l < layers.size(); ++l) {
        CostReport::PerLayer pl;
        pl.name = layers[l].name;
        pl.bits = config.bits[l];
        pl.width = config.widths[l];
        pl.eff_in_channels = scaled[l].in_channels;
        pl.eff_out_channels = scaled[l].out_channels;
        pl.weight_count = scaled[l].weight_count();
        pl.size_bytes = (pl.weight_count * static_cast<std::uint64_t>(pl.bits) + 7) / 8;
        Configuration single;
        single.bits = {config.bits[l]};
        single.widths = {1.0};
        pl.cycles = latency_cycles({scaled[l]}, single, hw);
        pl.macs = scaled[l].mac_count();
        report.energy_proxy +=
            static_cast<double>(pl.macs) / hw.packing(config.bits[l]).mults_per_dsp;
        report.per_layer.push_back(std::move(pl));
    }
    for (const auto& c : classify_packing(hw))
        if (!c.fits) report.packing_flags.push_back(c);
    return report;
}

inline void to_json(nlohmann::json& j, const PackingClassification& c) {
    j = nlohmann::json{{"bits", c.bits},
                       {"table_mults", c.table_mults},
                       {"admitted_mults", c.admitted_mults},
                       {"fits", c.fits}};
}

inline void to_json(nlohmann::json& j, const CostReport::PerLayer& p) {
    j = nlohmann::json{{"name", p.name},
                       {"bits", p.bits},
                       {"width", p.width},
                       {"eff_in_channels", p.eff_in_channels},
                       {"eff_out_channels", p.eff_out_channels},
                       {"weight_count", p.weight_count},
                       {"size_bytes", p.size_bytes},
                       {"cycles", p.cycles},
                       {"macs", p.macs}};
}

inline void to_json(nlohmann::json& j, const CostReport& r) {
    j = nlohmann::json{{"schema_version", 1},
                       {"model_size_bytes", r.model_size_bytes},
                       {"latency_cycles", r.latency_cycles},
                       {"latency_ms", r.latency_ms},
                       {"speedup_vs_baseline", r.speedup_vs_baseline},
                       {"energy_proxy", r.energy_proxy},
                       {"throughput_proxy", r.throughput_proxy},
                       {"per_layer", r.per_layer},
                       {"packing_flags", r.packing_flags}};
}

inline void to_json(nlohmann::json& j, const HardwareSpec& hw) {
    nlohmann::json table = nlohmann::json::object();
    for (const auto& [bits, entry] : hw.packing_table)
        table[std::to_string(bits)] = {{"mults_per_dsp", entry.mults_per_dsp},
                                       {"adds_per_dsp", entry.adds_per_dsp}};
    j = nlohmann::json{{"rows", hw.rows},
                       {"cols", hw.cols},
                       {"clock_mhz", hw.clock_mhz},
                       {"packing_table", table}};
}

inline void from_json(const nlohmann::json& j, HardwareSpec& hw) {
    hw = HardwareSpec{};
    hw.rows = j.value("rows", hw.rows);
    hw.cols = j.value("cols", hw.cols);
    hw.clock_mhz = j.value("clock_mhz", hw.clock_mhz);
    if (j.contains("packing_table") && !j.at("packing_table").is_null()) {
        hw.packing_table.clear();
        for (const auto& [key, val] : j.at("packing_table").items()) {
            PackingEntry entry;
            entry.mults_per_dsp = val.at("mults_per_dsp").get<int>();
            entry.adds_per_dsp = val.value("adds_per_dsp", 0);
            hw.packing_table[std::stoi(key)] = entry;
        }
    }
    hw.validate();
}

}  // namespace kmtpe
