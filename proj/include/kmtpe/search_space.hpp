#pragma once

#include <algorithm>
#include <cstdint>
#include <vector>

#include <boost/multiprecision/cpp_int.hpp>

#include "kmtpe/errors.hpp"
#include "kmtpe/layer_shape.hpp"
#include "kmtpe/rng.hpp"
#include "kmtpe/sensitivity_report.hpp"

namespace kmtpe {

using BigCount = boost::multiprecision::cpp_int;

inline const std::vector<int>& full_bit_set() {
    static const std::vector<int> b = {8, 6, 4, 3, 2};
    return b;
}

inline const std::vector<double>& default_width_set() {
    static const std::vector<double> s = {0.75, 0.875, 1.0, 1.125, 1.25};
    return s;
}

/// Joint per-layer bit-width x width-multiplier search space. Immutable
/// after construction; bit candidate sets are kept sorted descending,
/// width sets ascending.
struct SearchSpace {
    std::vector<LayerShape> layers;
    std::vector<std::vector<int>> bit_candidates;
    std::vector<std::vector<double>> width_candidates;

    std::size_t layer_count() const { return layers.size(); }

    void validate() const {
        if (bit_candidates.size() != layers.size() || width_candidates.size() != layers.size())
            throw config_error("search space: candidate lists must cover every layer");
        for (std::size_t l = 0; l < layers.size(); ++l) {
            layers[l].validate();
            if (bit_candidates[l].empty() || width_candidates[l].empty())
                throw config_error("search space: empty candidate set for layer '" +
                                   layers[l].name + "'");
            if (!std::is_sorted(bit_candidates[l].begin(), bit_candidates[l].end(),
                                std::greater<int>()))
                throw config_error("search space: bit candidates must be sorted descending");
            if (!std::is_sorted(width_candidates[l].begin(), width_candidates[l].end()))
                throw config_error("search space: width candidates must be sorted ascending");
            for (int b : bit_candidates[l])
                if (std::find(full_bit_set().begin(), full_bit_set().end(), b) ==
                    full_bit_set().end())
                    throw config_error("search space: bit-width " + std::to_string(b) +
                                       " outside the supported set {8,6,4,3,2}");
        }
    }

    bool contains(const Configuration& c) const {
        if (c.bits.size() != layers.size() || c.widths.size() != layers.size()) return false;
        for (std::size_t l = 0; l < layers.size(); ++l) {
            if (std::find(bit_candidates[l].begin(), bit_candidates[l].end(), c.bits[l]) ==
                bit_candidates[l].end())
                return false;
            if (std::find(width_candidates[l].begin(), width_candidates[l].end(), c.widths[l]) ==
                width_candidates[l].end())
                return false;
        }
        return true;
    }

    int bit_index(std::size_t layer, int bit) const {
        const auto& v = bit_candidates[layer];
        const auto it = std::find(v.begin(), v.end(), bit);
        if (it == v.end()) throw input_error("bit-width not in candidate set");
        return static_cast<int>(it - v.begin());
    }

    int width_index(std::size_t layer, double width) const {
        const auto& v = width_candidates[layer];
        const auto it = std::find(v.begin(), v.end(), width);
        if (it == v.end()) throw input_error("width multiplier not in candidate set");
        return static_cast<int>(it - v.begin());
    }
};

/// Unpruned space: full bit set B and width set S for every layer.
inline SearchSpace full_space(std::vector<LayerShape> layers) {
    SearchSpace space;
    space.bit_candidates.assign(layers.size(), full_bit_set());
    space.width_candidates.assign(layers.size(), default_width_set());
    space.layers = std::move(layers);
    space.validate();
    return space;
}

/// Builds the pruned space from a sensitivity report: layer l draws its bit
/// candidates from subsets[cluster_rank(l)], where rank 0 is the
/// highest-trace cluster, so subsets must be ordered from most to least
/// sensitive. Width candidates are never pruned.
///
/// With exempt_first_last set, the first and last layers keep only the
/// highest bit-width of the full set regardless of their cluster.
inline SearchSpace build_pruned_space(const std::vector<LayerShape>& layers,
                                      const SensitivityReport& report, int cluster_count,
                                      const std::vector<std::vector<int>>& subsets,
                                      bool exempt_first_last = false) {
    if (static_cast<int>(subsets.size()) != cluster_count)
        throw config_error("pruned space: cluster count " + std::to_string(cluster_count) +
                           " != subset count " + std::to_string(subsets.size()));
    for (const auto& s : subsets)
        if (s.empty()) throw config_error("pruned space: empty bit subset");

    SearchSpace space;
    space.layers = layers;
    space.width_candidates.assign(layers.size(), default_width_set());
    space.bit_candidates.resize(layers.size());
    for (std::size_t l = 0; l < layers.size(); ++l) {
        const auto* entry = report.find(layers[l].name);
        if (!entry)
            throw config_error("pruned space: layer '" + layers[l].name +
                               "' missing from sensitivity report");
        int rank = entry->cluster_label;
        // Reports built with fewer clusters than subsets map onto the top
        // subsets; anything beyond the subset list is a config error.
        if (rank >= cluster_count)
            throw config_error("pruned space: cluster label out of range for layer '" +
                               layers[l].name + "'");
        auto bits = subsets[rank];
        std::sort(bits.begin(), bits.end(), std::greater<int>());
        bits.erase(std::unique(bits.begin(), bits.end()), bits.end());
        space.bit_candidates[l] = std::move(bits);
    }
    if (exempt_first_last && !layers.empty()) {
        space.bit_candidates.front() = {full_bit_set().front()};
        space.bit_candidates.back() = {full_bit_set().front()};
    }
    space.validate();
    return space;
}

/// Number of configurations in a space, as an exact big integer (joint
/// spaces overflow 64 bits well before 18 layers).
inline BigCount space_size(const SearchSpace& space) {
    BigCount total = 1;
    for (std::size_t l = 0; l < space.layer_count(); ++l) {
        total *= static_cast<unsigned>(space.bit_candidates[l].size());
        total *= static_cast<unsigned>(space.width_candidates[l].size());
    }
    return total;
}

inline Configuration sample_configuration(const SearchSpace& space, Rng& rng) {
    Configuration c;
    c.bits.resize(space.layer_count());
    c.widths.resize(space.layer_count());
    for (std::size_t l = 0; l < space.layer_count(); ++l) {
        c.bits[l] = space.bit_candidates[l][rng.below(space.bit_candidates[l].size())];
        c.widths[l] = space.width_candidates[l][rng.below(space.width_candidates[l].size())];
    }
    return c;
}

/// n0 configurations, every coordinate uniform over its candidate set.
inline std::vector<Configuration> sample_randomly(const SearchSpace& space, int n0,
                                                  std::uint64_t seed) {
    if (n0 < 1) throw config_error("sample_randomly: n0 must be >= 1");
    space.validate();
    Rng rng(seed);
    std::vector<Configuration> out;
    out.reserve(static_cast<std::size_t>(n0));
    for (int i = 0; i < n0; ++i) out.push_back(sample_configuration(space, rng));
    return out;
}

}  // namespace kmtpe
