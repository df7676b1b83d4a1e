#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "kmtpe/errors.hpp"
#include "kmtpe/rng.hpp"
#include "kmtpe/search_space.hpp"

namespace kmtpe {

enum class BenchKind { plateau_grid, deceptive_flat, quadratic_mixed };

inline std::string to_string(BenchKind k) {
    switch (k) {
        case BenchKind::plateau_grid: return "plateau_grid";
        case BenchKind::deceptive_flat: return "deceptive_flat";
        default: return "quadratic_mixed";
    }
}

inline BenchKind bench_kind_from_string(const std::string& s) {
    if (s == "plateau_grid") return BenchKind::plateau_grid;
    if (s == "deceptive_flat") return BenchKind::deceptive_flat;
    if (s == "quadratic_mixed") return BenchKind::quadratic_mixed;
    throw config_error("unknown benchmark objective: " + s);
}

/// Analytic black-box objectives over a synthetic joint search space
/// (`dims` layers, so 2*dims categorical coordinates with 5 levels each).
/// Values are deterministic per seed with a known optimum, which makes
/// evaluations free and convergence measurable.
///
/// plateau_grid is the flat-landscape stressor: a mid-valued plateau covers
/// roughly flat_fraction of the grid, scattered low-valued cells cover most
/// of the rest, and a small graded basin rises to the single optimal cell.
/// A quantile threshold tends to land inside the plateau tie and dilute the
/// "desirable" model, while value clustering isolates the basin.
class BenchObjective {
public:
    BenchObjective(BenchKind kind, int dims, double flat_fraction, std::uint64_t seed)
        : kind_(kind), dims_(dims), flat_fraction_(flat_fraction), seed_(seed) {
        if (dims < 1 || dims > 8) throw config_error("bench: dims must be in [1, 8]");
        if (!(flat_fraction > 0.0 && flat_fraction < 0.9))
            throw config_error("bench: flat_fraction must be in (0, 0.9)");
        std::vector<LayerShape> layers;
        for (int i = 0; i < dims; ++i)
            layers.push_back(dense_shape("x" + std::to_string(i), 4, 4));
        space_ = full_space(std::move(layers));

        Rng rng(derive_seed(seed, 0xbe4c));
        const int coords = 2 * dims;
        target_.resize(static_cast<std::size_t>(coords));
        for (auto& t : target_) {
            t = static_cast<int>(rng.below(5));
            if (kind == BenchKind::deceptive_flat && t == 2) t = rng.next_u64() & 1 ? 1 : 3;
        }
        if (kind == BenchKind::quadratic_mixed) {
            weights_.resize(static_cast<std::size_t>(coords));
            for (auto& w : weights_) w = 0.5 + rng.uniform01();
            quad_norm_ = 0.0;
            for (int j = 0; j < coords; ++j)
                quad_norm_ += weights_[static_cast<std::size_t>(j)] *
                              static_cast<double>(max_coord_dist(j) * max_coord_dist(j));
        }
        if (kind != BenchKind::quadratic_mixed) build_distance_bands();
    }

    const SearchSpace& space() const { return space_; }
    BenchKind kind() const { return kind_; }
    double optimum_value() const { return 1.0; }

    Configuration optimum_config() const {
        Configuration c;
        for (int l = 0; l < dims_; ++l) {
            c.bits.push_back(space_.bit_candidates[static_cast<std::size_t>(l)]
                                                  [static_cast<std::size_t>(coord(2 * l))]);
            c.widths.push_back(space_.width_candidates[static_cast<std::size_t>(l)]
                                                      [static_cast<std::size_t>(coord(2 * l + 1))]);
        }
        return c;
    }

    double value(const Configuration& config) const {
        const auto u = to_indices(config);
        switch (kind_) {
            case BenchKind::quadratic_mixed: {
                double s = 0.0;
                for (std::size_t j = 0; j < u.size(); ++j) {
                    const double d = static_cast<double>(u[j] - target_[j]);
                    s += weights_[j] * d * d;
                }
                return 1.0 - s / quad_norm_;
            }
            case BenchKind::plateau_grid: {
                const int dist = l1_distance(u, target_);
                if (dist == 0) return 1.0;
                if (dist == 1) return 0.992;  // the optimum sits on a small flat top
                if (dist == 2) return 0.96;
                if (dist == 3) return 0.93;
                if (dist <= good_radius_) return 0.9;  // tied shelf around the basin
                if (dist <= plateau_radius_) return plateau_value_;
                // Scattered sub-plateau noise, decoupled from position.
                const double jitter = cell_hash01(u);
                return 0.10 + 0.25 * jitter;
            }
            default: {  // deceptive_flat
                const int dist_true = l1_distance(u, target_);
                if (dist_true == 0) return 1.0;
                if (dist_true <= 2) return 0.9 - 0.03 * dist_true;
                std::vector<int> mirror(target_.size());
                for (std::size_t j = 0; j < target_.size(); ++j) mirror[j] = 4 - target_[j];
                const int dist_false = l1_distance(u, mirror);
                if (dist_false <= plateau_radius_) return plateau_value_;
                return 0.10 + 0.20 * (1.0 - static_cast<double>(dist_false) / 24.0);
            }
        }
    }

    /// Exact share of grid cells on the tied plateau (from the distance
    /// distribution, not sampling).
    double plateau_share() const {
        if (kind_ == BenchKind::quadratic_mixed) return 0.0;
        std::uint64_t cells = 0;
        const int lo = kind_ == BenchKind::plateau_grid ? good_radius_ + 1 : 0;
        for (int s = lo; s <= plateau_radius_ && s < static_cast<int>(dist_counts_.size()); ++s)
            cells += dist_counts_[static_cast<std::size_t>(s)];
        return static_cast<double>(cells) / static_cast<double>(grid_cells());
    }

    std::uint64_t grid_cells() const {
        std::uint64_t n = 1;
        for (int j = 0; j < 2 * dims_; ++j) n *= 5;
        return n;
    }

    std::vector<int> to_indices(const Configuration& config) const {
        if (config.bits.size() != static_cast<std::size_t>(dims_))
            throw input_error("bench: configuration arity mismatch");
        std::vector<int> u(static_cast<std::size_t>(2 * dims_));
        for (int l = 0; l < dims_; ++l) {
            u[static_cast<std::size_t>(2 * l)] =
                space_.bit_index(static_cast<std::size_t>(l), config.bits[static_cast<std::size_t>(l)]);
            u[static_cast<std::size_t>(2 * l + 1)] = space_.width_index(
                static_cast<std::size_t>(l), config.widths[static_cast<std::size_t>(l)]);
        }
        return u;
    }

private:
    int coord(int j) const { return target_[static_cast<std::size_t>(j)]; }

    int max_coord_dist(int j) const {
        return std::max(target_[static_cast<std::size_t>(j)], 4 - target_[static_cast<std::size_t>(j)]);
    }

    static int l1_distance(const std::vector<int>& a, const std::vector<int>& b) {
        int d = 0;
        for (std::size_t j = 0; j < a.size(); ++j) d += std::abs(a[j] - b[j]);
        return d;
    }

    double cell_hash01(const std::vector<int>& u) const {
        std::uint64_t h = derive_seed(seed_, 0xce11);
        for (int v : u) h = splitmix64(h ^ static_cast<std::uint64_t>(v + 1));
        return static_cast<double>(h >> 11) * 0x1.0p-53;
    }

    void build_distance_bands() {
        // Exact counts of grid cells per L1 distance from the target, by
        // convolving the per-coordinate distance histograms.
        dist_counts_.assign(1, 1);
        for (int j = 0; j < 2 * dims_; ++j) {
            std::vector<std::uint64_t> coord_hist(static_cast<std::size_t>(max_coord_dist(j)) + 1, 0);
            for (int v = 0; v <= 4; ++v)
                ++coord_hist[static_cast<std::size_t>(std::abs(v - target_[static_cast<std::size_t>(j)]))];
            std::vector<std::uint64_t> next(dist_counts_.size() + coord_hist.size() - 1, 0);
            for (std::size_t a = 0; a < dist_counts_.size(); ++a)
                for (std::size_t b = 0; b < coord_hist.size(); ++b)
                    next[a + b] += dist_counts_[a] * coord_hist[b];
            dist_counts_ = std::move(next);
        }

        const double total = static_cast<double>(grid_cells());
        std::uint64_t acc = 0;
        // Good basin: the smallest radius covering ~5% of the grid, but at
        // least the 3-ball so the tied shelf is non-trivial.
        good_radius_ = 3;
        for (std::size_t s = 0; s < dist_counts_.size(); ++s) {
            acc += dist_counts_[s];
            if (static_cast<double>(acc) / total >= 0.05) {
                good_radius_ = std::max<int>(3, static_cast<int>(s));
                break;
            }
        }
        // Plateau: extends until it owns ~flat_fraction of the grid.
        acc = 0;
        plateau_radius_ = good_radius_ + 1;
        const int start = kind_ == BenchKind::plateau_grid ? good_radius_ + 1 : 0;
        for (std::size_t s = static_cast<std::size_t>(start); s < dist_counts_.size(); ++s) {
            acc += dist_counts_[s];
            plateau_radius_ = static_cast<int>(s);
            if (static_cast<double>(acc) / total >= flat_fraction_) break;
        }
        // The basin shelf must sit strictly above the plateau value.
        plateau_value_ = kind_ == BenchKind::plateau_grid ? 0.45 : 0.85;
    }

    BenchKind kind_;
    int dims_;
    double flat_fraction_;
    std::uint64_t seed_;
    SearchSpace space_;
    std::vector<int> target_;
    std::vector<double> weights_;
    double quad_norm_ = 1.0;
    std::vector<std::uint64_t> dist_counts_;
    int good_radius_ = 2;
    int plateau_radius_ = 3;
    double plateau_value_ = 0.45;
};

}  // namespace kmtpe
