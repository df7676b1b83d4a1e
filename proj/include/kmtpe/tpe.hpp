#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <numeric>
#include <string>
#include <vector>

#include "kmtpe/cluster.hpp"
#include "kmtpe/errors.hpp"
#include "kmtpe/rng.hpp"
#include "kmtpe/search_space.hpp"

namespace kmtpe {

enum class SurrogateKind { categorical, ordinal_gaussian };

inline std::string to_string(SurrogateKind k) {
    return k == SurrogateKind::categorical ? "categorical" : "ordinal-gaussian";
}

inline SurrogateKind surrogate_kind_from_string(const std::string& s) {
    if (s == "categorical") return SurrogateKind::categorical;
    if (s == "ordinal-gaussian") return SurrogateKind::ordinal_gaussian;
    throw config_error("unknown surrogate kind: " + s);
}

struct TpeParams {
    int n0 = 20;               // random configurations before surrogates
    int n = 100;               // total configurations
    double c0 = 0.25;          // initial cluster fraction, k = ceil(1/c)
    double alpha = 0.98;       // annealing factor, c <- c * alpha
    int maxiters = 100;        // safety cap on surrogate iterations
    int n_ei_candidates = 24;  // samples drawn from l(x) per proposal
    double gamma = 0.25;       // classic-TPE quantile
    int anneal_every = 1;      // iterations between annealing steps
    SurrogateKind surrogate = SurrogateKind::categorical;

    void validate() const {
        // n == n0 is the degenerate pure-random-search case.
        if (n0 < 1 || n < n0) throw config_error("tpe: need n >= n0 >= 1");
        if (!(c0 > 0.0 && c0 <= 1.0)) throw config_error("tpe: need 0 < c0 <= 1");
        if (!(alpha > 0.0 && alpha <= 1.0)) throw config_error("tpe: need 0 < alpha <= 1");
        if (!(gamma > 0.0 && gamma < 1.0)) throw config_error("tpe: need 0 < gamma < 1");
        if (n_ei_candidates < 1) throw config_error("tpe: need n_ei_candidates >= 1");
        if (anneal_every < 1) throw config_error("tpe: need anneal_every >= 1");
        if (maxiters < n - n0)
            throw config_error("tpe: maxiters must cover the n - n0 surrogate iterations");
    }
};

/// Per-dimension distribution over a candidate set; strictly positive and
/// normalized, shared support with its counterpart model by construction.
struct DimDistribution {
    std::vector<double> p;

    double log_p(int index) const { return std::log(p[static_cast<std::size_t>(index)]); }

    int sample(Rng& rng) const {
        const double u = rng.uniform01();
        double acc = 0.0;
        for (std::size_t i = 0; i < p.size(); ++i) {
            acc += p[i];
            if (u < acc) return static_cast<int>(i);
        }
        return static_cast<int>(p.size()) - 1;
    }
};

/// Product-form surrogate: one independent distribution per bit dimension
/// and per width dimension.
struct Surrogate {
    std::vector<DimDistribution> bits;
    std::vector<DimDistribution> widths;
};

namespace detail {

inline DimDistribution fit_categorical(const std::vector<int>& observed_indices,
                                       std::size_t support) {
    // Laplace-smoothed counts: p(v) = (count + 1) / (n + |V|); an empty
    // observation set degrades to the uniform distribution.
    DimDistribution d;
    d.p.assign(support, 1.0);
    for (int idx : observed_indices) d.p[static_cast<std::size_t>(idx)] += 1.0;
    const double total = static_cast<double>(observed_indices.size() + support);
    for (auto& v : d.p) v /= total;
    return d;
}

template <typename Value>
DimDistribution fit_ordinal_gaussian(const std::vector<int>& observed_indices,
                                     const std::vector<Value>& support) {
    DimDistribution d;
    const std::size_t m = support.size();
    if (observed_indices.empty()) {
        d.p.assign(m, 1.0 / static_cast<double>(m));
        return d;
    }
    double mean = 0.0;
    for (int idx : observed_indices) mean += static_cast<double>(support[static_cast<std::size_t>(idx)]);
    mean /= static_cast<double>(observed_indices.size());
    double var = 0.0;
    for (int idx : observed_indices) {
        const double diff = static_cast<double>(support[static_cast<std::size_t>(idx)]) - mean;
        var += diff * diff;
    }
    var /= static_cast<double>(observed_indices.size());
    const double span = static_cast<double>(support.front()) - static_cast<double>(support.back());
    const double floor_sigma = std::max(std::fabs(span) / (2.0 * static_cast<double>(m)), 1e-6);
    const double sigma = std::max(std::sqrt(var), floor_sigma);
    d.p.resize(m);
    double total = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
        const double z = (static_cast<double>(support[i]) - mean) / sigma;
        d.p[i] = std::exp(-0.5 * z * z);
        total += d.p[i];
    }
    for (auto& v : d.p) v /= total;
    return d;
}

}  // namespace detail

/// Fits the per-dimension model on a set of configurations. The default is
/// smoothed categorical fitting; the ordinal-Gaussian mode instead fits a
/// normal over the numeric candidate values, renormalized on the support.
inline Surrogate fit_surrogate(const std::vector<Configuration>& configs, const SearchSpace& space,
                               SurrogateKind kind = SurrogateKind::categorical) {
    const std::size_t L = space.layer_count();
    Surrogate s;
    s.bits.resize(L);
    s.widths.resize(L);
    for (std::size_t l = 0; l < L; ++l) {
        std::vector<int> bit_idx, width_idx;
        bit_idx.reserve(configs.size());
        width_idx.reserve(configs.size());
        for (const auto& c : configs) {
            if (c.bits.size() != L) throw input_error("fit_surrogate: configuration arity mismatch");
            bit_idx.push_back(space.bit_index(l, c.bits[l]));
            width_idx.push_back(space.width_index(l, c.widths[l]));
        }
        if (kind == SurrogateKind::categorical) {
            s.bits[l] = detail::fit_categorical(bit_idx, space.bit_candidates[l].size());
            s.widths[l] = detail::fit_categorical(width_idx, space.width_candidates[l].size());
        } else {
            s.bits[l] = detail::fit_ordinal_gaussian(bit_idx, space.bit_candidates[l]);
            s.widths[l] = detail::fit_ordinal_gaussian(width_idx, space.width_candidates[l]);
        }
    }
    return s;
}

/// Proposes the next configuration: draws n_ei candidates from l(x) and
/// returns the one maximizing sum_d [log l_d - log g_d]. Ties keep the
/// first-drawn candidate, so the call is deterministic given the RNG state.
///
/// The trial history is a set, so candidates the search has already
/// evaluated are skipped in the argmax (a re-evaluation adds nothing and
/// the ratio's mode would otherwise pin the search on the incumbent).
/// When every candidate is already known the best duplicate is returned.
inline Configuration propose(const Surrogate& l_model, const Surrogate& g_model,
                             const SearchSpace& space, int n_ei, Rng& rng,
                             const std::function<bool(const Configuration&)>& already_evaluated =
                                 {}) {
    if (n_ei < 1) throw config_error("propose: need n_ei >= 1");
    const std::size_t L = space.layer_count();
    Configuration best_fresh, best_any;
    double fresh_score = -std::numeric_limits<double>::infinity();
    double any_score = -std::numeric_limits<double>::infinity();
    for (int cand = 0; cand < n_ei; ++cand) {
        Configuration c;
        c.bits.resize(L);
        c.widths.resize(L);
        double score = 0.0;
        for (std::size_t l = 0; l < L; ++l) {
            const int bi = l_model.bits[l].sample(rng);
            const int wi = l_model.widths[l].sample(rng);
            c.bits[l] = space.bit_candidates[l][static_cast<std::size_t>(bi)];
            c.widths[l] = space.width_candidates[l][static_cast<std::size_t>(wi)];
            score += l_model.bits[l].log_p(bi) - g_model.bits[l].log_p(bi);
            score += l_model.widths[l].log_p(wi) - g_model.widths[l].log_p(wi);
        }
        if (score > any_score) {
            any_score = score;
            best_any = c;
        }
        if (score > fresh_score && (!already_evaluated || !already_evaluated(c))) {
            fresh_score = score;
            best_fresh = std::move(c);
        }
    }
    return best_fresh.bits.empty() ? best_any : best_fresh;
}

struct Split {
    std::vector<std::size_t> desirable;
    std::vector<std::size_t> undesirable;
    int k_used = 0;        // clusters actually used (k-means split only)
    double threshold = 0;  // classic split only
};

/// Classic TPE threshold: the (1-gamma) linearly-interpolated quantile of
/// the objectives (maximization); values >= the threshold are desirable.
inline Split classic_threshold(const std::vector<double>& objectives, double gamma) {
    if (objectives.empty()) throw input_error("classic_threshold: empty objectives");
    if (!(gamma > 0.0 && gamma < 1.0)) throw config_error("classic_threshold: need 0 < gamma < 1");
    std::vector<double> sorted = objectives;
    std::sort(sorted.begin(), sorted.end());
    const double pos = (1.0 - gamma) * static_cast<double>(sorted.size() - 1);
    const std::size_t lo = static_cast<std::size_t>(pos);
    const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
    const double frac = pos - static_cast<double>(lo);
    Split split;
    split.threshold = sorted[lo] + frac * (sorted[hi] - sorted[lo]);
    for (std::size_t i = 0; i < objectives.size(); ++i) {
        if (objectives[i] >= split.threshold)
            split.desirable.push_back(i);
        else
            split.undesirable.push_back(i);
    }
    return split;
}

/// Cluster count used by the k-means split at annealing state c: ceil(1/c),
/// clamped to [2, distinct values]; degenerates to 1 on a fully flat
/// history. Non-decreasing over the run because c only shrinks and the
/// distinct count only grows.
inline int kmeans_split_k(double c, std::size_t distinct) {
    const int target = static_cast<int>(std::ceil(1.0 / c - 1e-12));
    if (distinct < 2) return 1;
    return std::clamp(target, 2, static_cast<int>(distinct));
}

/// Dual-threshold split: objectives are clustered (exact 1-D k-means) and
/// only the top cluster feeds l(x), only the bottom cluster feeds g(x);
/// middle clusters are excluded from both.
inline Split kmeans_split(const std::vector<double>& objectives, double c) {
    if (objectives.empty()) throw input_error("kmeans_split: empty objectives");
    std::vector<double> distinct_sorted = objectives;
    std::sort(distinct_sorted.begin(), distinct_sorted.end());
    distinct_sorted.erase(std::unique(distinct_sorted.begin(), distinct_sorted.end()),
                          distinct_sorted.end());
    Split split;
    split.k_used = kmeans_split_k(c, distinct_sorted.size());
    std::vector<std::size_t> indices(objectives.size());
    std::iota(indices.begin(), indices.end(), 0);
    const Clustering clusters = k_means_and_sort(objectives, split.k_used);
    auto [desirable, undesirable] = top_bottom(clusters, indices);
    split.desirable = std::move(desirable);
    split.undesirable = std::move(undesirable);
    return split;
}

}  // namespace kmtpe
