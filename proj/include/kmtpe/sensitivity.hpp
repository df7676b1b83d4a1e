#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "kmtpe/cluster.hpp"
#include "kmtpe/errors.hpp"
#include "kmtpe/rng.hpp"
#include "kmtpe/sensitivity_report.hpp"
#include "kmtpe/tiny_net.hpp"

namespace kmtpe {

/// Hard cap for brute-force per-layer Hessians.
inline constexpr std::size_t kHessianExactMaxDim = 512;

namespace detail {

inline double weight_inf_norm(const std::vector<double>& w) {
    double m = 0.0;
    for (double v : w) m = std::max(m, std::fabs(v));
    return m;
}

// Central-difference step for Hessian-vector products and Hessian columns.
inline double hvp_step(const TinyNet& net, std::size_t layer) {
    return 1e-3 * (1.0 + weight_inf_norm(net.weights[layer]));
}

inline std::vector<double> layer_gradient(const TinyNet& net, std::size_t layer,
                                          const Dataset& batch) {
    return gradient(net, batch)[layer];
}

inline void check_finite(const std::vector<double>& v, const TinyNet& net, std::size_t layer) {
    for (double x : v)
        if (!std::isfinite(x))
            throw numeric_error("non-finite intermediate in layer '" + net.layers[layer].name +
                                "'");
}

}  // namespace detail

/// Hessian-vector product H*v for one layer's weights, by central
/// differences of the gradient. Exact for quadratic losses.
inline std::vector<double> hessian_vector_product(const TinyNet& net, std::size_t layer,
                                                  const Dataset& batch,
                                                  const std::vector<double>& v) {
    const double eps = detail::hvp_step(net, layer);
    TinyNet work = net;
    for (std::size_t j = 0; j < v.size(); ++j) work.weights[layer][j] += eps * v[j];
    const auto g_plus = detail::layer_gradient(work, layer, batch);
    for (std::size_t j = 0; j < v.size(); ++j) work.weights[layer][j] -= 2.0 * eps * v[j];
    const auto g_minus = detail::layer_gradient(work, layer, batch);
    std::vector<double> hv(v.size());
    for (std::size_t j = 0; j < v.size(); ++j) hv[j] = (g_plus[j] - g_minus[j]) / (2.0 * eps);
    detail::check_finite(hv, net, layer);
    return hv;
}

/// Dense symmetric Hessian of the mean loss with respect to one layer's
/// weights (row-major d*d). Built column-by-column from gradient
/// differences, then symmetrized as (A + A^T)/2. Guarded to tiny layers.
inline std::vector<double> hessian_exact(const TinyNet& net, std::size_t layer,
                                         const Dataset& batch) {
    const std::size_t d = net.weights[layer].size();
    if (d > kHessianExactMaxDim)
        throw capacity_error("hessian_exact: layer '" + net.layers[layer].name + "' has " +
                             std::to_string(d) + " weights, exceeds the brute-force cap of " +
                             std::to_string(kHessianExactMaxDim));
    std::vector<double> h(d * d, 0.0);
    std::vector<double> unit(d, 0.0);
    for (std::size_t j = 0; j < d; ++j) {
        unit[j] = 1.0;
        const auto col = hessian_vector_product(net, layer, batch, unit);
        unit[j] = 0.0;
        for (std::size_t i = 0; i < d; ++i) h[i * d + j] = col[i];
    }
    for (std::size_t i = 0; i < d; ++i)
        for (std::size_t j = i + 1; j < d; ++j) {
            const double s = 0.5 * (h[i * d + j] + h[j * d + i]);
            h[i * d + j] = h[j * d + i] = s;
        }
    return h;
}

/// Max asymmetry of the raw (pre-symmetrization) finite-difference Hessian;
/// exposed so tests can bound the numerical error directly.
inline double hessian_asymmetry(const TinyNet& net, std::size_t layer, const Dataset& batch) {
    const std::size_t d = net.weights[layer].size();
    if (d > kHessianExactMaxDim) throw capacity_error("hessian_asymmetry: layer too large");
    std::vector<double> h(d * d, 0.0);
    std::vector<double> unit(d, 0.0);
    for (std::size_t j = 0; j < d; ++j) {
        unit[j] = 1.0;
        const auto col = hessian_vector_product(net, layer, batch, unit);
        unit[j] = 0.0;
        for (std::size_t i = 0; i < d; ++i) h[i * d + j] = col[i];
    }
    double worst = 0.0;
    for (std::size_t i = 0; i < d; ++i)
        for (std::size_t j = 0; j < d; ++j)
            worst = std::max(worst, std::fabs(h[i * d + j] - h[j * d + i]));
    return worst;
}

inline double matrix_trace(const std::vector<double>& h) {
    const std::size_t d = static_cast<std::size_t>(std::llround(std::sqrt(double(h.size()))));
    double t = 0.0;
    for (std::size_t i = 0; i < d; ++i) t += h[i * d + i];
    return t;
}

/// Hutchinson trace estimate (1/probes) * sum v^T H v with Rademacher
/// probes; lower variance than Gaussian probes for trace estimation.
inline double hutchinson_trace(const TinyNet& net, std::size_t layer, const Dataset& batch,
                               int probes, std::uint64_t seed) {
    if (probes < 1) throw config_error("hutchinson_trace: probes must be >= 1");
    const std::size_t d = net.weights[layer].size();
    Rng rng(seed);
    double acc = 0.0;
    std::vector<double> v(d);
    for (int p = 0; p < probes; ++p) {
        for (auto& x : v) x = static_cast<double>(rng.rademacher());
        const auto hv = hessian_vector_product(net, layer, batch, v);
        double quad = 0.0;
        for (std::size_t j = 0; j < d; ++j) quad += v[j] * hv[j];
        if (!std::isfinite(quad))
            throw numeric_error("hutchinson_trace: non-finite probe in layer '" +
                                net.layers[layer].name + "'");
        acc += quad;
    }
    return acc / static_cast<double>(probes);
}

/// Gauss-Newton curvature J^T H_out J averaged over the batch, a positive
/// semidefinite stand-in for the Hessian on trained nonlinear nets.
/// Jacobians come from central differences of the network output.
inline std::vector<double> gauss_newton_matrix(const TinyNet& net, std::size_t layer,
                                               const Dataset& batch) {
    const std::size_t d = net.weights[layer].size();
    if (d > kHessianExactMaxDim) throw capacity_error("gauss_newton_matrix: layer too large");
    const std::size_t out_dim = net.output_size();
    const double eps = detail::hvp_step(net, layer);
    const double inv_n = 1.0 / static_cast<double>(batch.size());

    std::vector<double> gn(d * d, 0.0);
    TinyNet work = net;
    std::vector<std::vector<double>> jac(out_dim, std::vector<double>(d));
    for (std::size_t i = 0; i < batch.size(); ++i) {
        for (std::size_t j = 0; j < d; ++j) {
            work.weights[layer][j] = net.weights[layer][j] + eps;
            const auto out_plus = forward(work, batch.x[i]);
            work.weights[layer][j] = net.weights[layer][j] - eps;
            const auto out_minus = forward(work, batch.x[i]);
            work.weights[layer][j] = net.weights[layer][j];
            for (std::size_t o = 0; o < out_dim; ++o)
                jac[o][j] = (out_plus[o] - out_minus[o]) / (2.0 * eps);
        }
        // Loss curvature at the output: 2I for summed squared error,
        // diag(p) - p p^T for softmax cross-entropy.
        if (net.loss == Loss::mse) {
            for (std::size_t o = 0; o < out_dim; ++o)
                for (std::size_t a = 0; a < d; ++a)
                    for (std::size_t b = 0; b < d; ++b)
                        gn[a * d + b] += inv_n * 2.0 * jac[o][a] * jac[o][b];
        } else {
            const auto p = detail::softmax(forward(net, batch.x[i]));
            std::vector<double> pj(d, 0.0);  // (p^T J)
            for (std::size_t o = 0; o < out_dim; ++o)
                for (std::size_t a = 0; a < d; ++a) pj[a] += p[o] * jac[o][a];
            for (std::size_t o = 0; o < out_dim; ++o)
                for (std::size_t a = 0; a < d; ++a)
                    for (std::size_t b = 0; b < d; ++b)
                        gn[a * d + b] += inv_n * p[o] * jac[o][a] * jac[o][b];
            for (std::size_t a = 0; a < d; ++a)
                for (std::size_t b = 0; b < d; ++b) gn[a * d + b] -= inv_n * pj[a] * pj[b];
        }
    }
    return gn;
}

enum class CurvatureKind { exact, gauss_newton };

struct CurvatureBoundResult {
    bool applicable = true;  // false when Tr(H) <= 0
    double trace = 0.0;
    double max_ratio = 0.0;  // max over trials of q / (Tr(H)/2)
    long violations = 0;     // count of q > (Tr(H)/2) * (1 + 1e-9)
};

/// Checks the curvature bound q = (1/2) dw^T H dw <= (1/2) Tr(H) on random
/// unit-norm perturbations, against an explicit symmetric matrix
/// (d*d row-major).
inline CurvatureBoundResult curvature_bound_check_matrix(const std::vector<double>& h, long trials,
                                        std::uint64_t seed) {
    const std::size_t d = static_cast<std::size_t>(std::llround(std::sqrt(double(h.size()))));
    CurvatureBoundResult res;
    res.trace = matrix_trace(h);
    if (res.trace <= 0.0) {
        res.applicable = false;
        return res;
    }
    const double bound = 0.5 * res.trace;
    Rng rng(seed);
    std::vector<double> dw(d), hdw(d);
    for (long t = 0; t < trials; ++t) {
        double norm_sq = 0.0;
        for (auto& x : dw) {
            x = rng.normal();
            norm_sq += x * x;
        }
        const double inv_norm = 1.0 / std::sqrt(norm_sq);
        for (auto& x : dw) x *= inv_norm;
        for (std::size_t i = 0; i < d; ++i) {
            double acc = 0.0;
            const double* row = h.data() + i * d;
            for (std::size_t j = 0; j < d; ++j) acc += row[j] * dw[j];
            hdw[i] = acc;
        }
        double q = 0.0;
        for (std::size_t i = 0; i < d; ++i) q += dw[i] * hdw[i];
        q *= 0.5;
        res.max_ratio = std::max(res.max_ratio, q / bound);
        if (q > bound * (1.0 + 1e-9)) ++res.violations;
    }
    return res;
}

/// Same check with the matrix taken from the net itself. The bound holds
/// whenever the curvature is positive semidefinite, so callers pick a
/// setting where that is guaranteed: the exact Hessian on linear + MSE, or
/// the Gauss-Newton surrogate on trained nonlinear nets.
inline CurvatureBoundResult curvature_bound_check(const TinyNet& net, std::size_t layer, const Dataset& batch,
                                 long trials, std::uint64_t seed,
                                 CurvatureKind kind = CurvatureKind::exact) {
    const auto h = kind == CurvatureKind::exact ? hessian_exact(net, layer, batch)
                                                : gauss_newton_matrix(net, layer, batch);
    return curvature_bound_check_matrix(h, trials, seed);
}

struct SensitivityOptions {
    TraceEstimator estimator = TraceEstimator::hutchinson;
    int probes = 100;
    std::size_t max_samples = 512;
    std::uint64_t seed = 0;
};

/// Clusters per-layer normalized traces and ranks clusters by non-increasing
/// centroid (label 0 = most sensitive). Split out from analyze_hessian so
/// the ranking logic can be exercised on hand-picked trace values.
inline SensitivityReport build_sensitivity_report(const std::vector<std::string>& names,
                                                  const std::vector<double>& raw_traces,
                                                  const std::vector<std::uint64_t>& weight_counts,
                                                  int k, TraceEstimator estimator,
                                                  int probe_count) {
    if (names.size() != raw_traces.size() || names.size() != weight_counts.size())
        throw input_error("sensitivity report: array length mismatch");
    if (k < 1 || static_cast<std::size_t>(k) > names.size())
        throw config_error("sensitivity: cluster count must be in [1, layer count]");
    SensitivityReport report;
    report.estimator = estimator;
    report.probe_count = probe_count;
    std::vector<double> normalized(names.size());
    for (std::size_t l = 0; l < names.size(); ++l)
        normalized[l] = raw_traces[l] / static_cast<double>(weight_counts[l]);
    const Clustering clusters = k_means_and_sort(normalized, k);
    report.cluster_count = clusters.cluster_count();
    for (std::size_t l = 0; l < names.size(); ++l)
        report.layers.push_back({names[l], raw_traces[l], normalized[l], clusters.labels[l]});
    return report;
}

/// Full pipeline: estimate every layer's Hessian trace on (a slice of) the
/// dataset, normalize by weight count and cluster into k sensitivity tiers.
inline SensitivityReport analyze_hessian(const TinyNet& net, const Dataset& data, int k,
                                         const SensitivityOptions& opts = {}) {
    if (k < 1 || static_cast<std::size_t>(k) > net.layer_count())
        throw config_error("analyze_hessian: k must be in [1, layer count]");
    Dataset batch;
    const std::size_t n = std::min(opts.max_samples, data.size());
    if (n == 0) throw input_error("analyze_hessian: empty dataset");
    batch.x.assign(data.x.begin(), data.x.begin() + n);
    if (!data.labels.empty()) batch.labels.assign(data.labels.begin(), data.labels.begin() + n);
    if (!data.targets.empty())
        batch.targets.assign(data.targets.begin(), data.targets.begin() + n);

    std::vector<std::string> names;
    std::vector<double> traces;
    std::vector<std::uint64_t> counts;
    for (std::size_t l = 0; l < net.layer_count(); ++l) {
        names.push_back(net.layers[l].name);
        counts.push_back(net.layers[l].weight_count());
        if (opts.estimator == TraceEstimator::exact)
            traces.push_back(matrix_trace(hessian_exact(net, l, batch)));
        else
            traces.push_back(
                hutchinson_trace(net, l, batch, opts.probes, derive_seed(opts.seed, l)));
    }
    return build_sensitivity_report(names, traces, counts, k, opts.estimator, opts.probes);
}

}  // namespace kmtpe
