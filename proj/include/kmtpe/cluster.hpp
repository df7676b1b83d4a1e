#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numeric>
#include <vector>

#include "kmtpe/errors.hpp"

namespace kmtpe {

/// Result of 1-D k-means. Centroids are sorted non-increasing and labels
/// index into that order, so label 0 is always the highest-value cluster
/// (C1) and label k-1 the lowest (Ck).
struct Clustering {
    std::vector<int> labels;        // per input point
    std::vector<double> centroids;  // non-increasing
    double inertia = 0.0;           // within-cluster sum of squares

    int cluster_count() const { return static_cast<int>(centroids.size()); }
};

namespace detail {

// Within-segment sum of squared deviations for sorted[i..j] (inclusive),
// from prefix sums: sum(x^2) - sum(x)^2 / len.
struct SegmentCost {
    std::vector<double> prefix;
    std::vector<double> prefix_sq;

    explicit SegmentCost(const std::vector<double>& sorted)
        : prefix(sorted.size() + 1, 0.0), prefix_sq(sorted.size() + 1, 0.0) {
        for (std::size_t i = 0; i < sorted.size(); ++i) {
            prefix[i + 1] = prefix[i] + sorted[i];
            prefix_sq[i + 1] = prefix_sq[i] + sorted[i] * sorted[i];
        }
    }

    double operator()(std::size_t i, std::size_t j) const {
        const double n = static_cast<double>(j - i + 1);
        const double s = prefix[j + 1] - prefix[i];
        const double sq = prefix_sq[j + 1] - prefix_sq[i];
        const double c = sq - s * s / n;
        return c > 0.0 ? c : 0.0;  // clamp tiny negative rounding residue
    }
};

}  // namespace detail

/// Exact 1-D k-means. Optimal clusters of sorted values are contiguous, so
/// dynamic programming over sorted order (O(k n^2) with prefix sums) finds
/// the global optimum; no initialization nondeterminism.
///
/// k is clamped to the number of distinct values. Cost ties are broken by
/// placing the boundary point in the higher-centroid cluster.
inline Clustering k_means_and_sort(const std::vector<double>& values, int k) {
    if (values.empty()) throw input_error("k_means_and_sort: empty input");
    if (k < 1) throw input_error("k_means_and_sort: k must be >= 1");

    const std::size_t n = values.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });

    std::vector<double> sorted(n);
    for (std::size_t i = 0; i < n; ++i) sorted[i] = values[order[i]];

    std::size_t distinct = 1;
    for (std::size_t i = 1; i < n; ++i)
        if (sorted[i] != sorted[i - 1]) ++distinct;
    const std::size_t kk = std::min<std::size_t>(static_cast<std::size_t>(k), distinct);

    detail::SegmentCost cost(sorted);

    constexpr double kInf = std::numeric_limits<double>::infinity();
    // dp[m][i]: best cost of clustering sorted[0..i-1] into m clusters.
    std::vector<std::vector<double>> dp(kk + 1, std::vector<double>(n + 1, kInf));
    std::vector<std::vector<std::size_t>> split(kk + 1, std::vector<std::size_t>(n + 1, 0));
    dp[0][0] = 0.0;
    for (std::size_t m = 1; m <= kk; ++m) {
        for (std::size_t i = m; i <= n; ++i) {
            // Last cluster is sorted[j..i-1]; scanning j upward and keeping
            // the first minimum yields the widest top segment, which sends
            // boundary ties to the higher cluster. Costs equal up to float
            // rounding count as ties.
            for (std::size_t j = m - 1; j < i; ++j) {
                if (dp[m - 1][j] == kInf) continue;
                const double c = dp[m - 1][j] + cost(j, i - 1);
                const double tol = 1e-12 * (std::fabs(c) + std::fabs(dp[m][i] == kInf ? 0.0 : dp[m][i]));
                if (c < dp[m][i] - tol) {
                    dp[m][i] = c;
                    split[m][i] = j;
                }
            }
        }
    }

    // Recover segment boundaries in ascending-value order.
    std::vector<std::size_t> bounds(kk + 1, 0);
    bounds[kk] = n;
    for (std::size_t m = kk; m >= 1; --m) bounds[m - 1] = split[m][bounds[m]];

    Clustering out;
    out.inertia = dp[kk][n];
    out.centroids.resize(kk);
    out.labels.assign(n, -1);
    for (std::size_t seg = 0; seg < kk; ++seg) {
        const std::size_t lo = bounds[seg], hi = bounds[seg + 1];
        double mean = 0.0;
        for (std::size_t i = lo; i < hi; ++i) mean += sorted[i];
        mean /= static_cast<double>(hi - lo);
        // Ascending segment `seg` is cluster rank kk-1-seg (C1 = rightmost).
        const int label = static_cast<int>(kk - 1 - seg);
        out.centroids[label] = mean;
        for (std::size_t i = lo; i < hi; ++i) out.labels[order[i]] = label;
    }
    return out;
}

/// Splits items by cluster membership: items whose value landed in C1 are
/// desirable, items in Ck undesirable, middle clusters in neither. With a
/// single (degenerate) cluster everything is desirable and nothing is
/// undesirable, which is the flat-landscape fallback the surrogate layer
/// relies on.
template <typename T>
std::pair<std::vector<T>, std::vector<T>> top_bottom(const Clustering& clustering,
                                                     const std::vector<T>& items) {
    if (clustering.labels.size() != items.size())
        throw input_error("top_bottom: items/labels size mismatch");
    std::vector<T> desirable;
    std::vector<T> undesirable;
    const int k = clustering.cluster_count();
    for (std::size_t i = 0; i < items.size(); ++i) {
        const int label = clustering.labels[i];
        if (label == 0) desirable.push_back(items[i]);
        if (k > 1 && label == k - 1) undesirable.push_back(items[i]);
    }
    return {std::move(desirable), std::move(undesirable)};
}

}  // namespace kmtpe
