#include <algorithm>
#include <map>
#include <vector>

#include <catch2/catch_amalgamated.hpp>

#include "kmtpe/cluster.hpp"
#include "kmtpe/search_space.hpp"

using namespace kmtpe;

namespace {

std::vector<LayerShape> three_dense_layers() {
    return {dense_shape("l0", 8, 8), dense_shape("l1", 8, 8), dense_shape("l2", 8, 4)};
}

SensitivityReport report_from_traces(const std::vector<std::string>& names,
                                     const std::vector<double>& traces, int k) {
    const Clustering c = k_means_and_sort(traces, k);
    SensitivityReport r;
    r.cluster_count = c.cluster_count();
    for (size_t i = 0; i < names.size(); ++i)
        r.layers.push_back({names[i], traces[i], traces[i], c.labels[i]});
    return r;
}

}  // namespace

TEST_CASE("paper subsets assign by cluster rank", "[space]") {
    const auto layers = three_dense_layers();
    const auto report = report_from_traces({"l0", "l1", "l2"}, {9.0, 5.0, 0.5}, 3);
    const std::vector<std::vector<int>> subsets = {{8, 6}, {6, 4, 3}, {4, 3, 2}};
    const SearchSpace space = build_pruned_space(layers, report, 3, subsets);
    CHECK(space.bit_candidates[0] == std::vector<int>{8, 6});
    CHECK(space.bit_candidates[1] == std::vector<int>{6, 4, 3});
    CHECK(space.bit_candidates[2] == std::vector<int>{4, 3, 2});
    for (const auto& w : space.width_candidates) CHECK(w == default_width_set());
}

TEST_CASE("single cluster gives every layer the same subset", "[space]") {
    const auto layers = three_dense_layers();
    const auto report = report_from_traces({"l0", "l1", "l2"}, {1.0, 1.0, 1.0}, 1);
    const SearchSpace space = build_pruned_space(layers, report, 1, {{8}});
    for (const auto& b : space.bit_candidates) CHECK(b == std::vector<int>{8});
}

TEST_CASE("trace gap splits layers across two subsets", "[space]") {
    // 1-D k-means on {10.0, 0.1, 0.1}: the only zero-inertia 2-clustering
    // isolates the 10.0, so layer 0 ranks highest.
    const auto layers = three_dense_layers();
    const auto report = report_from_traces({"l0", "l1", "l2"}, {10.0, 0.1, 0.1}, 2);
    const SearchSpace space = build_pruned_space(layers, report, 2, {{8, 6}, {3, 2}});
    CHECK(space.bit_candidates[0] == std::vector<int>{8, 6});
    CHECK(space.bit_candidates[1] == std::vector<int>{3, 2});
    CHECK(space.bit_candidates[2] == std::vector<int>{3, 2});
}

TEST_CASE("missing layer and subset-count mismatch are config errors", "[space]") {
    const auto layers = three_dense_layers();
    const auto report = report_from_traces({"l0", "l1"}, {2.0, 1.0}, 2);
    CHECK_THROWS_AS(build_pruned_space(layers, report, 2, {{8}, {4}}), config_error);

    const auto full = report_from_traces({"l0", "l1", "l2"}, {3.0, 2.0, 1.0}, 2);
    CHECK_THROWS_AS(build_pruned_space(layers, full, 3, {{8}, {4}}), config_error);
}

TEST_CASE("first/last exemption pins the outer layers to 8 bits", "[space]") {
    const auto layers = three_dense_layers();
    const auto report = report_from_traces({"l0", "l1", "l2"}, {0.1, 5.0, 0.1}, 2);
    const SearchSpace space = build_pruned_space(layers, report, 2, {{8, 6}, {3, 2}}, true);
    CHECK(space.bit_candidates[0] == std::vector<int>{8});
    CHECK(space.bit_candidates[2] == std::vector<int>{8});
    CHECK(space.bit_candidates[1] == std::vector<int>{8, 6});
}

TEST_CASE("space size is an exact product", "[space]") {
    SearchSpace space;
    space.layers = {dense_shape("a", 4, 4), dense_shape("b", 4, 4)};
    space.bit_candidates = {{8, 6}, {3, 2}};
    space.width_candidates.assign(2, default_width_set());
    CHECK(space_size(space) == 100);

    const SearchSpace big = full_space(std::vector<LayerShape>(18, dense_shape("x", 4, 4)));
    CHECK(space_size(big) == BigCount("14551915228366851806640625"));  // 25^18

    SearchSpace pruned = big;
    for (auto& b : pruned.bit_candidates) b = {8, 6};
    CHECK(space_size(pruned) == BigCount("1000000000000000000"));  // 10^18
}

TEST_CASE("pruning never grows the space", "[space]") {
    const auto layers = three_dense_layers();
    const auto report = report_from_traces({"l0", "l1", "l2"}, {9.0, 5.0, 0.5}, 3);
    const SearchSpace pruned =
        build_pruned_space(layers, report, 3, {{8, 6}, {6, 4, 3}, {4, 3, 2}});
    const SearchSpace full = full_space(layers);
    CHECK(space_size(pruned) <= space_size(full));

    const SearchSpace same = build_pruned_space(layers, report, 3,
                                                {full_bit_set(), full_bit_set(), full_bit_set()});
    CHECK(space_size(same) == space_size(full));
}

TEST_CASE("singleton candidate sets sample identically", "[space]") {
    SearchSpace space;
    space.layers = {dense_shape("a", 4, 4)};
    space.bit_candidates = {{4}};
    space.width_candidates = {{1.0}};
    const auto configs = sample_randomly(space, 5, 3);
    for (const auto& c : configs) {
        CHECK(c.bits == std::vector<int>{4});
        CHECK(c.widths == std::vector<double>{1.0});
    }
}

TEST_CASE("sampling is deterministic per seed", "[space]") {
    const SearchSpace space = full_space(three_dense_layers());
    CHECK(sample_randomly(space, 20, 17) == sample_randomly(space, 20, 17));
    CHECK(sample_randomly(space, 20, 17) != sample_randomly(space, 20, 18));
}

TEST_CASE("per-coordinate sampling is uniform", "[space]") {
    SearchSpace space;
    space.layers = {dense_shape("a", 4, 4)};
    space.bit_candidates = {{8, 6}};
    space.width_candidates = {{1.0}};
    const auto configs = sample_randomly(space, 10000, 5);
    long eights = 0;
    for (const auto& c : configs) eights += c.bits[0] == 8;
    const double freq = static_cast<double>(eights) / 10000.0;
    CHECK(freq > 0.48);
    CHECK(freq < 0.52);
}

TEST_CASE("sampled configurations always validate", "[space]") {
    const auto layers = three_dense_layers();
    const auto report = report_from_traces({"l0", "l1", "l2"}, {9.0, 5.0, 0.5}, 2);
    const SearchSpace space = build_pruned_space(layers, report, 2, {{8, 6}, {3, 2}});
    for (const auto& c : sample_randomly(space, 500, 11)) CHECK(space.contains(c));
}

TEST_CASE("pruning is permutation-equivariant", "[space]") {
    auto layers = three_dense_layers();
    const std::vector<double> traces = {9.0, 5.0, 0.5};
    const auto report = report_from_traces({"l0", "l1", "l2"}, traces, 3);
    const std::vector<std::vector<int>> subsets = {{8, 6}, {6, 4, 3}, {4, 3, 2}};
    const SearchSpace base = build_pruned_space(layers, report, 3, subsets);

    const std::vector<size_t> perm = {2, 0, 1};
    std::vector<LayerShape> permuted;
    std::vector<std::string> names;
    std::vector<double> ptraces;
    for (size_t i : perm) {
        permuted.push_back(layers[i]);
        names.push_back(layers[i].name);
        ptraces.push_back(traces[i]);
    }
    const auto preport = report_from_traces(names, ptraces, 3);
    const SearchSpace shuffled = build_pruned_space(permuted, preport, 3, subsets);
    for (size_t i = 0; i < perm.size(); ++i)
        CHECK(shuffled.bit_candidates[i] == base.bit_candidates[perm[i]]);
}
