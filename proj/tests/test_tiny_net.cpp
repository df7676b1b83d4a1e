#include <cmath>
#include <vector>

#include <catch2/catch_amalgamated.hpp>

#include "kmtpe/rng.hpp"
#include "kmtpe/tiny_net.hpp"

using namespace kmtpe;

namespace {

// Finite-difference oracle for the mean-loss gradient.
std::vector<std::vector<double>> fd_gradient(const TinyNet& net, const Dataset& data, double h) {
    std::vector<std::vector<double>> g(net.layer_count());
    TinyNet work = net;
    for (size_t l = 0; l < net.layer_count(); ++l) {
        g[l].resize(net.weights[l].size());
        for (size_t j = 0; j < net.weights[l].size(); ++j) {
            work.weights[l][j] = net.weights[l][j] + h;
            const double up = loss_value(work, data);
            work.weights[l][j] = net.weights[l][j] - h;
            const double down = loss_value(work, data);
            work.weights[l][j] = net.weights[l][j];
            g[l][j] = (up - down) / (2.0 * h);
        }
    }
    return g;
}

Dataset regression_data(const TinyNet& net, size_t n, std::uint64_t seed) {
    Rng rng(seed);
    Dataset d;
    for (size_t i = 0; i < n; ++i) {
        std::vector<double> x(net.input_size());
        for (auto& v : x) v = rng.normal();
        std::vector<double> y(net.output_size());
        for (auto& v : y) v = rng.normal();
        d.x.push_back(std::move(x));
        d.targets.push_back(std::move(y));
    }
    return d;
}

}  // namespace

TEST_CASE("zero-weight net at zero targets has zero gradient", "[net]") {
    TinyNet net = make_mlp(3, {}, 2, Loss::mse);
    Dataset d;
    d.x = {{1.0, -2.0, 0.5}, {0.2, 0.1, -1.0}};
    d.targets = {{0.0, 0.0}, {0.0, 0.0}};
    const auto g = gradient(net, d);
    for (const auto& layer : g)
        for (double v : layer) CHECK(v == 0.0);
}

TEST_CASE("one-parameter model matches the closed form", "[net]") {
    TinyNet net = make_mlp(1, {}, 1, Loss::mse);
    net.weights[0][0] = 0.7;
    Dataset d;
    d.x = {{2.0}, {-1.0}, {0.5}};
    d.targets = {{1.0}, {0.3}, {-0.2}};
    double expected = 0.0;
    for (size_t i = 0; i < d.size(); ++i)
        expected += 2.0 * d.x[i][0] * (0.7 * d.x[i][0] - d.targets[i][0]) / 3.0;
    const auto g = gradient(net, d);
    CHECK(g[0][0] == Catch::Approx(expected).epsilon(1e-12));
}

TEST_CASE("backprop matches finite differences on a 2-8-2 net", "[net]") {
    TinyNet net = make_mlp(2, {8}, 2, Loss::mse);
    Rng rng(101);
    init_weights(net, rng);
    const Dataset d = regression_data(net, 16, 7);

    const auto g = gradient(net, d);
    const auto fd = fd_gradient(net, d, 1e-4);
    double worst = 0.0;
    for (size_t l = 0; l < g.size(); ++l)
        for (size_t j = 0; j < g[l].size(); ++j)
            worst = std::max(worst, std::fabs(g[l][j] - fd[l][j]));
    CHECK(worst < 1e-5);
}

TEST_CASE("backprop matches finite differences with cross-entropy", "[net]") {
    TinyNet net = make_mlp(3, {6}, 3, Loss::cross_entropy);
    Rng rng(55);
    init_weights(net, rng);
    Dataset d;
    for (int i = 0; i < 12; ++i) {
        std::vector<double> x(3);
        for (auto& v : x) v = rng.normal();
        d.x.push_back(x);
        d.labels.push_back(i % 3);
    }
    const auto g = gradient(net, d);
    const auto fd = fd_gradient(net, d, 1e-5);
    for (size_t l = 0; l < g.size(); ++l)
        for (size_t j = 0; j < g[l].size(); ++j)
            CHECK(g[l][j] == Catch::Approx(fd[l][j]).margin(1e-5));
}

TEST_CASE("conv gradients match finite differences", "[net]") {
    TinyNet net;
    net.loss = Loss::mse;
    net.layers = {conv_shape("c0", 2, 3, 3, 4), dense_shape("d0", 3 * 4 * 4, 2)};
    net.in_h = {6, 1};
    net.in_w = {6, 1};
    net.weights = {std::vector<double>(net.layers[0].weight_count()),
                   std::vector<double>(net.layers[1].weight_count())};
    Rng rng(17);
    init_weights(net, rng);
    net.validate();

    const Dataset d = regression_data(net, 4, 23);
    const auto g = gradient(net, d);
    const auto fd = fd_gradient(net, d, 1e-4);
    for (size_t l = 0; l < g.size(); ++l)
        for (size_t j = 0; j < g[l].size(); ++j)
            CHECK(g[l][j] == Catch::Approx(fd[l][j]).margin(1e-5));
}

TEST_CASE("training reduces the loss and stays finite", "[net]") {
    TinyNet net = make_mlp(2, {8}, 2, Loss::cross_entropy);
    Rng rng(5);
    init_weights(net, rng);
    Dataset d;
    Rng data_rng(9);
    for (int i = 0; i < 64; ++i) {
        const int label = i % 2;
        d.x.push_back({data_rng.normal() + (label ? 2.0 : -2.0), data_rng.normal()});
        d.labels.push_back(label);
    }
    const double before = loss_value(net, d);
    Rng train_rng(1);
    REQUIRE(train_sgd(net, d, 20, 0.1, 16, train_rng));
    CHECK(loss_value(net, d) < before);
    CHECK(accuracy(net, d) > 0.9);
}

TEST_CASE("quantized forward shares one bit-width per layer", "[net]") {
    TinyNet net = make_mlp(2, {}, 1, Loss::mse);
    net.weights[0] = {0.31, -0.87};
    const std::vector<double> x = {0.9, 0.33};

    QuantPlan plan;
    plan.bits = {2};
    const auto out = forward(net, x, plan);
    // Both the weights and the input must pass through the 2-bit quantizer.
    const auto qw = quantize_tensor(net.weights[0], 2);
    const auto qx = quantize_tensor(x, 2);
    CHECK(out[0] == Catch::Approx(qw[0] * qx[0] + qw[1] * qx[1]));
    CHECK(out[0] != Catch::Approx(qw[0] * x[0] + qw[1] * x[1]));
}

TEST_CASE("checkpoint JSON round-trips bit-exactly", "[net]") {
    TinyNet net = make_mlp(4, {5, 3}, 2, Loss::cross_entropy);
    Rng rng(8);
    init_weights(net, rng);
    nlohmann::json j;
    to_json(j, net);
    const std::string text = j.dump();
    TinyNet restored;
    from_json(nlohmann::json::parse(text), restored);
    CHECK(restored.weights == net.weights);
    CHECK(restored.loss == net.loss);
    CHECK(restored.layer_count() == net.layer_count());
}
