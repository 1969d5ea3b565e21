#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>

#include "oatlab/checkpoint.hpp"
#include "oatlab/nnet.hpp"

using namespace oatlab;

namespace {

template <typename T>
Tensor<T> random_tensor(std::mt19937& gen, std::vector<std::size_t> shape, T range) {
    Tensor<T> t(std::move(shape));
    for (T& v : t.values()) {
        v = range * (T(2) * T(gen()) / T(std::mt19937::max()) - T(1));
    }
    return t;
}

Tensor<double> one_hot_rows(std::mt19937& gen, std::size_t rows, std::size_t cols) {
    Tensor<double> t({rows, cols});
    for (std::size_t i = 0; i < rows; ++i) {
        t.at(i, gen() % cols) = 1.0;
    }
    return t;
}

/// Test-local finite-difference oracle: central differences of the scalar
/// cross-entropy against the analytic gradients from backward().
double fd_max_rel_error(Network<double> net, const Tensor<double>& x,
                        const Tensor<double>& y, double h) {
    auto [out, tape] = forward(net, x);
    const auto analytic = backward(net, tape, cross_entropy_loss(out, y).grad_logits);
    double worst = 0.0;
    auto probe = [&](Tensor<double>& param, const Tensor<double>& grad) {
        for (std::size_t i = 0; i < param.size(); ++i) {
            const double saved = param.values()[i];
            param.values()[i] = saved + h;
            const double up =
                double(cross_entropy_loss(forward_output(net, x), y).loss);
            param.values()[i] = saved - h;
            const double down =
                double(cross_entropy_loss(forward_output(net, x), y).loss);
            param.values()[i] = saved;
            const double numeric = (up - down) / (2.0 * h);
            const double a = grad.values()[i];
            const double denom = std::max({std::abs(a), std::abs(numeric), 1e-12});
            worst = std::max(worst, std::abs(a - numeric) / denom);
        }
    };
    for (std::size_t l = 0; l < net.layers.size(); ++l) {
        probe(net.weights[l], analytic.weights[l]);
        probe(net.biases[l], analytic.biases[l]);
    }
    return worst;
}

} // namespace

TEST_CASE("init draws dense weights inside the glorot bound") {
    const auto net = init_network<float>({LayerSpec::dense(4, 3)}, 3, 7, {4});
    const float bound = std::sqrt(6.0f / 7.0f);
    for (float w : net.weights[0].values()) {
        CHECK(std::abs(w) < bound);
    }
    for (float b : net.biases[0].values()) {
        CHECK(b == 0.0f);
    }
}

TEST_CASE("init is a pure function of the seed") {
    const std::vector<LayerSpec> spec{LayerSpec::dense(4, 8), LayerSpec::relu(),
                                      LayerSpec::dense(8, 3)};
    const auto a = init_network<float>(spec, 3, 42, {4});
    const auto b = init_network<float>(spec, 3, 42, {4});
    const auto c = init_network<float>(spec, 3, 43, {4});
    for (std::size_t i = 0; i < spec.size(); ++i) {
        CHECK(a.weights[i].values() == b.weights[i].values());
    }
    CHECK(a.weights[0].values() != c.weights[0].values());
}

TEST_CASE("init rejects non-chaining specs at the offending boundary") {
    CHECK_THROWS_WITH_AS(
        init_network<float>({LayerSpec::dense(4, 3), LayerSpec::dense(5, 2)}, 2, 1, {4}),
        doctest::Contains("layer 1"), ShapeError);
    CHECK_THROWS_AS(
        init_network<float>({LayerSpec::dense(4, 3), LayerSpec::relu()}, 3, 1, {4}),
        ContractError); // final layer must be dense
    CHECK_THROWS_AS(init_network<float>({LayerSpec::dense(4, 3)}, 5, 1, {4}), ContractError);
}

TEST_CASE("forward through an identity dense layer") {
    auto net = init_network<float>({LayerSpec::dense(2, 2)}, 2, 1, {2});
    net.weights[0] = Tensor<float>::from_rows({{1, 0}, {0, 1}});
    net.biases[0] = Tensor<float>({1, 2});
    const auto out = forward_output(net, Tensor<float>::from_rows({{1, 2}}));
    CHECK(out.values() == std::vector<float>{1, 2});
}

TEST_CASE("relu clamps negatives") {
    Network<float> net;
    net.layers = {LayerSpec::relu()};
    net.input_shape = {2};
    net.weights.resize(1);
    net.biases.resize(1);
    const auto out = forward_output(net, Tensor<float>::from_rows({{-1, 2}}));
    CHECK(out.values() == std::vector<float>{0, 2});
}

TEST_CASE("conv with an all-ones 2x2 kernel counts its window") {
    Network<float> net;
    net.layers = {LayerSpec::conv2d(1, 1, 2)};
    net.input_shape = {1, 3, 3};
    net.weights = {Tensor<float>({1, 1, 2, 2}, {1, 1, 1, 1})};
    net.biases = {Tensor<float>({1, 1})};
    Tensor<float> ones({1, 1, 3, 3});
    for (float& v : ones.values()) {
        v = 1.0f;
    }
    const auto out = forward_output(net, ones);
    CHECK(out.shape() == std::vector<std::size_t>{1, 1, 2, 2});
    for (float v : out.values()) {
        CHECK(v == 4.0f);
    }
}

TEST_CASE("maxpool keeps the window maximum") {
    Network<float> net;
    net.layers = {LayerSpec::maxpool2x2()};
    net.input_shape = {1, 2, 4};
    net.weights.resize(1);
    net.biases.resize(1);
    const Tensor<float> x({1, 1, 2, 4}, {1, 5, 2, 2, 3, 4, 2, 9});
    const auto out = forward_output(net, x);
    CHECK(out.shape() == std::vector<std::size_t>{1, 1, 1, 2});
    CHECK(out.values() == std::vector<float>{5, 9});
}

TEST_CASE("forward rejects wrong input shapes") {
    const auto net = init_network<float>({LayerSpec::dense(4, 2)}, 2, 3, {4});
    CHECK_THROWS_AS(forward_output(net, Tensor<float>({2, 3})), ShapeError);
}

TEST_CASE("zero output gradient gives zero parameter gradients") {
    const auto net = init_network<float>(
        {LayerSpec::dense(3, 4), LayerSpec::relu(), LayerSpec::dense(4, 2)}, 2, 5, {3});
    std::mt19937 gen(2);
    auto [out, tape] = forward(net, random_tensor<float>(gen, {2, 3}, 1.0f));
    const auto grads = backward(net, tape, Tensor<float>({2, 2}));
    for (const auto& g : grads.weights) {
        for (float v : g.values()) {
            CHECK(v == 0.0f);
        }
    }
}

TEST_CASE("backward reproduces a hand chain rule") {
    // pred = w * x with w = 1, x = 2; loss = pred^2, so dL/dpred = 4 and
    // dL/dw = x * 4 = 8.
    auto net = init_network<float>({LayerSpec::dense(1, 1)}, 1, 1, {1});
    net.weights[0] = Tensor<float>({1, 1}, {1.0f});
    net.biases[0] = Tensor<float>({1, 1});
    auto [out, tape] = forward(net, Tensor<float>({1, 1}, {2.0f}));
    CHECK(out.at(0, 0) == 2.0f);
    const auto grads = backward(net, tape, Tensor<float>({1, 1}, {4.0f}));
    CHECK(grads.weights[0].at(0, 0) == 8.0f);
    CHECK(grads.biases[0].at(0, 0) == 4.0f);
}

TEST_CASE("backward rejects a stale tape") {
    auto net = init_network<float>({LayerSpec::dense(2, 2)}, 2, 9, {2});
    std::mt19937 gen(3);
    const auto x = random_tensor<float>(gen, {2, 2}, 1.0f);
    auto [out, tape] = forward(net, x);
    auto state = make_optimizer_state(net, 0.1f, 0.0f);
    GradientSet<float> grads;
    grads.weights = {Tensor<float>({2, 2}, {1, 1, 1, 1})};
    grads.biases = {Tensor<float>({1, 2}, {1, 1})};
    sgd_step(net, grads, state);
    CHECK_THROWS_AS(backward(net, tape, Tensor<float>({2, 2})), ContractError);
}

TEST_CASE("analytic gradients match finite differences on a dense net") {
    std::mt19937 gen(17);
    const auto net = init_network<double>(
        {LayerSpec::dense(5, 7), LayerSpec::relu(), LayerSpec::dense(7, 3)}, 3, 21, {5});
    const auto x = random_tensor<double>(gen, {4, 5}, 1.0);
    const auto y = one_hot_rows(gen, 4, 3);
    CHECK(fd_max_rel_error(net, x, y, 1e-5) < 1e-6);
}

TEST_CASE("analytic gradients match finite differences on a conv net") {
    std::mt19937 gen(19);
    const auto net = init_network<double>(
        {LayerSpec::conv2d(1, 2, 3), LayerSpec::relu(), LayerSpec::maxpool2x2(),
         LayerSpec::flatten(), LayerSpec::dense(8, 3)},
        3, 23, {1, 6, 6});
    const auto x = random_tensor<double>(gen, {3, 1, 6, 6}, 1.0);
    const auto y = one_hot_rows(gen, 3, 3);
    CHECK(fd_max_rel_error(net, x, y, 1e-5) < 1e-6);
}

TEST_CASE("cross entropy of uniform logits is ln C") {
    Tensor<double> y({1, 10});
    y.at(0, 3) = 1.0;
    const auto res = cross_entropy_loss(Tensor<double>({1, 10}), y);
    CHECK(double(res.loss) == doctest::Approx(std::log(10.0)).epsilon(1e-9));
}

TEST_CASE("cross entropy of [ln 3, 0] with true class 0 is -ln 0.75") {
    const Tensor<double> logits({1, 2}, {std::log(3.0), 0.0});
    const Tensor<double> y({1, 2}, {1.0, 0.0});
    const auto res = cross_entropy_loss(logits, y);
    CHECK(double(res.loss) == doctest::Approx(-std::log(0.75)).epsilon(1e-9));
}

TEST_CASE("cross entropy gradient at uniform logits, C=2") {
    const Tensor<double> logits({1, 2});
    const Tensor<double> y({1, 2}, {1.0, 0.0});
    const auto res = cross_entropy_loss(logits, y);
    CHECK(res.grad_logits.at(0, 0) == doctest::Approx(-0.5).epsilon(1e-12));
    CHECK(res.grad_logits.at(0, 1) == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("cross entropy rejects non-one-hot labels and stays non-negative") {
    const Tensor<float> logits({1, 3});
    CHECK_THROWS_AS(cross_entropy_loss(logits, Tensor<float>({1, 3}, {0.5f, 0.5f, 0.0f})),
                    ContractError);
    CHECK_THROWS_AS(cross_entropy_loss(logits, Tensor<float>({1, 3}, {1.0f, 1.0f, 0.0f})),
                    ContractError);
    std::mt19937 gen(5);
    for (int iter = 0; iter < 30; ++iter) {
        const auto x = random_tensor<float>(gen, {3, 4}, 6.0f);
        Tensor<float> labels({3, 4});
        for (std::size_t i = 0; i < 3; ++i) {
            labels.at(i, gen() % 4) = 1.0f;
        }
        CHECK(cross_entropy_loss(x, labels).loss >= 0.0f);
    }
}

TEST_CASE("sgd heavy-ball recurrence by hand") {
    auto net = init_network<float>({LayerSpec::dense(1, 1)}, 1, 1, {1});
    net.weights[0] = Tensor<float>({1, 1}, {1.0f});
    net.biases[0] = Tensor<float>({1, 1});
    auto state = make_optimizer_state(net, 0.1f, 0.9f);
    GradientSet<float> grads;
    grads.weights = {Tensor<float>({1, 1}, {1.0f})};
    grads.biases = {Tensor<float>({1, 1})};

    sgd_step(net, grads, state);
    CHECK(net.weights[0].at(0, 0) == doctest::Approx(0.9).epsilon(1e-6));
    CHECK(state.velocity_w[0].at(0, 0) == doctest::Approx(-0.1).epsilon(1e-6));

    sgd_step(net, grads, state);
    CHECK(state.velocity_w[0].at(0, 0) == doctest::Approx(-0.19).epsilon(1e-6));
    CHECK(net.weights[0].at(0, 0) == doctest::Approx(0.71).epsilon(1e-6));
}

TEST_CASE("zero-momentum sgd is vanilla gradient descent, exactly") {
    auto net = init_network<float>({LayerSpec::dense(2, 2)}, 2, 31, {2});
    const auto before = net.weights[0].values();
    auto state = make_optimizer_state(net, 0.25f, 0.0f);
    GradientSet<float> grads;
    grads.weights = {Tensor<float>({2, 2}, {1, 2, 3, 4})};
    grads.biases = {Tensor<float>({1, 2}, {5, 6})};
    sgd_step(net, grads, state);
    for (std::size_t i = 0; i < 4; ++i) {
        CHECK(net.weights[0].values()[i] == before[i] - 0.25f * grads.weights[0].values()[i]);
    }
}

TEST_CASE("zero gradient and zero velocity leave the network bitwise unchanged") {
    auto net = init_network<float>({LayerSpec::dense(3, 2)}, 2, 37, {3});
    const auto before = net.weights[0].values();
    auto state = make_optimizer_state(net, 0.1f, 0.9f);
    GradientSet<float> grads;
    grads.weights = {Tensor<float>({3, 2})};
    grads.biases = {Tensor<float>({1, 2})};
    sgd_step(net, grads, state);
    CHECK(net.weights[0].values() == before);
}

TEST_CASE("sgd rejects mismatched gradient shapes") {
    auto net = init_network<float>({LayerSpec::dense(2, 2)}, 2, 41, {2});
    auto state = make_optimizer_state(net, 0.1f, 0.9f);
    GradientSet<float> grads;
    grads.weights = {Tensor<float>({3, 2})};
    grads.biases = {Tensor<float>({1, 2})};
    CHECK_THROWS_AS(sgd_step(net, grads, state), ShapeError);
}

TEST_CASE("optimizer construction validates lr and momentum") {
    const auto net = init_network<float>({LayerSpec::dense(2, 2)}, 2, 43, {2});
    CHECK_THROWS_AS(make_optimizer_state(net, 0.0f, 0.9f), ContractError);
    CHECK_THROWS_AS(make_optimizer_state(net, 0.1f, 1.0f), ContractError);
}

TEST_CASE("the small conv stack for 32x32 RGB chains and runs") {
    const std::vector<LayerSpec> spec{
        LayerSpec::conv2d(3, 6, 5),  LayerSpec::relu(),          LayerSpec::maxpool2x2(),
        LayerSpec::conv2d(6, 16, 5), LayerSpec::relu(),          LayerSpec::maxpool2x2(),
        LayerSpec::flatten(),        LayerSpec::dense(400, 128), LayerSpec::relu(),
        LayerSpec::dense(128, 64),   LayerSpec::relu(),          LayerSpec::dense(64, 10)};
    const auto net = init_network<float>(spec, 10, 47, {3, 32, 32});
    std::mt19937 gen(7);
    const auto out = forward_output(net, random_tensor<float>(gen, {2, 3, 32, 32}, 1.0f));
    CHECK(out.shape() == std::vector<std::size_t>{2, 10});
}

TEST_CASE("forward is deterministic") {
    const auto net = init_network<float>(
        {LayerSpec::dense(4, 6), LayerSpec::relu(), LayerSpec::dense(6, 2)}, 2, 53, {4});
    std::mt19937 gen(9);
    const auto x = random_tensor<float>(gen, {3, 4}, 2.0f);
    CHECK(forward_output(net, x).values() == forward_output(net, x).values());
}

TEST_CASE("checkpoint round-trips bitwise") {
    const auto net = init_network<float>(
        {LayerSpec::conv2d(1, 2, 3), LayerSpec::relu(), LayerSpec::maxpool2x2(),
         LayerSpec::flatten(), LayerSpec::dense(8, 3)},
        3, 59, {1, 6, 6});
    const auto path = std::filesystem::temp_directory_path() / "oatlab_ckpt_test.bin";
    save_network(net, path);
    const auto loaded = load_network<float>(path);
    CHECK(loaded.class_count == net.class_count);
    CHECK(loaded.input_shape == net.input_shape);
    REQUIRE(loaded.layers.size() == net.layers.size());
    for (std::size_t i = 0; i < net.layers.size(); ++i) {
        CHECK(loaded.layers[i].kind == net.layers[i].kind);
        CHECK(loaded.weights[i].shape() == net.weights[i].shape());
        CHECK(loaded.weights[i].values() == net.weights[i].values());
        CHECK(loaded.biases[i].values() == net.biases[i].values());
    }
    std::filesystem::remove(path);
}

TEST_CASE("checkpoint loader rejects garbage and wrong scalar width") {
    const auto dir = std::filesystem::temp_directory_path();
    const auto bad = dir / "oatlab_ckpt_bad.bin";
    {
        std::ofstream os(bad, std::ios::binary);
        os << "definitely not a checkpoint";
    }
    CHECK_THROWS_AS(load_network<float>(bad), FormatError);
    std::filesystem::remove(bad);

    const auto net = init_network<float>({LayerSpec::dense(2, 2)}, 2, 61, {2});
    const auto path = dir / "oatlab_ckpt_width.bin";
    save_network(net, path);
    CHECK_THROWS_AS(load_network<double>(path), FormatError);
    std::filesystem::remove(path);
}
