#include <random>

#include <benchmark/benchmark.h>

#include "oatlab/data.hpp"
#include "oatlab/nnet.hpp"
#include "oatlab/oat.hpp"

using namespace oatlab;

namespace {

Tensor<float> random_tensor(std::vector<std::size_t> shape, std::uint32_t seed) {
    std::mt19937 gen(seed);
    Tensor<float> t(std::move(shape));
    for (float& v : t.values()) {
        v = 2.0f * float(gen()) / float(std::mt19937::max()) - 1.0f;
    }
    return t;
}

Tensor<float> one_hot_batch(std::size_t rows, std::size_t classes, std::uint32_t seed) {
    std::mt19937 gen(seed);
    Tensor<float> t({rows, classes});
    for (std::size_t i = 0; i < rows; ++i) {
        t.at(i, gen() % classes) = 1.0f;
    }
    return t;
}

Network<float> mlp_784() {
    return init_network<float>(
        {LayerSpec::flatten(), LayerSpec::dense(784, 128), LayerSpec::relu(),
         LayerSpec::dense(128, 64), LayerSpec::relu(), LayerSpec::dense(64, 10)},
        10, 1, {1, 28, 28});
}

void BM_MatmulBatchHidden(benchmark::State& state) {
    const auto a = random_tensor({32, 784}, 1);
    const auto b = random_tensor({784, 128}, 2);
    for (auto _ : state) {
        benchmark::DoNotOptimize(matmul(a, b));
    }
}
BENCHMARK(BM_MatmulBatchHidden);

void BM_SoftmaxRows(benchmark::State& state) {
    const auto x = random_tensor({128, 101}, 3);
    for (auto _ : state) {
        benchmark::DoNotOptimize(softmax_rows(x));
    }
}
BENCHMARK(BM_SoftmaxRows);

void BM_AnchorTargetsInverse(benchmark::State& state) {
    const auto outputs = random_tensor({32, 10}, 4);
    const auto labels = one_hot_batch(32, 10, 5);
    for (auto _ : state) {
        const auto anchor = anchor_of_outputs(outputs);
        const auto targets = oat_targets(labels, anchor);
        benchmark::DoNotOptimize(inverse_transform(anchor, targets.values));
    }
}
BENCHMARK(BM_AnchorTargetsInverse);

void BM_ConvForwardSmallNet(benchmark::State& state) {
    const auto net = init_network<float>(
        {LayerSpec::conv2d(3, 6, 5), LayerSpec::relu(), LayerSpec::maxpool2x2(),
         LayerSpec::conv2d(6, 16, 5), LayerSpec::relu(), LayerSpec::maxpool2x2(),
         LayerSpec::flatten(), LayerSpec::dense(400, 128), LayerSpec::relu(),
         LayerSpec::dense(128, 64), LayerSpec::relu(), LayerSpec::dense(64, 10)},
        10, 7, {3, 32, 32});
    const auto x = random_tensor({8, 3, 32, 32}, 8);
    for (auto _ : state) {
        benchmark::DoNotOptimize(forward_output(net, x));
    }
}
BENCHMARK(BM_ConvForwardSmallNet);

/// One optimizer step on the 784-128-64-10 stack, conventional vs
/// anchor-relative objective.
void BM_TrainStep(benchmark::State& state) {
    const bool oat = state.range(0) == 1;
    auto net = mlp_784();
    auto opt = make_optimizer_state(net, 0.001f, 0.9f);
    const auto x = random_tensor({32, 1, 28, 28}, 9);
    const auto labels = one_hot_batch(32, 10, 10);
    for (auto _ : state) {
        auto [out, tape] = forward(net, x);
        Tensor<float> grad;
        if (oat) {
            const auto anchor = anchor_of_outputs(out);
            const auto targets = oat_targets(labels, anchor);
            grad = oat_loss_and_grad(targets, out).grad_preds;
        } else {
            grad = cross_entropy_loss(out, labels).grad_logits;
        }
        const auto grads = backward(net, tape, grad);
        sgd_step(net, grads, opt);
    }
}
BENCHMARK(BM_TrainStep)->Arg(0)->Name("BM_TrainStep/conventional");
BENCHMARK(BM_TrainStep)->Arg(1)->Name("BM_TrainStep/oat");

} // namespace

BENCHMARK_MAIN();
