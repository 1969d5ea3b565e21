#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "oatlab/trainer.hpp"

using namespace oatlab;

namespace {

Network<float> small_mlp(std::size_t in, std::size_t hidden, std::size_t classes,
                         std::uint32_t seed) {
    return init_network<float>(
        {LayerSpec::dense(in, hidden), LayerSpec::relu(), LayerSpec::dense(hidden, classes)},
        classes, seed, {in});
}

Dataset two_sample_dataset() {
    Dataset ds;
    ds.inputs = Tensor<float>({2, 1}, {1.0f, 2.0f});
    ds.labels = Tensor<float>({2, 2}, {1, 0, 0, 1});
    ds.class_count = 2;
    return ds;
}

} // namespace

TEST_CASE("defaults pin the reference setup") {
    const TrainConfig cfg;
    CHECK(cfg.total_epochs == 100);
    CHECK(cfg.pretrain_epochs == 10);
    CHECK(cfg.batch_size == 32);
    CHECK(cfg.lr == 0.001f);
    CHECK(cfg.momentum == 0.9f);
    CHECK(cfg.effective_eval_batch_size() == cfg.batch_size);
}

TEST_CASE("config validation") {
    TrainConfig cfg;
    cfg.total_epochs = 0;
    CHECK_THROWS_AS(validate(cfg), ContractError);
    cfg = TrainConfig{};
    cfg.pretrain_epochs = cfg.total_epochs + 1;
    CHECK_THROWS_AS(validate(cfg), ContractError);
    cfg = TrainConfig{};
    cfg.lr = 0.0f;
    CHECK_THROWS_AS(validate(cfg), ContractError);
    cfg = TrainConfig{};
    cfg.momentum = 1.0f;
    CHECK_THROWS_AS(validate(cfg), ContractError);
    cfg = TrainConfig{};
    cfg.batch_size = 0;
    CHECK_THROWS_AS(validate(cfg), ContractError);
    CHECK_NOTHROW(validate(TrainConfig{}));
}

TEST_CASE("one oat step matches a hand-executed update chain") {
    const Dataset train = two_sample_dataset();
    Dataset test = train;
    test.split = Split::Test;

    auto net = init_network<float>({LayerSpec::dense(1, 2)}, 2, 1, {1});
    net.weights[0] = Tensor<float>({1, 2}, {0.5f, -0.25f});
    net.biases[0] = Tensor<float>({1, 2});

    TrainConfig cfg;
    cfg.mode = TrainMode::Oat;
    cfg.total_epochs = 1;
    cfg.pretrain_epochs = 0;
    cfg.batch_size = 2;
    cfg.lr = 0.1f;
    cfg.momentum = 0.9f;
    cfg.seed = 4;
    cfg.eval_mode = EvalMode::OatBatched;
    const History history = run_training(net, train, test, cfg);

    // Scalar re-execution of the whole chain in double:
    // outputs of x=1,2 under w=(0.5,-0.25), b=0
    const double o00 = 0.5, o01 = -0.25, o10 = 1.0, o11 = -0.5;
    // anchor: softmax of the column means
    const double m0 = (o00 + o10) / 2.0, m1 = (o01 + o11) / 2.0;
    const double mx = std::max(m0, m1);
    const double e0 = std::exp(m0 - mx), e1 = std::exp(m1 - mx);
    const double a0 = e0 / (e0 + e1), a1 = e1 / (e0 + e1);
    // targets: c/a - 1 per row
    const double t00 = 1.0 / a0 - 1.0, t01 = -1.0;
    const double t10 = -1.0, t11 = 1.0 / a1 - 1.0;
    // mse over 4 elements and its gradient 2(o - t)/4
    const double loss = ((t00 - o00) * (t00 - o00) + (t01 - o01) * (t01 - o01) +
                         (t10 - o10) * (t10 - o10) + (t11 - o11) * (t11 - o11)) /
                        4.0;
    const double g00 = (o00 - t00) / 2.0, g01 = (o01 - t01) / 2.0;
    const double g10 = (o10 - t10) / 2.0, g11 = (o11 - t11) / 2.0;
    // dense backward: dw = x^T g, db = column sums of g
    const double dw0 = 1.0 * g00 + 2.0 * g10, dw1 = 1.0 * g01 + 2.0 * g11;
    const double db0 = g00 + g10, db1 = g01 + g11;
    // heavy ball from zero velocity: one step is w - lr * g
    const double w0 = 0.5 - 0.1 * dw0, w1 = -0.25 - 0.1 * dw1;
    const double b0 = -0.1 * db0, b1 = -0.1 * db1;

    CHECK(history.epochs.size() == 1);
    CHECK(history.epochs[0].phase == Phase::Oat);
    CHECK(history.epochs[0].train_loss == doctest::Approx(loss).epsilon(1e-5));
    CHECK(net.weights[0].at(0, 0) == doctest::Approx(w0).epsilon(1e-5));
    CHECK(net.weights[0].at(0, 1) == doctest::Approx(w1).epsilon(1e-5));
    CHECK(net.biases[0].at(0, 0) == doctest::Approx(b0).epsilon(1e-5));
    CHECK(net.biases[0].at(0, 1) == doctest::Approx(b1).epsilon(1e-5));
}

TEST_CASE("phase schedule: pretrain epochs then oat epochs") {
    auto [train, test] = synth_blobs(3, 10, 2, 1.0f, 2);
    TrainConfig cfg;
    cfg.mode = TrainMode::Oat;
    cfg.total_epochs = 5;
    cfg.pretrain_epochs = 2;
    cfg.batch_size = 8;
    cfg.eval_mode = EvalMode::OatBatched;
    auto net = small_mlp(2, 6, 3, 3);
    const History history = run_training(net, train, test, cfg);
    REQUIRE(history.epochs.size() == 5);
    CHECK(history.epochs[0].phase == Phase::PretrainCe);
    CHECK(history.epochs[1].phase == Phase::PretrainCe);
    CHECK(history.epochs[2].phase == Phase::Oat);
    CHECK(history.epochs[4].phase == Phase::Oat);
    for (const auto& m : history.epochs) {
        CHECK(m.train_seconds >= 0.0);
        CHECK(m.eval_seconds >= 0.0);
        CHECK(m.test_accuracy >= 0.0);
        CHECK(m.test_accuracy <= 1.0);
    }
}

TEST_CASE("pretrain_epochs = 0 trains oat from scratch") {
    auto [train, test] = synth_blobs(3, 10, 2, 1.0f, 2);
    TrainConfig cfg;
    cfg.mode = TrainMode::Oat;
    cfg.total_epochs = 3;
    cfg.pretrain_epochs = 0;
    cfg.batch_size = 8;
    cfg.eval_mode = EvalMode::OatBatched;
    auto net = small_mlp(2, 6, 3, 5);
    const History history = run_training(net, train, test, cfg);
    for (const auto& m : history.epochs) {
        CHECK(m.phase == Phase::Oat);
    }
}

TEST_CASE("training is bitwise deterministic given the config") {
    auto [train, test] = synth_blobs(3, 15, 2, 1.0f, 6);
    TrainConfig cfg;
    cfg.mode = TrainMode::Oat;
    cfg.total_epochs = 4;
    cfg.pretrain_epochs = 1;
    cfg.batch_size = 8;
    cfg.seed = 9;
    cfg.eval_mode = EvalMode::OatBatched;
    auto run = [&]() {
        auto net = small_mlp(2, 8, 3, 11);
        return run_training(net, train, test, cfg);
    };
    const History a = run();
    const History b = run();
    REQUIRE(a.epochs.size() == b.epochs.size());
    for (std::size_t i = 0; i < a.epochs.size(); ++i) {
        CHECK(a.epochs[i].train_loss == b.epochs[i].train_loss);
        CHECK(a.epochs[i].test_accuracy == b.epochs[i].test_accuracy);
        CHECK(a.epochs[i].phase == b.epochs[i].phase);
    }
    CHECK(a.final_accuracy == b.final_accuracy);
    CHECK(a.best_accuracy == b.best_accuracy);
}

TEST_CASE("oat with full pretraining reproduces the conventional run") {
    auto [train, test] = synth_blobs(3, 15, 2, 1.0f, 8);
    TrainConfig conventional;
    conventional.mode = TrainMode::Conventional;
    conventional.total_epochs = 4;
    conventional.pretrain_epochs = 0;
    conventional.batch_size = 8;
    conventional.seed = 13;
    conventional.eval_mode = EvalMode::Conventional;

    TrainConfig oat_cfg = conventional;
    oat_cfg.mode = TrainMode::Oat;
    oat_cfg.pretrain_epochs = oat_cfg.total_epochs;

    auto net_a = small_mlp(2, 8, 3, 17);
    auto net_b = small_mlp(2, 8, 3, 17);
    const History a = run_training(net_a, train, test, conventional);
    const History b = run_training(net_b, train, test, oat_cfg);
    REQUIRE(a.epochs.size() == b.epochs.size());
    for (std::size_t i = 0; i < a.epochs.size(); ++i) {
        CHECK(a.epochs[i].train_loss == b.epochs[i].train_loss);
        CHECK(a.epochs[i].test_accuracy == b.epochs[i].test_accuracy);
    }
    for (std::size_t l = 0; l < net_a.weights.size(); ++l) {
        CHECK(net_a.weights[l].values() == net_b.weights[l].values());
    }
}

TEST_CASE("class-count mismatch is rejected") {
    auto [train, test] = synth_blobs(3, 10, 2, 1.0f, 2);
    auto net = small_mlp(2, 6, 4, 3); // 4 classes vs 3 in the data
    TrainConfig cfg;
    cfg.total_epochs = 1;
    cfg.pretrain_epochs = 0;
    CHECK_THROWS_AS(run_training(net, train, test, cfg), ContractError);
}

TEST_CASE("constant-output network scores 1/C in every eval mode") {
    auto [train, test] = synth_blobs(4, 10, 2, 1.0f, 21); // balanced test: 2 per class
    auto net = small_mlp(2, 6, 4, 25);
    for (auto& w : net.weights) {
        std::fill(w.values().begin(), w.values().end(), 0.0f);
    }
    for (auto& b : net.biases) {
        std::fill(b.values().begin(), b.values().end(), 0.0f);
    }
    for (EvalMode mode : {EvalMode::Conventional, EvalMode::OatBatched, EvalMode::OatSingle}) {
        const auto result = evaluate(net, test, mode, 3);
        CHECK(result.accuracy == doctest::Approx(0.25).epsilon(1e-12));
    }
}

TEST_CASE("single-sample eval equals batched eval with batch size 1, exactly") {
    auto [train, test] = synth_blobs(3, 12, 2, 1.0f, 23);
    const auto net = small_mlp(2, 7, 3, 29);
    const auto single = evaluate(net, test, EvalMode::OatSingle, 16);
    const auto batched = evaluate(net, test, EvalMode::OatBatched, 1);
    CHECK(single.accuracy == batched.accuracy);
}

TEST_CASE("evaluation does not mutate the network") {
    auto [train, test] = synth_blobs(3, 10, 2, 1.0f, 27);
    const auto net = small_mlp(2, 6, 3, 31);
    const auto before_w = net.weights;
    const auto before_rev = net.revision;
    evaluate(net, test, EvalMode::OatBatched, 4);
    for (std::size_t l = 0; l < net.weights.size(); ++l) {
        CHECK(net.weights[l].values() == before_w[l].values());
    }
    CHECK(net.revision == before_rev);
}

TEST_CASE("evaluate matches a brute-force recount") {
    auto [train, test] = synth_blobs(3, 14, 2, 1.0f, 33);
    const auto net = small_mlp(2, 9, 3, 37);
    const std::size_t batch_size = 5;
    const auto result = evaluate(net, test, EvalMode::OatBatched, batch_size);

    std::size_t correct = 0;
    for (const Batch& batch : epoch_batches(test, batch_size, false, 0, 0)) {
        const auto out = forward_output(net, batch.inputs);
        const auto anchor = anchor_of_outputs(out);
        const auto predicted = predict_classes(inverse_transform(anchor, out));
        const auto truth = argmax_rows(batch.labels);
        for (std::size_t r = 0; r < batch.size(); ++r) {
            if (predicted[r] == truth[r]) {
                ++correct;
            }
        }
    }
    CHECK(result.accuracy == double(correct) / double(test.size()));
}

TEST_CASE("empty test set is rejected") {
    const auto net = small_mlp(2, 4, 2, 39);
    Dataset empty;
    empty.class_count = 2;
    CHECK_THROWS_AS(evaluate(net, empty, EvalMode::Conventional, 4), ContractError);
}

TEST_CASE("a tiny blob set memorized to near-zero oat loss is classified perfectly") {
    auto [train, test] = synth_blobs(2, 10, 2, 1.0f, 41); // 16 train, 4 test
    auto net = small_mlp(2, 16, 2, 43);
    TrainConfig cfg;
    cfg.mode = TrainMode::Oat;
    cfg.total_epochs = 4000;
    cfg.pretrain_epochs = 5;
    cfg.batch_size = 16; // full batch: one anchor, stable across epochs
    cfg.lr = 0.01f;
    cfg.momentum = 0.9f;
    cfg.seed = 45;
    cfg.eval_mode = EvalMode::OatBatched;
    const History history = run_training(net, train, test, cfg);
    REQUIRE(history.epochs.back().train_loss < 1e-3);
    // near-zero offset loss forces t close to c/a - 1, and the inverse
    // transform then recovers the one-hot label for any eval batching
    const auto train_as_test = [&] {
        Dataset d = train;
        d.split = Split::Test;
        return d;
    }();
    CHECK(evaluate(net, train_as_test, EvalMode::OatBatched, 4).accuracy == 1.0);
    CHECK(evaluate(net, train_as_test, EvalMode::OatSingle, 1).accuracy == 1.0);
}

TEST_CASE("grad_check: oat loss on a linear net") {
    const auto net = init_network<double>({LayerSpec::dense(3, 2)}, 2, 47, {3});
    Batch batch;
    batch.inputs = Tensor<float>({2, 3}, {0.5f, -1.0f, 2.0f, 1.5f, 0.25f, -0.75f});
    batch.labels = Tensor<float>({2, 2}, {1, 0, 0, 1});
    batch.indices = {0, 1};
    CHECK(grad_check(net, batch, GradCheckLoss::Oat, 1e-5) < 1e-6);
}

TEST_CASE("grad_check: cross entropy on a conv net") {
    const auto net = init_network<double>(
        {LayerSpec::conv2d(1, 2, 3), LayerSpec::relu(), LayerSpec::maxpool2x2(),
         LayerSpec::flatten(), LayerSpec::dense(8, 3)},
        3, 53, {1, 6, 6});
    Batch batch;
    batch.inputs = Tensor<float>({2, 1, 6, 6});
    for (std::size_t i = 0; i < batch.inputs.size(); ++i) {
        batch.inputs.values()[i] = float(std::sin(0.7 * double(i)));
    }
    batch.labels = Tensor<float>({2, 3}, {1, 0, 0, 0, 0, 1});
    batch.indices = {0, 1};
    CHECK(grad_check(net, batch, GradCheckLoss::CrossEntropy, 1e-5) < 1e-6);
}

TEST_CASE("grad_check in 32-bit mode stays under the loose tolerance") {
    const auto net = init_network<float>(
        {LayerSpec::dense(4, 6), LayerSpec::relu(), LayerSpec::dense(6, 3)}, 3, 61, {4});
    Batch batch;
    batch.inputs = Tensor<float>({3, 4});
    for (std::size_t i = 0; i < batch.inputs.size(); ++i) {
        batch.inputs.values()[i] = float(std::cos(1.3 * double(i)));
    }
    batch.labels = Tensor<float>({3, 3}, {1, 0, 0, 0, 1, 0, 0, 0, 1});
    batch.indices = {0, 1, 2};
    CHECK(grad_check(net, batch, GradCheckLoss::CrossEntropy, 1e-2) < 1e-2);
    CHECK(grad_check(net, batch, GradCheckLoss::Oat, 1e-2) < 1e-2);
}

TEST_CASE("a runaway run reports divergence instead of garbage") {
    auto [train, test] = synth_blobs(3, 20, 2, 1.0f, 51);
    auto net = small_mlp(2, 8, 3, 53);
    TrainConfig cfg;
    cfg.mode = TrainMode::Oat;
    cfg.total_epochs = 50;
    cfg.pretrain_epochs = 0;
    cfg.batch_size = 8;
    cfg.lr = 0.9f; // far past the stable range for offset targets
    cfg.momentum = 0.9f;
    cfg.seed = 55;
    cfg.eval_mode = EvalMode::OatBatched;
    CHECK_THROWS_WITH_AS(run_training(net, train, test, cfg), doctest::Contains("diverged"),
                         DomainError);
}

TEST_CASE("grad_check rejects a zero step") {
    const auto net = init_network<double>({LayerSpec::dense(2, 2)}, 2, 59, {2});
    Batch batch;
    batch.inputs = Tensor<float>({1, 2}, {1.0f, 2.0f});
    batch.labels = Tensor<float>({1, 2}, {1, 0});
    batch.indices = {0};
    CHECK_THROWS_AS(grad_check(net, batch, GradCheckLoss::CrossEntropy, 0.0), ContractError);
}
