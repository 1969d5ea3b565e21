#include "oatlab/verify.hpp"

#include <cmath>
#include <cstdio>
#include <random>

#include "oatlab/data.hpp"
#include "oatlab/nnet.hpp"
#include "oatlab/oat.hpp"
#include "oatlab/trainer.hpp"

namespace oatlab::verify {

namespace {

std::string fmt(const char* format, double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), format, v);
    return buf;
}

Tensor<float> random_logits(std::mt19937& gen, std::size_t rows, std::size_t cols,
                            double range) {
    Tensor<float> t({rows, cols});
    for (float& v : t.values()) {
        v = float((2.0 * detail::unit_uniform(gen) - 1.0) * range);
    }
    return t;
}

Tensor<float> random_one_hot(std::mt19937& gen, std::size_t rows, std::size_t cols) {
    Tensor<float> t({rows, cols});
    for (std::size_t i = 0; i < rows; ++i) {
        t.at(i, gen() % cols) = 1.0f;
    }
    return t;
}

Batch random_batch(std::mt19937& gen, std::size_t rows,
                   const std::vector<std::size_t>& sample_shape, std::size_t classes) {
    Batch batch;
    std::vector<std::size_t> shape{rows};
    shape.insert(shape.end(), sample_shape.begin(), sample_shape.end());
    batch.inputs = Tensor<float>(shape);
    for (float& v : batch.inputs.values()) {
        v = float(2.0 * detail::unit_uniform(gen) - 1.0);
    }
    batch.labels = random_one_hot(gen, rows, classes);
    batch.indices.resize(rows);
    return batch;
}

PropertyResult check_roundtrip() {
    double worst = 0.0;
    for (std::size_t c : {std::size_t{2}, std::size_t{10}, std::size_t{101}}) {
        worst = std::max(worst, roundtrip_max_error(17, 200, c, nullptr));
    }
    return {"oat round-trip reconstructs one-hot labels", worst <= 1e-5,
            "max |error| = " + fmt("%.3g", worst)};
}

PropertyResult check_targets_minus_one() {
    std::mt19937 gen(23);
    bool ok = true;
    for (int iter = 0; iter < 200 && ok; ++iter) {
        const std::size_t c = 2 + gen() % 12;
        const std::size_t b = 1 + gen() % 6;
        const auto anchor = anchor_of_outputs(random_logits(gen, b, c, 4.0));
        const auto labels = random_one_hot(gen, b, c);
        const auto targets = oat_targets(labels, anchor);
        for (std::size_t i = 0; i < b; ++i) {
            for (std::size_t j = 0; j < c; ++j) {
                if (labels.at(i, j) == 0.0f && targets.values.at(i, j) != -1.0f) {
                    ok = false;
                }
                if (labels.at(i, j) == 1.0f && targets.values.at(i, j) < 0.0f) {
                    ok = false;
                }
            }
        }
    }
    return {"non-true-class targets equal -1 exactly", ok, ""};
}

PropertyResult check_anchor_simplex() {
    std::mt19937 gen(29);
    double worst_sum = 0.0;
    bool positive = true;
    for (int iter = 0; iter < 200; ++iter) {
        const std::size_t c = 2 + gen() % 16;
        const std::size_t b = 1 + gen() % 8;
        const auto anchor = anchor_of_outputs(random_logits(gen, b, c, 8.0));
        double sum = 0.0;
        for (float v : anchor.probs.values()) {
            sum += v;
            positive = positive && v > 0.0f;
        }
        worst_sum = std::max(worst_sum, std::abs(sum - 1.0));
    }
    return {"anchors lie on the probability simplex", positive && worst_sum <= 1e-6,
            "max |sum-1| = " + fmt("%.3g", worst_sum)};
}

PropertyResult check_single_row_anchor() {
    std::mt19937 gen(31);
    bool ok = true;
    for (int iter = 0; iter < 200 && ok; ++iter) {
        const std::size_t c = 2 + gen() % 16;
        const auto row = random_logits(gen, 1, c, 8.0);
        const auto anchor = anchor_of_outputs(row);
        const auto soft = softmax_rows(row);
        for (std::size_t j = 0; j < c; ++j) {
            if (anchor.probs.at(0, j) != soft.at(0, j)) {
                ok = false;
            }
        }
    }
    return {"single-row anchor equals softmax of the row exactly", ok, ""};
}

PropertyResult check_anchor_order_invariance() {
    std::mt19937 gen(37);
    double worst = 0.0;
    for (int iter = 0; iter < 100; ++iter) {
        const std::size_t c = 2 + gen() % 10;
        const std::size_t b = 2 + gen() % 8;
        const auto outputs = random_logits(gen, b, c, 6.0);
        Tensor<float> reversed({b, c});
        for (std::size_t i = 0; i < b; ++i) {
            for (std::size_t j = 0; j < c; ++j) {
                reversed.at(b - 1 - i, j) = outputs.at(i, j);
            }
        }
        const auto a1 = anchor_of_outputs(outputs);
        const auto a2 = anchor_of_outputs(reversed);
        for (std::size_t j = 0; j < c; ++j) {
            worst = std::max(worst, std::abs(double(a1.probs.at(0, j)) - a2.probs.at(0, j)));
        }
    }
    return {"anchor is invariant to batch row order", worst <= 1e-6,
            "max |diff| = " + fmt("%.3g", worst)};
}

PropertyResult check_softmax_properties() {
    std::mt19937 gen(41);
    double worst = 0.0;
    bool ok = true;
    for (int iter = 0; iter < 200; ++iter) {
        const std::size_t c = 1 + gen() % 16;
        const std::size_t b = 1 + gen() % 8;
        const auto x = random_logits(gen, b, c, 10.0);
        const auto s = softmax_rows(x);
        for (std::size_t i = 0; i < b; ++i) {
            double sum = 0.0;
            for (std::size_t j = 0; j < c; ++j) {
                ok = ok && s.at(i, j) > 0.0f && s.at(i, j) <= 1.0f;
                sum += s.at(i, j);
            }
            worst = std::max(worst, std::abs(sum - 1.0));
        }
        const float shift = float(4.0 * detail::unit_uniform(gen) - 2.0);
        const auto shifted = softmax_rows(add_scalar(x, shift));
        for (std::size_t i = 0; i < s.size(); ++i) {
            worst = std::max(worst, std::abs(double(s.values()[i]) - shifted.values()[i]));
        }
        const auto am_x = argmax_rows(x);
        const auto am_s = argmax_rows(s);
        ok = ok && am_x == am_s;
    }
    return {"softmax rows: simplex, shift invariance, argmax preserved", ok && worst <= 1e-6,
            "max deviation = " + fmt("%.3g", worst)};
}

PropertyResult check_matmul_identity() {
    std::mt19937 gen(43);
    bool ok = true;
    for (int iter = 0; iter < 50 && ok; ++iter) {
        const std::size_t m = 1 + gen() % 6;
        const std::size_t n = 1 + gen() % 6;
        const auto a = random_logits(gen, m, n, 5.0);
        Tensor<float> eye({n, n});
        for (std::size_t i = 0; i < n; ++i) {
            eye.at(i, i) = 1.0f;
        }
        const auto prod = matmul(a, eye);
        ok = prod.values() == a.values();
    }
    return {"matmul by identity is bitwise exact", ok, ""};
}

PropertyResult check_mean_single_row() {
    std::mt19937 gen(47);
    bool ok = true;
    for (int iter = 0; iter < 50 && ok; ++iter) {
        const auto row = random_logits(gen, 1, 1 + gen() % 12, 9.0);
        ok = mean_rows(row).values() == row.values();
    }
    return {"mean of a single row is the row, bitwise", ok, ""};
}

PropertyResult check_score_sum_identity() {
    std::mt19937 gen(53);
    double worst = 0.0;
    for (int iter = 0; iter < 200; ++iter) {
        const std::size_t c = 2 + gen() % 12;
        const std::size_t b = 1 + gen() % 6;
        const auto anchor = anchor_of_outputs(random_logits(gen, b, c, 4.0));
        const auto preds = random_logits(gen, b, c, 3.0);
        const auto scores = inverse_transform(anchor, preds);
        for (std::size_t i = 0; i < b; ++i) {
            double lhs = 0.0;
            double dot = 0.0;
            for (std::size_t j = 0; j < c; ++j) {
                lhs += scores.values.at(i, j);
                dot += double(anchor.probs.at(0, j)) * preds.at(i, j);
            }
            worst = std::max(worst, std::abs(lhs - (1.0 + dot)));
        }
    }
    return {"score rows sum to 1 + anchor-prediction dot", worst <= 1e-5,
            "max |diff| = " + fmt("%.3g", worst)};
}

PropertyResult check_oat_loss_gradient() {
    // quadratic loss: central differences are exact up to rounding, so a
    // coarse step with bounded pred-target distance gives a tight oracle
    std::mt19937 gen(59);
    double worst = 0.0;
    for (int iter = 0; iter < 20; ++iter) {
        const std::size_t c = 2 + gen() % 8;
        const std::size_t b = 1 + gen() % 4;
        const auto anchor64 =
            anchor_of_outputs(random_logits(gen, b, c, 2.0).cast<double>());
        const auto labels64 = random_one_hot(gen, b, c).cast<double>();
        const OatTargets<double> targets = oat_targets(labels64, anchor64);
        Tensor<double> preds = targets.values;
        for (double& v : preds.values()) {
            v += (gen() % 2 == 0 ? 1.0 : -1.0) * (0.1 + detail::unit_uniform(gen));
        }
        const auto res = oat_loss_and_grad(targets, preds);
        const double h = 0.125;
        for (std::size_t i = 0; i < preds.size(); ++i) {
            const double saved = preds.values()[i];
            preds.values()[i] = saved + h;
            const double up = oat_loss_and_grad(targets, preds).loss;
            preds.values()[i] = saved - h;
            const double down = oat_loss_and_grad(targets, preds).loss;
            preds.values()[i] = saved;
            const double numeric = (up - down) / (2.0 * h);
            const double analytic = res.grad_preds.values()[i];
            const double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-12});
            worst = std::max(worst, std::abs(analytic - numeric) / denom);
        }
    }
    return {"mse gradient matches finite differences", worst <= 1e-8,
            "max rel err = " + fmt("%.3g", worst)};
}

PropertyResult check_network_gradients(bool conv, GradCheckLoss loss, const char* name) {
    std::mt19937 gen(conv ? 61 : 67);
    double worst = 0.0;
    for (int iter = 0; iter < 3; ++iter) {
        Network<double> net;
        Batch batch;
        if (conv) {
            net = init_network<double>(
                {LayerSpec::conv2d(2, 3, 3), LayerSpec::relu(), LayerSpec::maxpool2x2(),
                 LayerSpec::flatten(), LayerSpec::dense(12, 3)},
                3, 100 + std::uint32_t(iter), {2, 6, 6});
            batch = random_batch(gen, 3, {2, 6, 6}, 3);
        } else {
            net = init_network<double>(
                {LayerSpec::dense(6, 8), LayerSpec::relu(), LayerSpec::dense(8, 4),
                 LayerSpec::relu(), LayerSpec::dense(4, 3)},
                3, 200 + std::uint32_t(iter), {6});
            batch = random_batch(gen, 4, {6}, 3);
        }
        worst = std::max(worst, grad_check(net, batch, loss, 1e-5));
    }
    return {name, worst <= 1e-6, "max rel err = " + fmt("%.3g", worst)};
}

PropertyResult check_training_determinism() {
    auto [train, test] = synth_blobs(3, 20, 2, 1.0f, 5);
    TrainConfig cfg;
    cfg.mode = TrainMode::Oat;
    cfg.total_epochs = 4;
    cfg.pretrain_epochs = 2;
    cfg.batch_size = 8;
    cfg.lr = 0.01f;
    cfg.seed = 11;
    cfg.eval_mode = EvalMode::OatBatched;
    auto run = [&]() {
        Network<float> net = init_network<float>(
            {LayerSpec::dense(2, 8), LayerSpec::relu(), LayerSpec::dense(8, 3)}, 3, 77, {2});
        return run_training(net, train, test, cfg);
    };
    const History a = run();
    const History b = run();
    bool ok = a.epochs.size() == b.epochs.size();
    for (std::size_t i = 0; ok && i < a.epochs.size(); ++i) {
        ok = a.epochs[i].train_loss == b.epochs[i].train_loss &&
             a.epochs[i].test_accuracy == b.epochs[i].test_accuracy &&
             a.epochs[i].phase == b.epochs[i].phase;
    }
    return {"repeated training runs produce identical metrics", ok, ""};
}

PropertyResult check_eval_modes() {
    auto [train, test] = synth_blobs(3, 15, 2, 1.0f, 7);
    Network<float> net = init_network<float>(
        {LayerSpec::dense(2, 6), LayerSpec::relu(), LayerSpec::dense(6, 3)}, 3, 13, {2});
    const auto single = evaluate(net, test, EvalMode::OatSingle, 4);
    const auto batched1 = evaluate(net, test, EvalMode::OatBatched, 1);
    const bool ok = single.accuracy == batched1.accuracy;
    return {"single-sample eval equals batched eval at batch size 1", ok, ""};
}

PropertyResult check_pretrain_equals_conventional() {
    auto [train, test] = synth_blobs(3, 15, 2, 1.0f, 9);
    TrainConfig base;
    base.total_epochs = 3;
    base.pretrain_epochs = 0;
    base.batch_size = 8;
    base.lr = 0.01f;
    base.seed = 21;
    base.eval_mode = EvalMode::Conventional;

    TrainConfig conventional = base;
    conventional.mode = TrainMode::Conventional;
    TrainConfig oat_all_pretrain = base;
    oat_all_pretrain.mode = TrainMode::Oat;
    oat_all_pretrain.pretrain_epochs = base.total_epochs;

    auto run = [&](const TrainConfig& cfg) {
        Network<float> net = init_network<float>(
            {LayerSpec::dense(2, 6), LayerSpec::relu(), LayerSpec::dense(6, 3)}, 3, 33, {2});
        return run_training(net, train, test, cfg);
    };
    const History a = run(conventional);
    const History b = run(oat_all_pretrain);
    bool ok = a.epochs.size() == b.epochs.size();
    for (std::size_t i = 0; ok && i < a.epochs.size(); ++i) {
        ok = a.epochs[i].train_loss == b.epochs[i].train_loss &&
             a.epochs[i].test_accuracy == b.epochs[i].test_accuracy;
    }
    return {"all-pretraining run matches the conventional run numerically", ok, ""};
}

PropertyResult check_epoch_partition() {
    auto [train, test] = synth_blobs(4, 10, 3, 0.5f, 3);
    bool ok = true;
    for (bool shuffle : {false, true}) {
        const auto batches = epoch_batches(train, 7, shuffle, 99, 2);
        std::vector<bool> seen(train.size(), false);
        std::size_t count = 0;
        for (const auto& batch : batches) {
            for (std::size_t idx : batch.indices) {
                ok = ok && idx < train.size() && !seen[idx];
                seen[idx] = true;
                ++count;
            }
        }
        ok = ok && count == train.size();
    }
    return {"epoch batches partition the dataset exactly", ok, ""};
}

PropertyResult check_eval_purity() {
    auto [train, test] = synth_blobs(3, 10, 2, 1.0f, 13);
    Network<float> net = init_network<float>(
        {LayerSpec::dense(2, 5), LayerSpec::relu(), LayerSpec::dense(5, 3)}, 3, 55, {2});
    const auto before_w = net.weights;
    const auto before_b = net.biases;
    for (EvalMode mode : {EvalMode::Conventional, EvalMode::OatBatched, EvalMode::OatSingle}) {
        evaluate(net, test, mode, 4);
    }
    bool ok = true;
    for (std::size_t i = 0; i < net.weights.size(); ++i) {
        ok = ok && net.weights[i].values() == before_w[i].values() &&
             net.biases[i].values() == before_b[i].values();
    }
    return {"evaluation leaves network parameters untouched", ok, ""};
}

} // namespace

double roundtrip_max_error(std::uint32_t seed, std::size_t pairs, std::size_t class_count,
                           const InverseFn& inverse) {
    std::mt19937 gen(seed);
    double worst = 0.0;
    for (std::size_t iter = 0; iter < pairs; ++iter) {
        const std::size_t b = 1 + gen() % 4;
        const auto anchor = anchor_of_outputs(random_logits(gen, b, class_count, 5.0));
        const auto labels = random_one_hot(gen, b, class_count);
        const auto targets = oat_targets(labels, anchor);
        const Tensor<float> scores =
            inverse ? inverse(anchor.probs, targets.values)
                    : inverse_transform(anchor, targets.values).values;
        for (std::size_t i = 0; i < scores.size(); ++i) {
            worst = std::max(
                worst, std::abs(double(scores.values()[i]) - double(labels.values()[i])));
        }
    }
    return worst;
}

std::vector<PropertyResult> run_all() {
    std::vector<PropertyResult> results;
    results.push_back(check_roundtrip());
    results.push_back(check_targets_minus_one());
    results.push_back(check_anchor_simplex());
    results.push_back(check_single_row_anchor());
    results.push_back(check_anchor_order_invariance());
    results.push_back(check_softmax_properties());
    results.push_back(check_matmul_identity());
    results.push_back(check_mean_single_row());
    results.push_back(check_score_sum_identity());
    results.push_back(check_oat_loss_gradient());
    results.push_back(check_network_gradients(false, GradCheckLoss::CrossEntropy,
                                              "dense net gradients match finite differences (ce)"));
    results.push_back(check_network_gradients(false, GradCheckLoss::Oat,
                                              "dense net gradients match finite differences (oat)"));
    results.push_back(check_network_gradients(true, GradCheckLoss::CrossEntropy,
                                              "conv net gradients match finite differences (ce)"));
    results.push_back(check_network_gradients(true, GradCheckLoss::Oat,
                                              "conv net gradients match finite differences (oat)"));
    results.push_back(check_training_determinism());
    results.push_back(check_eval_modes());
    results.push_back(check_pretrain_equals_conventional());
    results.push_back(check_epoch_partition());
    results.push_back(check_eval_purity());
    return results;
}

} // namespace oatlab::verify
