#include "oatlab/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>

#include "oatlab/errors.hpp"

namespace oatlab {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
    return std::chrono::duration<double>(Clock::now() - start).count();
}

std::size_t true_class(const Tensor<float>& labels, std::size_t row) {
    for (std::size_t j = 0; j < labels.cols(); ++j) {
        if (labels.at(row, j) == 1.0f) {
            return j;
        }
    }
    throw ContractError("label row " + std::to_string(row) + " is not one-hot");
}

} // namespace

void validate(const TrainConfig& cfg) {
    if (cfg.total_epochs < 1) {
        throw ContractError("config: total_epochs must be >= 1");
    }
    if (cfg.pretrain_epochs > cfg.total_epochs) {
        throw ContractError("config: pretrain_epochs must not exceed total_epochs");
    }
    if (!(cfg.lr > 0.0f)) {
        throw ContractError("config: lr must be positive");
    }
    if (!(cfg.momentum >= 0.0f) || !(cfg.momentum < 1.0f)) {
        throw ContractError("config: momentum must lie in [0, 1)");
    }
    if (cfg.batch_size < 1) {
        throw ContractError("config: batch_size must be >= 1");
    }
}

EvalResult evaluate(const Network<float>& net, const Dataset& test, EvalMode mode,
                    std::size_t eval_batch_size) {
    if (test.size() == 0) {
        throw ContractError("evaluate: empty test set");
    }
    if (eval_batch_size < 1) {
        throw ContractError("evaluate: eval_batch_size must be >= 1");
    }
    const std::size_t batch_size = mode == EvalMode::OatSingle ? 1 : eval_batch_size;
    const auto start = Clock::now();
    std::size_t correct = 0;
    const std::size_t n = test.size();
    const std::vector<std::size_t> order = epoch_order(n, false, 0, 0);
    for (std::size_t at = 0; at < n; at += batch_size) {
        const Batch batch = gather_batch(test, order.data() + at, std::min(batch_size, n - at));
        const Tensor<float> out = forward_output(net, batch.inputs);
        std::vector<std::size_t> predicted;
        if (mode == EvalMode::Conventional) {
            predicted = argmax_rows(out);
        } else {
            const AnchorVector<float> anchor = anchor_of_outputs(out);
            predicted = predict_classes(inverse_transform(anchor, out));
        }
        for (std::size_t r = 0; r < batch.size(); ++r) {
            if (predicted[r] == true_class(batch.labels, r)) {
                ++correct;
            }
        }
    }
    EvalResult result;
    result.accuracy = double(correct) / double(test.size());
    result.seconds = seconds_since(start);
    return result;
}

History run_training(Network<float>& net, const Dataset& train, const Dataset& test,
                     const TrainConfig& cfg) {
    validate(cfg);
    if (net.class_count != train.class_count || net.class_count != test.class_count) {
        throw ContractError("run_training: network classes (" +
                            std::to_string(net.class_count) + ") do not match dataset (" +
                            std::to_string(train.class_count) + ")");
    }
    if (train.size() == 0) {
        throw ContractError("run_training: empty train set");
    }

    History history;
    history.config = cfg;
    history.epochs.reserve(cfg.total_epochs);

    OptimizerState<float> state = make_optimizer_state(net, cfg.lr, cfg.momentum);
    const std::size_t n_train = train.size();

    for (std::size_t epoch = 0; epoch < cfg.total_epochs; ++epoch) {
        const bool oat_phase = cfg.mode == TrainMode::Oat && epoch >= cfg.pretrain_epochs;
        const Phase phase = cfg.mode == TrainMode::Conventional ? Phase::Ce
                            : oat_phase                         ? Phase::Oat
                                                                : Phase::PretrainCe;
        // Targets jump from one-hot to anchor-relative at the switch; stale
        // velocity from the cross-entropy landscape is dropped.
        if (cfg.mode == TrainMode::Oat && epoch == cfg.pretrain_epochs &&
            cfg.pretrain_epochs > 0) {
            reset_velocity(state);
        }

        const auto train_start = Clock::now();
        double loss_acc = 0.0;
        const std::vector<std::size_t> order = epoch_order(n_train, true, cfg.seed, epoch);
        for (std::size_t at = 0; at < n_train; at += cfg.batch_size) {
            const Batch batch =
                gather_batch(train, order.data() + at, std::min(cfg.batch_size, n_train - at));
            auto [out, tape] = forward(net, batch.inputs);
            for (const float v : out.values()) {
                if (!std::isfinite(v)) {
                    throw DomainError("training diverged: non-finite outputs at epoch " +
                                      std::to_string(epoch) + "; try a smaller lr");
                }
            }
            float loss = 0.0f;
            Tensor<float> grad_out;
            if (oat_phase) {
                const AnchorVector<float> anchor = anchor_of_outputs(out);
                const OatTargets<float> targets = oat_targets(batch.labels, anchor);
                auto result = oat_loss_and_grad(targets, out);
                loss = result.loss;
                grad_out = std::move(result.grad_preds);
            } else {
                auto result = cross_entropy_loss(out, batch.labels);
                loss = result.loss;
                grad_out = std::move(result.grad_logits);
            }
            if (!std::isfinite(loss)) {
                throw DomainError("training diverged: non-finite loss at epoch " +
                                  std::to_string(epoch) + "; try a smaller lr");
            }
            const GradientSet<float> grads = backward(net, tape, grad_out);
            sgd_step(net, grads, state);
            loss_acc += double(loss) * double(batch.size());
        }
        const double train_seconds = seconds_since(train_start);

        const EvalResult eval =
            evaluate(net, test, cfg.eval_mode, cfg.effective_eval_batch_size());

        EpochMetrics metrics;
        metrics.epoch = epoch;
        metrics.phase = phase;
        metrics.train_loss = loss_acc / double(n_train);
        metrics.test_accuracy = eval.accuracy;
        metrics.train_seconds = train_seconds;
        metrics.eval_seconds = eval.seconds;
        history.epochs.push_back(metrics);
    }

    history.final_accuracy = history.epochs.back().test_accuracy;
    history.best_accuracy = 0.0;
    for (const auto& m : history.epochs) {
        history.best_accuracy = std::max(history.best_accuracy, m.test_accuracy);
    }
    return history;
}

} // namespace oatlab
