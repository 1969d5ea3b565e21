#pragma once

#include <algorithm>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "oatlab/data.hpp"
#include "oatlab/nnet.hpp"
#include "oatlab/oat.hpp"

namespace oatlab {

enum class TrainMode { Conventional, Oat };
enum class EvalMode { Conventional, OatBatched, OatSingle };
enum class Phase { PretrainCe, Oat, Ce };

inline const char* phase_name(Phase p) {
    switch (p) {
    case Phase::PretrainCe: return "pretrain_ce";
    case Phase::Oat: return "oat";
    case Phase::Ce: return "ce";
    }
    return "?";
}

/// Experiment knobs. Defaults are the reference setup: 100 epochs total with
/// a 10-epoch conventional warm start, batch 32, lr 0.001, momentum 0.9.
struct TrainConfig {
    TrainMode mode = TrainMode::Conventional;
    std::size_t total_epochs = 100;
    std::size_t pretrain_epochs = 10; // only used in Oat mode, counted inside total
    std::size_t batch_size = 32;
    float lr = 0.001f;
    float momentum = 0.9f;
    std::uint32_t seed = 0;
    std::size_t eval_batch_size = 0; // 0 means "use batch_size"
    EvalMode eval_mode = EvalMode::Conventional;

    std::size_t effective_eval_batch_size() const {
        return eval_batch_size == 0 ? batch_size : eval_batch_size;
    }
};

/// Throws ContractError if any knob is out of range.
void validate(const TrainConfig& cfg);

struct EpochMetrics {
    std::size_t epoch = 0;
    Phase phase = Phase::Ce;
    double train_loss = 0.0;
    double test_accuracy = 0.0;
    double train_seconds = 0.0;
    double eval_seconds = 0.0;
};

struct History {
    TrainConfig config;
    std::vector<EpochMetrics> epochs;
    double final_accuracy = 0.0;
    double best_accuracy = 0.0;
};

/// Trains `net` in place. Conventional mode runs cross-entropy for every
/// epoch. Oat mode runs `pretrain_epochs` of cross-entropy, resets the
/// momentum velocity, then trains the remaining epochs against
/// anchor-relative targets: forward -> batch anchor (held constant) ->
/// targets -> MSE -> backward -> step. Every epoch is evaluated on `test`
/// per cfg.eval_mode and wall-clock timed (training and evaluation
/// separately).
History run_training(Network<float>& net, const Dataset& train, const Dataset& test,
                     const TrainConfig& cfg);

struct EvalResult {
    double accuracy = 0.0;
    double seconds = 0.0;
};

/// Accuracy over the full test split, batches in dataset order with the
/// final partial batch included. Conventional mode takes the argmax of raw
/// logits; the anchor modes recover class scores through the inverse
/// transform, with OatSingle forcing batch size 1.
EvalResult evaluate(const Network<float>& net, const Dataset& test, EvalMode mode,
                    std::size_t eval_batch_size);

enum class GradCheckLoss { CrossEntropy, Oat };

/// Max relative error between analytic gradients and central finite
/// differences, |a - n| / max(|a|, |n|, 1e-12) over all parameters.
/// Intended for Network<double> and small networks. For the Oat loss the
/// targets are frozen from the unperturbed outputs so both routes
/// differentiate the same function.
template <typename T>
double grad_check(const Network<T>& net, const Batch& batch, GradCheckLoss loss_mode,
                  double h) {
    if (!(h > 0.0)) {
        throw ContractError("grad_check: step size h must be positive");
    }
    Network<T> work = net;
    const Tensor<T> x = batch.inputs.template cast<T>();
    const Tensor<T> y = batch.labels.template cast<T>();

    std::optional<OatTargets<T>> frozen;
    if (loss_mode == GradCheckLoss::Oat) {
        frozen = oat_targets(y, anchor_of_outputs(forward_output(work, x)));
    }
    auto loss_at = [&]() -> double {
        const Tensor<T> out = forward_output(work, x);
        if (loss_mode == GradCheckLoss::CrossEntropy) {
            return static_cast<double>(cross_entropy_loss(out, y).loss);
        }
        return static_cast<double>(oat_loss_and_grad(*frozen, out).loss);
    };

    auto [out, tape] = forward(work, x);
    const Tensor<T> grad_out = loss_mode == GradCheckLoss::CrossEntropy
                                   ? cross_entropy_loss(out, y).grad_logits
                                   : oat_loss_and_grad(*frozen, out).grad_preds;
    const GradientSet<T> grads = backward(work, tape, grad_out);

    double max_rel = 0.0;
    auto check_tensor = [&](Tensor<T>& param, const Tensor<T>& grad) {
        for (std::size_t i = 0; i < param.size(); ++i) {
            const T saved = param.values()[i];
            param.values()[i] = saved + static_cast<T>(h);
            const double up = loss_at();
            param.values()[i] = saved - static_cast<T>(h);
            const double down = loss_at();
            param.values()[i] = saved;
            const double numeric = (up - down) / (2.0 * h);
            const double analytic = static_cast<double>(grad.values()[i]);
            const double denom =
                std::max({std::abs(analytic), std::abs(numeric), 1e-12});
            max_rel = std::max(max_rel, std::abs(analytic - numeric) / denom);
        }
    };
    for (std::size_t l = 0; l < work.layers.size(); ++l) {
        check_tensor(work.weights[l], grads.weights[l]);
        check_tensor(work.biases[l], grads.biases[l]);
    }
    return max_rel;
}

} // namespace oatlab
