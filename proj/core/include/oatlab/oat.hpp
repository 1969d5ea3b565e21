#pragma once

#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include "oatlab/errors.hpp"
#include "oatlab/tensor.hpp"

namespace oatlab {

/// Probability-simplex vector over the classes: softmax of a batch center.
/// Every entry is positive and the entries sum to 1 (within float rounding).
template <typename T>
struct AnchorVector {
    Tensor<T> probs; // 1 x C
    std::size_t class_count() const { return probs.size(); }
};

/// Anchor-relative regression targets, c / a - 1 per element. Non-true-class
/// entries are exactly -1; the true-class entry is 1/a_c - 1 >= 0.
template <typename T>
struct OatTargets {
    Tensor<T> values; // B x C
};

/// Class-label-space scores recovered from predicted offsets, a * (t + 1).
/// Not a probability distribution in general.
template <typename T>
struct ClassScores {
    Tensor<T> values; // B x C
};

namespace detail {

template <typename T>
void require_one_hot(const Tensor<T>& labels, const char* who) {
    if (labels.rank() != 2) {
        throw ShapeError(std::string(who) + ": labels must be B x C, got " +
                         labels.shape_string());
    }
    for (std::size_t i = 0; i < labels.rows(); ++i) {
        std::size_t ones = 0;
        bool clean = true;
        for (std::size_t j = 0; j < labels.cols(); ++j) {
            const T v = labels.at(i, j);
            if (v == T(1)) {
                ++ones;
            } else if (v != T(0)) {
                clean = false;
            }
        }
        if (!clean || ones != 1) {
            throw ContractError(std::string(who) + ": label row " + std::to_string(i) +
                                " is not one-hot");
        }
    }
}

} // namespace detail

/// Anchor of a batch of raw model outputs: softmax of the column-wise mean.
/// Shared by every sample of the batch, and treated as a constant by the
/// training step (no gradient flows through it). With a single row the mean
/// is the identity, so the anchor equals the softmax of that row exactly.
template <typename T>
AnchorVector<T> anchor_of_outputs(const Tensor<T>& outputs) {
    if (outputs.rank() != 2) {
        throw ShapeError("anchor_of_outputs: expected B x C outputs, got " +
                         outputs.shape_string());
    }
    if (outputs.rows() == 0) {
        throw EmptyBatchError("anchor_of_outputs: empty batch");
    }
    return {softmax_rows(mean_rows(outputs))};
}

/// Targets expressing each one-hot label as a percentage change against the
/// anchor: t = c / a - 1, the anchor row broadcast over the batch. Anchor
/// entries are clamped to kDivisorEpsilon before dividing so a softmax that
/// underflowed to zero cannot produce infinities.
template <typename T>
OatTargets<T> oat_targets(const Tensor<T>& labels, const AnchorVector<T>& anchor) {
    detail::require_one_hot(labels, "oat_targets");
    if (anchor.probs.rank() != 2 || anchor.probs.rows() != 1 ||
        anchor.probs.cols() != labels.cols()) {
        throw ShapeError("oat_targets: anchor " + anchor.probs.shape_string() +
                         " does not match labels " + labels.shape_string());
    }
    Tensor<T> clamped = anchor.probs;
    for (T& v : clamped.values()) {
        if (v < static_cast<T>(kDivisorEpsilon)) {
            v = static_cast<T>(kDivisorEpsilon);
        }
    }
    return {add_scalar(ewise(EwiseOp::Div, labels, clamped), T(-1))};
}

template <typename T>
struct OatLossResult {
    T loss;
    Tensor<T> grad_preds;
};

/// Mean squared error over all B*C elements between targets and predicted
/// offsets, with gradient 2 * (pred - target) / (B*C).
template <typename T>
OatLossResult<T> oat_loss_and_grad(const OatTargets<T>& targets, const Tensor<T>& preds) {
    if (!targets.values.same_shape(preds) || preds.rank() != 2) {
        throw ShapeError("oat_loss_and_grad: targets " + targets.values.shape_string() +
                         " vs preds " + preds.shape_string());
    }
    const std::size_t n = preds.size();
    double acc = 0.0;
    const T* pt = targets.values.data();
    const T* pp = preds.data();
    for (std::size_t i = 0; i < n; ++i) {
        const double d = static_cast<double>(pt[i]) - static_cast<double>(pp[i]);
        acc += d * d;
    }
    Tensor<T> grad = scaled(ewise(EwiseOp::Sub, preds, targets.values),
                            T(2) / static_cast<T>(n));
    return {static_cast<T>(acc / static_cast<double>(n)), std::move(grad)};
}

/// Back to class-label space: scores = anchor * (preds + 1), the anchor row
/// broadcast over the batch.
template <typename T>
ClassScores<T> inverse_transform(const AnchorVector<T>& anchor, const Tensor<T>& preds) {
    if (preds.rank() != 2 || anchor.probs.rank() != 2 || anchor.probs.rows() != 1 ||
        anchor.probs.cols() != preds.cols()) {
        throw ShapeError("inverse_transform: anchor " + anchor.probs.shape_string() +
                         " does not match preds " + preds.shape_string());
    }
    return {ewise(EwiseOp::Mul, add_scalar(preds, T(1)), anchor.probs)};
}

/// Predicted class per row: argmax of the recovered scores, lowest index wins ties.
template <typename T>
std::vector<std::size_t> predict_classes(const ClassScores<T>& scores) {
    return argmax_rows(scores.values);
}

} // namespace oatlab
