#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "oatlab/errors.hpp"
#include "oatlab/tensor.hpp"

namespace oatlab {

/// One layer of a feed-forward stack. Convolutions are stride-1 with no
/// padding; pooling is fixed 2x2.
struct LayerSpec {
    enum class Kind { Dense, Relu, Conv2d, MaxPool2x2, Flatten };

    Kind kind = Kind::Relu;
    std::size_t in = 0;           // Dense
    std::size_t out = 0;          // Dense
    std::size_t in_channels = 0;  // Conv2d
    std::size_t out_channels = 0; // Conv2d
    std::size_t kernel = 0;       // Conv2d, k x k

    static LayerSpec dense(std::size_t in, std::size_t out) {
        LayerSpec s;
        s.kind = Kind::Dense;
        s.in = in;
        s.out = out;
        return s;
    }
    static LayerSpec relu() {
        LayerSpec s;
        s.kind = Kind::Relu;
        return s;
    }
    static LayerSpec conv2d(std::size_t in_ch, std::size_t out_ch, std::size_t kernel) {
        LayerSpec s;
        s.kind = Kind::Conv2d;
        s.in_channels = in_ch;
        s.out_channels = out_ch;
        s.kernel = kernel;
        return s;
    }
    static LayerSpec maxpool2x2() {
        LayerSpec s;
        s.kind = Kind::MaxPool2x2;
        return s;
    }
    static LayerSpec flatten() {
        LayerSpec s;
        s.kind = Kind::Flatten;
        return s;
    }

    bool has_params() const { return kind == Kind::Dense || kind == Kind::Conv2d; }
};

inline const char* layer_kind_name(LayerSpec::Kind kind) {
    switch (kind) {
    case LayerSpec::Kind::Dense: return "dense";
    case LayerSpec::Kind::Relu: return "relu";
    case LayerSpec::Kind::Conv2d: return "conv2d";
    case LayerSpec::Kind::MaxPool2x2: return "maxpool2x2";
    case LayerSpec::Kind::Flatten: return "flatten";
    }
    return "?";
}

/// Ordered layer stack plus its parameters. `weights`/`biases` run parallel
/// to `layers`, with empty tensors at parameter-free layers. `net_id` and
/// `revision` let backward() reject tapes recorded against a different state.
template <typename T>
struct Network {
    std::vector<LayerSpec> layers;
    std::vector<std::size_t> input_shape; // per sample, batch dim excluded
    std::vector<Tensor<T>> weights;
    std::vector<Tensor<T>> biases;
    std::size_t class_count = 0;
    std::uint64_t net_id = 0;
    std::uint64_t revision = 0;
};

template <typename T>
struct GradientSet {
    std::vector<Tensor<T>> weights;
    std::vector<Tensor<T>> biases;
};

template <typename T>
struct OptimizerState {
    std::vector<Tensor<T>> velocity_w;
    std::vector<Tensor<T>> velocity_b;
    T lr{};
    T momentum{};
};

/// Per-layer inputs cached by forward(); consumed by backward().
template <typename T>
struct ForwardTape {
    std::vector<Tensor<T>> inputs;
    std::uint64_t net_id = 0;
    std::uint64_t revision = 0;
};

/// Per-sample output shape of every layer given the per-sample input shape.
/// Throws ShapeError at the first boundary that does not chain.
inline std::vector<std::vector<std::size_t>> infer_layer_shapes(
    const std::vector<LayerSpec>& layers, const std::vector<std::size_t>& input_shape) {
    if (input_shape.empty()) {
        throw ShapeError("network input shape must be non-empty");
    }
    for (std::size_t d : input_shape) {
        if (d == 0) {
            throw ShapeError("network input shape has a zero dimension");
        }
    }
    auto flat = [](const std::vector<std::size_t>& s) {
        std::size_t n = 1;
        for (std::size_t d : s) {
            n *= d;
        }
        return n;
    };
    std::vector<std::vector<std::size_t>> shapes;
    shapes.reserve(layers.size());
    std::vector<std::size_t> cur = input_shape;
    for (std::size_t i = 0; i < layers.size(); ++i) {
        const LayerSpec& layer = layers[i];
        const std::string where =
            "layer " + std::to_string(i) + " (" + layer_kind_name(layer.kind) + "): ";
        switch (layer.kind) {
        case LayerSpec::Kind::Dense:
            if (cur.size() != 1) {
                throw ShapeError(where + "expects flat input, got " +
                                 Tensor<float>::shape_string(cur) + "; add a flatten layer");
            }
            if (cur[0] != layer.in) {
                throw ShapeError(where + "expects input dim " + std::to_string(layer.in) +
                                 ", got " + std::to_string(cur[0]));
            }
            if (layer.out == 0) {
                throw ShapeError(where + "output dim must be positive");
            }
            cur = {layer.out};
            break;
        case LayerSpec::Kind::Relu:
            break;
        case LayerSpec::Kind::Conv2d: {
            if (cur.size() != 3) {
                throw ShapeError(where + "expects ch x h x w input, got " +
                                 Tensor<float>::shape_string(cur));
            }
            if (cur[0] != layer.in_channels) {
                throw ShapeError(where + "expects " + std::to_string(layer.in_channels) +
                                 " input channels, got " + std::to_string(cur[0]));
            }
            if (layer.kernel == 0 || layer.out_channels == 0) {
                throw ShapeError(where + "kernel and output channels must be positive");
            }
            if (cur[1] < layer.kernel || cur[2] < layer.kernel) {
                throw ShapeError(where + "kernel " + std::to_string(layer.kernel) +
                                 " larger than input " + std::to_string(cur[1]) + "x" +
                                 std::to_string(cur[2]));
            }
            cur = {layer.out_channels, cur[1] - layer.kernel + 1, cur[2] - layer.kernel + 1};
            break;
        }
        case LayerSpec::Kind::MaxPool2x2:
            if (cur.size() != 3) {
                throw ShapeError(where + "expects ch x h x w input, got " +
                                 Tensor<float>::shape_string(cur));
            }
            if (cur[1] % 2 != 0 || cur[2] % 2 != 0) {
                throw ShapeError(where + "input " + std::to_string(cur[1]) + "x" +
                                 std::to_string(cur[2]) + " not divisible by 2");
            }
            cur = {cur[0], cur[1] / 2, cur[2] / 2};
            break;
        case LayerSpec::Kind::Flatten:
            cur = {flat(cur)};
            break;
        }
        shapes.push_back(cur);
    }
    return shapes;
}

namespace detail {

/// 53-bit uniform in [0,1) built directly from the engine stream; avoids
/// std::uniform_real_distribution so draws are pinned to the seed alone.
inline double unit_uniform(std::mt19937& gen) {
    const std::uint64_t hi = gen() >> 5; // 27 bits
    const std::uint64_t lo = gen() >> 6; // 26 bits
    return static_cast<double>((hi << 26) | lo) * (1.0 / 9007199254740992.0);
}

inline std::uint64_t next_network_id() {
    static std::atomic<std::uint64_t> counter{1};
    return counter.fetch_add(1);
}

} // namespace detail

/// Builds a network with Glorot-uniform weights (bound sqrt(6/(fan_in+fan_out)))
/// and zero biases, fully determined by `seed`. The layer chain is validated
/// against `input_shape` and the final layer must be dense with `class_count`
/// outputs.
template <typename T>
Network<T> init_network(const std::vector<LayerSpec>& layers, std::size_t class_count,
                        std::uint32_t seed, const std::vector<std::size_t>& input_shape) {
    const auto shapes = infer_layer_shapes(layers, input_shape);
    if (layers.empty() || layers.back().kind != LayerSpec::Kind::Dense ||
        layers.back().out != class_count) {
        throw ContractError("final layer must be dense with out == class_count (" +
                            std::to_string(class_count) + ")");
    }
    Network<T> net;
    net.layers = layers;
    net.input_shape = input_shape;
    net.class_count = class_count;
    net.net_id = detail::next_network_id();
    net.weights.resize(layers.size());
    net.biases.resize(layers.size());

    std::mt19937 gen(seed);
    auto glorot = [&](Tensor<T>& w, std::size_t fan_in, std::size_t fan_out) {
        const double bound = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
        for (T& v : w.values()) {
            v = static_cast<T>((2.0 * detail::unit_uniform(gen) - 1.0) * bound);
        }
    };
    for (std::size_t i = 0; i < layers.size(); ++i) {
        const LayerSpec& layer = layers[i];
        if (layer.kind == LayerSpec::Kind::Dense) {
            net.weights[i] = Tensor<T>({layer.in, layer.out});
            net.biases[i] = Tensor<T>({1, layer.out});
            glorot(net.weights[i], layer.in, layer.out);
        } else if (layer.kind == LayerSpec::Kind::Conv2d) {
            net.weights[i] =
                Tensor<T>({layer.out_channels, layer.in_channels, layer.kernel, layer.kernel});
            net.biases[i] = Tensor<T>({1, layer.out_channels});
            glorot(net.weights[i], layer.in_channels * layer.kernel * layer.kernel,
                   layer.out_channels * layer.kernel * layer.kernel);
        }
    }
    return net;
}

template <typename T>
std::size_t param_count(const Network<T>& net) {
    std::size_t n = 0;
    for (const auto& w : net.weights) {
        n += w.size();
    }
    for (const auto& b : net.biases) {
        n += b.size();
    }
    return n;
}

namespace detail {

template <typename T>
Tensor<T> relu_forward(const Tensor<T>& x) {
    Tensor<T> out = x;
    for (T& v : out.values()) {
        if (v < T{}) {
            v = T{};
        }
    }
    return out;
}

template <typename T>
Tensor<T> conv2d_forward(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& b) {
    const std::size_t batch = x.dim(0);
    const std::size_t in_ch = x.dim(1);
    const std::size_t h = x.dim(2);
    const std::size_t wd = x.dim(3);
    const std::size_t out_ch = w.dim(0);
    const std::size_t k = w.dim(2);
    const std::size_t oh = h - k + 1;
    const std::size_t ow = wd - k + 1;
    Tensor<T> out({batch, out_ch, oh, ow});
    const T* px = x.data();
    const T* pw = w.data();
    T* po = out.data();
    // every output element accumulates bias first, then taps in (ic, ky, kx)
    // order; the output row is the inner loop so it vectorizes
    for (std::size_t n = 0; n < batch; ++n) {
        for (std::size_t oc = 0; oc < out_ch; ++oc) {
            T* oplane = po + (n * out_ch + oc) * oh * ow;
            const T bias = b.data()[oc];
            for (std::size_t i = 0; i < oh * ow; ++i) {
                oplane[i] = bias;
            }
            for (std::size_t ic = 0; ic < in_ch; ++ic) {
                const T* xplane = px + (n * in_ch + ic) * h * wd;
                const T* wc = pw + (oc * in_ch + ic) * k * k;
                for (std::size_t ky = 0; ky < k; ++ky) {
                    for (std::size_t kx = 0; kx < k; ++kx) {
                        const T wv = wc[ky * k + kx];
                        for (std::size_t oy = 0; oy < oh; ++oy) {
                            const T* xrow = xplane + (oy + ky) * wd + kx;
                            T* orow = oplane + oy * ow;
                            for (std::size_t ox = 0; ox < ow; ++ox) {
                                orow[ox] += wv * xrow[ox];
                            }
                        }
                    }
                }
            }
        }
    }
    return out;
}

template <typename T>
Tensor<T> maxpool2x2_forward(const Tensor<T>& x) {
    const std::size_t batch = x.dim(0);
    const std::size_t ch = x.dim(1);
    const std::size_t h = x.dim(2);
    const std::size_t w = x.dim(3);
    Tensor<T> out({batch, ch, h / 2, w / 2});
    const T* px = x.data();
    T* po = out.data();
    const std::size_t oh = h / 2;
    const std::size_t ow = w / 2;
    for (std::size_t n = 0; n < batch; ++n) {
        for (std::size_t c = 0; c < ch; ++c) {
            const T* plane = px + (n * ch + c) * h * w;
            T* oplane = po + (n * ch + c) * oh * ow;
            for (std::size_t oy = 0; oy < oh; ++oy) {
                for (std::size_t ox = 0; ox < ow; ++ox) {
                    // ties keep the first element in scan order
                    T best = plane[(2 * oy) * w + 2 * ox];
                    for (std::size_t dy = 0; dy < 2; ++dy) {
                        for (std::size_t dx = 0; dx < 2; ++dx) {
                            const T v = plane[(2 * oy + dy) * w + 2 * ox + dx];
                            if (v > best) {
                                best = v;
                            }
                        }
                    }
                    oplane[oy * ow + ox] = best;
                }
            }
        }
    }
    return out;
}

template <typename T>
Tensor<T> run_forward(const Network<T>& net, const Tensor<T>& inputs, ForwardTape<T>* tape) {
    if (inputs.rank() < 2) {
        throw ShapeError("forward input must carry a batch dimension, got " +
                         inputs.shape_string());
    }
    std::vector<std::size_t> per_sample(inputs.shape().begin() + 1, inputs.shape().end());
    if (per_sample != net.input_shape) {
        throw ShapeError("forward input shape " + Tensor<T>::shape_string(per_sample) +
                         " does not match network input " +
                         Tensor<T>::shape_string(net.input_shape));
    }
    if (inputs.dim(0) == 0) {
        throw EmptyBatchError("forward: empty batch");
    }
    if (tape != nullptr) {
        tape->inputs.clear();
        tape->inputs.reserve(net.layers.size());
        tape->net_id = net.net_id;
        tape->revision = net.revision;
    }
    const std::size_t batch = inputs.dim(0);
    Tensor<T> cur = inputs;
    for (std::size_t i = 0; i < net.layers.size(); ++i) {
        if (tape != nullptr) {
            tape->inputs.push_back(cur);
        }
        const LayerSpec& layer = net.layers[i];
        switch (layer.kind) {
        case LayerSpec::Kind::Dense:
            cur = ewise(EwiseOp::Add, matmul(cur, net.weights[i]), net.biases[i]);
            break;
        case LayerSpec::Kind::Relu:
            cur = relu_forward(cur);
            break;
        case LayerSpec::Kind::Conv2d:
            cur = conv2d_forward(cur, net.weights[i], net.biases[i]);
            break;
        case LayerSpec::Kind::MaxPool2x2:
            cur = maxpool2x2_forward(cur);
            break;
        case LayerSpec::Kind::Flatten:
            cur = cur.reshaped({batch, cur.size() / batch});
            break;
        }
    }
    return cur;
}

} // namespace detail

/// Forward pass returning raw logits and the activation tape backward() needs.
template <typename T>
std::pair<Tensor<T>, ForwardTape<T>> forward(const Network<T>& net, const Tensor<T>& inputs) {
    ForwardTape<T> tape;
    Tensor<T> out = detail::run_forward(net, inputs, &tape);
    return {std::move(out), std::move(tape)};
}

/// Forward pass without activation caching, for evaluation.
template <typename T>
Tensor<T> forward_output(const Network<T>& net, const Tensor<T>& inputs) {
    return detail::run_forward<T>(net, inputs, nullptr);
}

/// Analytic gradients of every parameter given d(loss)/d(output). The tape
/// must come from a forward() on this network in its current state.
template <typename T>
GradientSet<T> backward(const Network<T>& net, const ForwardTape<T>& tape,
                        const Tensor<T>& grad_output) {
    if (tape.net_id != net.net_id || tape.revision != net.revision ||
        tape.inputs.size() != net.layers.size()) {
        throw ContractError("backward: tape does not match the network's current state");
    }
    GradientSet<T> grads;
    grads.weights.resize(net.layers.size());
    grads.biases.resize(net.layers.size());

    Tensor<T> dy = grad_output;
    for (std::size_t idx = net.layers.size(); idx-- > 0;) {
        const LayerSpec& layer = net.layers[idx];
        const Tensor<T>& x = tape.inputs[idx];
        switch (layer.kind) {
        case LayerSpec::Kind::Dense: {
            if (dy.rank() != 2 || dy.cols() != layer.out || dy.rows() != x.dim(0)) {
                throw ShapeError("backward: gradient shape " + dy.shape_string() +
                                 " does not match dense layer output");
            }
            grads.weights[idx] = matmul(transpose(x), dy);
            Tensor<T> db({1, layer.out});
            for (std::size_t b = 0; b < dy.rows(); ++b) {
                for (std::size_t j = 0; j < layer.out; ++j) {
                    db.at(0, j) += dy.at(b, j);
                }
            }
            grads.biases[idx] = std::move(db);
            dy = matmul(dy, transpose(net.weights[idx]));
            break;
        }
        case LayerSpec::Kind::Relu: {
            Tensor<T> dx = dy;
            const T* px = x.data();
            T* pd = dx.data();
            for (std::size_t i = 0; i < dx.size(); ++i) {
                if (!(px[i] > T{})) {
                    pd[i] = T{};
                }
            }
            dy = std::move(dx);
            break;
        }
        case LayerSpec::Kind::Conv2d: {
            const std::size_t batch = x.dim(0);
            const std::size_t in_ch = x.dim(1);
            const std::size_t h = x.dim(2);
            const std::size_t w = x.dim(3);
            const std::size_t out_ch = layer.out_channels;
            const std::size_t k = layer.kernel;
            const std::size_t oh = h - k + 1;
            const std::size_t ow = w - k + 1;
            Tensor<T> dw(net.weights[idx].shape());
            Tensor<T> db({1, out_ch});
            Tensor<T> dx(x.shape());
            const T* pdy = dy.data();
            const T* px = x.data();
            const T* pw = net.weights[idx].data();
            for (std::size_t oc = 0; oc < out_ch; ++oc) {
                T bacc{};
                for (std::size_t n = 0; n < batch; ++n) {
                    const T* dplane = pdy + (n * out_ch + oc) * oh * ow;
                    for (std::size_t i = 0; i < oh * ow; ++i) {
                        bacc += dplane[i];
                    }
                }
                db.at(0, oc) = bacc;
                for (std::size_t ic = 0; ic < in_ch; ++ic) {
                    for (std::size_t ky = 0; ky < k; ++ky) {
                        for (std::size_t kx = 0; kx < k; ++kx) {
                            T acc{};
                            for (std::size_t n = 0; n < batch; ++n) {
                                const T* dplane = pdy + (n * out_ch + oc) * oh * ow;
                                const T* xplane = px + (n * in_ch + ic) * h * w;
                                for (std::size_t oy = 0; oy < oh; ++oy) {
                                    for (std::size_t ox = 0; ox < ow; ++ox) {
                                        acc += dplane[oy * ow + ox] *
                                               xplane[(oy + ky) * w + ox + kx];
                                    }
                                }
                            }
                            dw.values()[((oc * in_ch + ic) * k + ky) * k + kx] = acc;
                        }
                    }
                }
            }
            T* pdx = dx.data();
            for (std::size_t n = 0; n < batch; ++n) {
                for (std::size_t ic = 0; ic < in_ch; ++ic) {
                    T* xplane = pdx + (n * in_ch + ic) * h * w;
                    for (std::size_t oc = 0; oc < out_ch; ++oc) {
                        const T* dplane = pdy + (n * out_ch + oc) * oh * ow;
                        const T* wc = pw + (oc * in_ch + ic) * k * k;
                        for (std::size_t ky = 0; ky < k; ++ky) {
                            for (std::size_t kx = 0; kx < k; ++kx) {
                                const T wv = wc[ky * k + kx];
                                for (std::size_t oy = 0; oy < oh; ++oy) {
                                    const T* drow = dplane + oy * ow;
                                    T* xrow = xplane + (oy + ky) * w + kx;
                                    for (std::size_t ox = 0; ox < ow; ++ox) {
                                        xrow[ox] += drow[ox] * wv;
                                    }
                                }
                            }
                        }
                    }
                }
            }
            grads.weights[idx] = std::move(dw);
            grads.biases[idx] = std::move(db);
            dy = std::move(dx);
            break;
        }
        case LayerSpec::Kind::MaxPool2x2: {
            const std::size_t batch = x.dim(0);
            const std::size_t ch = x.dim(1);
            const std::size_t h = x.dim(2);
            const std::size_t w = x.dim(3);
            const std::size_t oh = h / 2;
            const std::size_t ow = w / 2;
            Tensor<T> dx(x.shape());
            const T* px = x.data();
            const T* pdy = dy.data();
            T* pdx = dx.data();
            for (std::size_t n = 0; n < batch; ++n) {
                for (std::size_t c = 0; c < ch; ++c) {
                    const T* plane = px + (n * ch + c) * h * w;
                    const T* dplane = pdy + (n * ch + c) * oh * ow;
                    T* xplane = pdx + (n * ch + c) * h * w;
                    for (std::size_t oy = 0; oy < oh; ++oy) {
                        for (std::size_t ox = 0; ox < ow; ++ox) {
                            std::size_t best = (2 * oy) * w + 2 * ox;
                            for (std::size_t dyi = 0; dyi < 2; ++dyi) {
                                for (std::size_t dxi = 0; dxi < 2; ++dxi) {
                                    const std::size_t at = (2 * oy + dyi) * w + 2 * ox + dxi;
                                    if (plane[at] > plane[best]) {
                                        best = at;
                                    }
                                }
                            }
                            xplane[best] += dplane[oy * ow + ox];
                        }
                    }
                }
            }
            dy = std::move(dx);
            break;
        }
        case LayerSpec::Kind::Flatten:
            dy = dy.reshaped(x.shape());
            break;
        }
    }
    return grads;
}

template <typename T>
struct CrossEntropyResult {
    T loss;
    Tensor<T> grad_logits;
};

/// Mean negative log-softmax of the true class, with gradient
/// (softmax - labels) / B. Log-sum-exp runs with per-row max subtraction.
/// Label rows must be exactly one-hot.
template <typename T>
CrossEntropyResult<T> cross_entropy_loss(const Tensor<T>& logits, const Tensor<T>& labels) {
    if (logits.rank() != 2 || !logits.same_shape(labels)) {
        throw ShapeError("cross_entropy_loss: logits " + logits.shape_string() +
                         " vs labels " + labels.shape_string());
    }
    const std::size_t batch = logits.rows();
    const std::size_t c = logits.cols();
    if (batch == 0) {
        throw EmptyBatchError("cross_entropy_loss: empty batch");
    }
    double acc = 0.0;
    for (std::size_t i = 0; i < batch; ++i) {
        std::size_t ones = 0;
        std::size_t true_class = 0;
        for (std::size_t j = 0; j < c; ++j) {
            const T v = labels.at(i, j);
            if (v == T(1)) {
                ++ones;
                true_class = j;
            } else if (v != T(0)) {
                throw ContractError("cross_entropy_loss: label row " + std::to_string(i) +
                                    " is not one-hot");
            }
        }
        if (ones != 1) {
            throw ContractError("cross_entropy_loss: label row " + std::to_string(i) +
                                " is not one-hot");
        }
        double mx = static_cast<double>(logits.at(i, 0));
        for (std::size_t j = 1; j < c; ++j) {
            mx = std::max(mx, static_cast<double>(logits.at(i, j)));
        }
        double sum = 0.0;
        for (std::size_t j = 0; j < c; ++j) {
            sum += std::exp(static_cast<double>(logits.at(i, j)) - mx);
        }
        acc += mx + std::log(sum) - static_cast<double>(logits.at(i, true_class));
    }
    Tensor<T> grad =
        scaled(ewise(EwiseOp::Sub, softmax_rows(logits), labels), T(1) / static_cast<T>(batch));
    return {static_cast<T>(acc / static_cast<double>(batch)), std::move(grad)};
}

template <typename T>
OptimizerState<T> make_optimizer_state(const Network<T>& net, T lr, T momentum) {
    if (!(lr > T(0))) {
        throw ContractError("optimizer: lr must be positive");
    }
    if (!(momentum >= T(0)) || !(momentum < T(1))) {
        throw ContractError("optimizer: momentum must lie in [0, 1)");
    }
    OptimizerState<T> state;
    state.lr = lr;
    state.momentum = momentum;
    state.velocity_w.reserve(net.weights.size());
    state.velocity_b.reserve(net.biases.size());
    for (const auto& w : net.weights) {
        state.velocity_w.emplace_back(w.shape().empty() ? Tensor<T>{} : Tensor<T>(w.shape()));
    }
    for (const auto& b : net.biases) {
        state.velocity_b.emplace_back(b.shape().empty() ? Tensor<T>{} : Tensor<T>(b.shape()));
    }
    return state;
}

template <typename T>
void reset_velocity(OptimizerState<T>& state) {
    for (auto& v : state.velocity_w) {
        std::fill(v.values().begin(), v.values().end(), T{});
    }
    for (auto& v : state.velocity_b) {
        std::fill(v.values().begin(), v.values().end(), T{});
    }
}

/// Heavy-ball step: v <- momentum * v - lr * g; w <- w + v.
template <typename T>
void sgd_step(Network<T>& net, const GradientSet<T>& grads, OptimizerState<T>& state) {
    if (grads.weights.size() != net.weights.size() ||
        state.velocity_w.size() != net.weights.size()) {
        throw ShapeError("sgd_step: gradient/state layer count mismatch");
    }
    auto apply = [&](Tensor<T>& w, const Tensor<T>& g, Tensor<T>& v) {
        if (w.size() == 0) {
            return;
        }
        if (!w.same_shape(g) || !w.same_shape(v)) {
            throw ShapeError("sgd_step: parameter shape " + w.shape_string() +
                             " vs gradient " + g.shape_string());
        }
        T* pw = w.data();
        const T* pg = g.data();
        T* pv = v.data();
        for (std::size_t i = 0; i < w.size(); ++i) {
            pv[i] = state.momentum * pv[i] - state.lr * pg[i];
            pw[i] += pv[i];
        }
    };
    for (std::size_t i = 0; i < net.weights.size(); ++i) {
        apply(net.weights[i], grads.weights[i], state.velocity_w[i]);
        apply(net.biases[i], grads.biases[i], state.velocity_b[i]);
    }
    ++net.revision;
}

} // namespace oatlab
