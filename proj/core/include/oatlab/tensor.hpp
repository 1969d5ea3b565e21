#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <string>
#include <utility>
#include <vector>

#include "oatlab/errors.hpp"

namespace oatlab {

/// Smallest divisor magnitude elementwise division accepts. Code that divides
/// by softmax outputs clamps them to this value first; raw `ewise` refuses
/// smaller divisors so accidental near-zero division fails loudly.
inline constexpr double kDivisorEpsilon = 1e-12;

/// Dense shape-tagged array, row-major. Training runs on Tensor<float>;
/// Tensor<double> exists so gradient checks can hit tight tolerances.
template <typename T>
class Tensor {
public:
    Tensor() = default;

    /// Zero-filled tensor of the given shape.
    explicit Tensor(std::vector<std::size_t> shape)
        : shape_(std::move(shape)), values_(element_count(shape_), T{}) {}

    Tensor(std::vector<std::size_t> shape, std::vector<T> values)
        : shape_(std::move(shape)), values_(std::move(values)) {
        if (element_count(shape_) != values_.size()) {
            throw ShapeError("tensor shape " + shape_string(shape_) + " expects " +
                             std::to_string(element_count(shape_)) + " values, got " +
                             std::to_string(values_.size()));
        }
    }

    /// Rank-2 tensor from row literals; rows must have equal length.
    static Tensor from_rows(std::initializer_list<std::initializer_list<T>> rows) {
        const std::size_t m = rows.size();
        const std::size_t n = m == 0 ? 0 : rows.begin()->size();
        std::vector<T> vals;
        vals.reserve(m * n);
        for (const auto& row : rows) {
            if (row.size() != n) {
                throw ShapeError("from_rows: ragged rows");
            }
            vals.insert(vals.end(), row.begin(), row.end());
        }
        return Tensor({m, n}, std::move(vals));
    }

    const std::vector<std::size_t>& shape() const { return shape_; }
    std::size_t rank() const { return shape_.size(); }
    std::size_t size() const { return values_.size(); }
    std::size_t dim(std::size_t i) const { return shape_.at(i); }

    std::size_t rows() const {
        require_rank2("rows()");
        return shape_[0];
    }
    std::size_t cols() const {
        require_rank2("cols()");
        return shape_[1];
    }

    T& at(std::size_t r, std::size_t c) { return values_[r * shape_[1] + c]; }
    const T& at(std::size_t r, std::size_t c) const { return values_[r * shape_[1] + c]; }

    std::vector<T>& values() { return values_; }
    const std::vector<T>& values() const { return values_; }
    T* data() { return values_.data(); }
    const T* data() const { return values_.data(); }

    bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }

    /// Same values under a new shape; element count must be preserved.
    Tensor reshaped(std::vector<std::size_t> new_shape) const {
        if (element_count(new_shape) != values_.size()) {
            throw ShapeError("reshape from " + shape_string(shape_) + " to " +
                             shape_string(new_shape) + " changes element count");
        }
        return Tensor(std::move(new_shape), values_);
    }

    template <typename U>
    Tensor<U> cast() const {
        std::vector<U> out(values_.size());
        for (std::size_t i = 0; i < values_.size(); ++i) {
            out[i] = static_cast<U>(values_[i]);
        }
        return Tensor<U>(shape_, std::move(out));
    }

    static std::string shape_string(const std::vector<std::size_t>& s) {
        if (s.empty()) {
            return "()";
        }
        std::string out;
        for (std::size_t i = 0; i < s.size(); ++i) {
            if (i > 0) {
                out += 'x';
            }
            out += std::to_string(s[i]);
        }
        return out;
    }
    std::string shape_string() const { return shape_string(shape_); }

private:
    static std::size_t element_count(const std::vector<std::size_t>& shape) {
        if (shape.empty()) {
            return 0;
        }
        std::size_t n = 1;
        for (std::size_t d : shape) {
            n *= d;
        }
        return n;
    }

    void require_rank2(const char* what) const {
        if (shape_.size() != 2) {
            throw ShapeError(std::string(what) + " requires a rank-2 tensor, got " +
                             shape_string(shape_));
        }
    }

    std::vector<std::size_t> shape_;
    std::vector<T> values_;
};

/// MxK by KxN matrix product. Each output element accumulates its K terms
/// left to right, so repeated runs are bit-identical.
template <typename T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b) {
    if (a.rank() != 2 || b.rank() != 2 || a.cols() != b.rows()) {
        throw ShapeError("matmul: incompatible shapes " + a.shape_string() + " and " +
                         b.shape_string());
    }
    const std::size_t m = a.rows();
    const std::size_t k = a.cols();
    const std::size_t n = b.cols();
    Tensor<T> out({m, n});
    const T* pa = a.data();
    const T* pb = b.data();
    T* po = out.data();
    for (std::size_t i = 0; i < m; ++i) {
        T* orow = po + i * n;
        for (std::size_t kk = 0; kk < k; ++kk) {
            const T aik = pa[i * k + kk];
            const T* brow = pb + kk * n;
            for (std::size_t j = 0; j < n; ++j) {
                orow[j] += aik * brow[j];
            }
        }
    }
    return out;
}

template <typename T>
Tensor<T> transpose(const Tensor<T>& a) {
    if (a.rank() != 2) {
        throw ShapeError("transpose requires a rank-2 tensor, got " + a.shape_string());
    }
    const std::size_t m = a.rows();
    const std::size_t n = a.cols();
    Tensor<T> out({n, m});
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            out.at(j, i) = a.at(i, j);
        }
    }
    return out;
}

enum class EwiseOp { Add, Sub, Mul, Div };

/// Elementwise op over equal shapes, or with `b` a 1xC row broadcast against
/// an MxC tensor `a` (how one anchor is applied to a whole batch).
/// Division refuses divisors below kDivisorEpsilon in magnitude.
template <typename T>
Tensor<T> ewise(EwiseOp op, const Tensor<T>& a, const Tensor<T>& b) {
    const bool same = a.same_shape(b);
    const bool row_broadcast = !same && a.rank() == 2 && b.rank() == 2 && b.rows() == 1 &&
                               a.cols() == b.cols();
    if (!same && !row_broadcast) {
        throw ShapeError("ewise: shapes " + a.shape_string() + " and " + b.shape_string() +
                         " neither match nor row-broadcast");
    }
    if (op == EwiseOp::Div) {
        const T lim = static_cast<T>(kDivisorEpsilon);
        for (const T& v : b.values()) {
            if (!(std::abs(v) >= lim)) { // also rejects NaN divisors
                throw DomainError("ewise div: divisor magnitude below 1e-12");
            }
        }
    }
    Tensor<T> out(a.shape());
    const T* pa = a.data();
    const T* pb = b.data();
    T* po = out.data();
    const std::size_t n = a.size();
    const std::size_t stride = row_broadcast ? b.cols() : n;
    for (std::size_t i = 0; i < n; ++i) {
        const T x = pa[i];
        const T y = pb[i % stride];
        switch (op) {
        case EwiseOp::Add: po[i] = x + y; break;
        case EwiseOp::Sub: po[i] = x - y; break;
        case EwiseOp::Mul: po[i] = x * y; break;
        case EwiseOp::Div: po[i] = x / y; break;
        }
    }
    return out;
}

template <typename T>
Tensor<T> add_scalar(const Tensor<T>& a, T s) {
    Tensor<T> out = a;
    for (T& v : out.values()) {
        v += s;
    }
    return out;
}

template <typename T>
Tensor<T> scaled(const Tensor<T>& a, T s) {
    Tensor<T> out = a;
    for (T& v : out.values()) {
        v *= s;
    }
    return out;
}

/// Row-wise softmax with per-row max subtraction; exponentials and row sums
/// are taken in double before casting back to T.
template <typename T>
Tensor<T> softmax_rows(const Tensor<T>& a) {
    if (a.rank() != 2 || a.cols() < 1) {
        throw ShapeError("softmax_rows requires an M x C tensor with C >= 1, got " +
                         a.shape_string());
    }
    const std::size_t m = a.rows();
    const std::size_t c = a.cols();
    Tensor<T> out({m, c});
    std::vector<double> row(c);
    for (std::size_t i = 0; i < m; ++i) {
        double mx = static_cast<double>(a.at(i, 0));
        for (std::size_t j = 1; j < c; ++j) {
            mx = std::max(mx, static_cast<double>(a.at(i, j)));
        }
        double sum = 0.0;
        for (std::size_t j = 0; j < c; ++j) {
            row[j] = std::exp(static_cast<double>(a.at(i, j)) - mx);
            sum += row[j];
        }
        for (std::size_t j = 0; j < c; ++j) {
            out.at(i, j) = static_cast<T>(row[j] / sum);
        }
    }
    return out;
}

/// Column-wise mean, rows accumulated in order (in double). A single-row
/// input comes back bitwise unchanged.
template <typename T>
Tensor<T> mean_rows(const Tensor<T>& a) {
    if (a.rank() != 2) {
        throw ShapeError("mean_rows requires a rank-2 tensor, got " + a.shape_string());
    }
    const std::size_t m = a.rows();
    const std::size_t c = a.cols();
    if (m == 0) {
        throw EmptyBatchError("mean_rows: empty batch (zero rows)");
    }
    Tensor<T> out({1, c});
    for (std::size_t j = 0; j < c; ++j) {
        double acc = 0.0;
        for (std::size_t i = 0; i < m; ++i) {
            acc += static_cast<double>(a.at(i, j));
        }
        out.at(0, j) = static_cast<T>(acc / static_cast<double>(m));
    }
    return out;
}

/// Per-row index of the maximum element; ties resolve to the lowest index.
template <typename T>
std::vector<std::size_t> argmax_rows(const Tensor<T>& a) {
    if (a.rank() != 2 || a.cols() < 1) {
        throw ShapeError("argmax_rows requires an M x C tensor with C >= 1, got " +
                         a.shape_string());
    }
    std::vector<std::size_t> out(a.rows());
    for (std::size_t i = 0; i < a.rows(); ++i) {
        std::size_t best = 0;
        T best_val = a.at(i, 0);
        for (std::size_t j = 1; j < a.cols(); ++j) {
            if (a.at(i, j) > best_val) {
                best_val = a.at(i, j);
                best = j;
            }
        }
        out[i] = best;
    }
    return out;
}

} // namespace oatlab
