#pragma once

#include <functional>
#include <memory>
#include <span>
#include <vector>

#include "rdaf/common.hpp"

namespace rdaf {

namespace detail {

template <typename T>
struct Node {
    Shape shape;
    std::vector<T> value;
    bool requires_grad = false;  // user-set on leaves
    bool needs_grad = false;     // reachable from a requires_grad leaf
    bool consumed = false;       // set once backward() ran through this root
    std::vector<T> grad;         // allocated lazily, same extents as value
    std::vector<std::shared_ptr<Node>> parents;
    std::function<void(Node&)> backward_fn;  // empty for leaves
};

}  // namespace detail

/// Rank-4 NCHW tensor participating in a single-use reverse-mode graph.
/// Handles share the underlying node (copying a Tensor aliases it).
/// Values are immutable once the tensor entered a graph; leaf data may be
/// rewritten between graphs (optimizer updates). Gradients accumulate with
/// += across backward() calls until zero_grad().
template <typename T>
class Tensor {
  public:
    using Scalar = T;

    Tensor() = default;

    static Tensor zeros(Shape s, bool requires_grad = false) {
        return full(s, T(0), requires_grad);
    }

    static Tensor full(Shape s, T v, bool requires_grad = false) {
        RDAF_CHECK(s.valid(), "tensor: invalid shape ", s);
        Tensor t;
        t.node_ = std::make_shared<detail::Node<T>>();
        t.node_->shape = s;
        t.node_->value.assign(static_cast<size_t>(s.numel()), v);
        t.node_->requires_grad = requires_grad;
        t.node_->needs_grad = requires_grad;
        return t;
    }

    static Tensor from_data(Shape s, std::vector<T> data, bool requires_grad = false) {
        RDAF_CHECK(s.valid(), "tensor: invalid shape ", s);
        RDAF_CHECK(static_cast<i64>(data.size()) == s.numel(),
                   "tensor: data length ", data.size(), " != numel of ", s);
        Tensor t;
        t.node_ = std::make_shared<detail::Node<T>>();
        t.node_->shape = s;
        t.node_->value = std::move(data);
        t.node_->requires_grad = requires_grad;
        t.node_->needs_grad = requires_grad;
        return t;
    }

    bool defined() const { return node_ != nullptr; }
    const Shape& shape() const { return node_->shape; }
    i64 numel() const { return node_->shape.numel(); }

    std::span<const T> data() const { return node_->value; }
    /// Leaf mutation hook for optimizers; call only between graphs.
    std::span<T> data_mut() { return node_->value; }

    T at(i64 n, i64 c, i64 y, i64 x) const {
        const Shape& s = node_->shape;
        return node_->value[static_cast<size_t>(((n * s.c + c) * s.h + y) * s.w + x)];
    }

    /// Scalar extraction; requires numel()==1.
    T item() const {
        RDAF_CHECK(numel() == 1, "item: tensor is not scalar, shape ", shape());
        return node_->value[0];
    }

    bool requires_grad() const { return node_->requires_grad; }
    bool has_grad() const { return !node_->grad.empty(); }
    std::span<const T> grad() const {
        RDAF_CHECK(has_grad(), "grad: no gradient populated");
        return node_->grad;
    }
    void zero_grad() { node_->grad.clear(); }

    std::shared_ptr<detail::Node<T>> node() const { return node_; }

    /// Wraps an existing graph node; used by op implementations.
    static Tensor from_node(std::shared_ptr<detail::Node<T>> n) {
        Tensor t;
        t.node_ = std::move(n);
        return t;
    }

  private:
    std::shared_ptr<detail::Node<T>> node_;
};

using TensorF = Tensor<float>;
using TensorD = Tensor<double>;

// ---- elementwise / reduction ops ----

template <typename T> Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b);
template <typename T> Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b);
template <typename T> Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b);
template <typename T> Tensor<T> scale(const Tensor<T>& a, T s);
template <typename T> Tensor<T> relu(const Tensor<T>& a);
template <typename T> Tensor<T> sigmoid(const Tensor<T>& a);
template <typename T> Tensor<T> abs(const Tensor<T>& a);
/// sqrt(re^2 + im^2) elementwise; gradient 0 where the modulus is 0.
template <typename T> Tensor<T> complex_abs(const Tensor<T>& re, const Tensor<T>& im);
/// Sum of all elements as a (1,1,1,1) tensor. Fixed accumulation order.
template <typename T> Tensor<T> sum(const Tensor<T>& a);
template <typename T> Tensor<T> mean(const Tensor<T>& a);
template <typename T> Tensor<T> concat_channels(const std::vector<Tensor<T>>& parts);

// ---- convolutions ----

/// weight [out, in, kh, kw], bias (1, out, 1, 1).
/// Output spatial dims: floor((H + 2*pad - kh)/stride) + 1.
template <typename T>
Tensor<T> conv2d(const Tensor<T>& input, const Tensor<T>& weight, const Tensor<T>& bias,
                 int stride, int padding);

/// weight [in, out, kh, kw] (adjoint layout), bias (1, out, 1, 1).
/// Output spatial dims: (H - 1)*stride - 2*pad + kh. With zero bias this is
/// the exact adjoint of conv2d for matching stride/padding.
template <typename T>
Tensor<T> conv_transpose2d(const Tensor<T>& input, const Tensor<T>& weight,
                           const Tensor<T>& bias, int stride, int padding);

/// weight [C, 1, 3, 3], bias (1, C, 1, 1); stride 1, padding 1 (shape-preserving).
/// Channel c of the output depends only on channel c of the input.
template <typename T>
Tensor<T> depthwise_conv2d(const Tensor<T>& input, const Tensor<T>& weight,
                           const Tensor<T>& bias);

// ---- graph ----

/// Reverse topological traversal from a scalar loss. Gradients accumulate
/// into every reachable needs-grad node; the traversed graph is released
/// afterwards (graphs are single-use).
template <typename T> void backward(const Tensor<T>& loss);

/// Out-of-graph clamp; returns a fresh leaf.
template <typename T> Tensor<T> clamp_values(const Tensor<T>& a, T lo, T hi);

extern template class Tensor<float>;
extern template class Tensor<double>;

#define RDAF_DECLARE_OPS(T)                                                              \
    extern template Tensor<T> add<T>(const Tensor<T>&, const Tensor<T>&);                \
    extern template Tensor<T> sub<T>(const Tensor<T>&, const Tensor<T>&);                \
    extern template Tensor<T> mul<T>(const Tensor<T>&, const Tensor<T>&);                \
    extern template Tensor<T> scale<T>(const Tensor<T>&, T);                             \
    extern template Tensor<T> relu<T>(const Tensor<T>&);                                 \
    extern template Tensor<T> sigmoid<T>(const Tensor<T>&);                              \
    extern template Tensor<T> abs<T>(const Tensor<T>&);                                  \
    extern template Tensor<T> complex_abs<T>(const Tensor<T>&, const Tensor<T>&);        \
    extern template Tensor<T> sum<T>(const Tensor<T>&);                                  \
    extern template Tensor<T> mean<T>(const Tensor<T>&);                                 \
    extern template Tensor<T> concat_channels<T>(const std::vector<Tensor<T>>&);         \
    extern template Tensor<T> conv2d<T>(const Tensor<T>&, const Tensor<T>&,              \
                                        const Tensor<T>&, int, int);                     \
    extern template Tensor<T> conv_transpose2d<T>(const Tensor<T>&, const Tensor<T>&,    \
                                                  const Tensor<T>&, int, int);           \
    extern template Tensor<T> depthwise_conv2d<T>(const Tensor<T>&, const Tensor<T>&,    \
                                                  const Tensor<T>&);                     \
    extern template void backward<T>(const Tensor<T>&);                                  \
    extern template Tensor<T> clamp_values<T>(const Tensor<T>&, T, T);

RDAF_DECLARE_OPS(float)
RDAF_DECLARE_OPS(double)
#undef RDAF_DECLARE_OPS

}  // namespace rdaf
