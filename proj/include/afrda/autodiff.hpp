#pragma once

#include "afrda/tensor.hpp"

#include <cstdint>
#include <deque>
#include <functional>
#include <initializer_list>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace afrda {

/// A named learnable tensor with its gradient accumulator.
struct Param {
    std::string name;
    Tensor value;
    Tensor grad;
};

/// Insertion-ordered set of uniquely named parameters.
class ParamSet {
public:
    Param& add(std::string name, Tensor value);

    Param& at(std::string_view name);
    const Param& at(std::string_view name) const;
    const Param* find(std::string_view name) const;

    std::vector<Param>& params() noexcept { return params_; }
    const std::vector<Param>& params() const noexcept { return params_; }
    std::size_t size() const noexcept { return params_.size(); }

    void zero_grad();
    std::size_t scalar_count() const;

    /// True when both sets have the same names, in the same order, with the same shapes.
    bool same_structure(const ParamSet& other) const;

private:
    std::vector<Param> params_;
    std::unordered_map<std::string, std::size_t> index_;
};

class Tape;

/// Handle to a value recorded on a Tape.
class Var {
public:
    Var() = default;

    const Tensor& value() const;
    const Shape& shape() const { return value().shape(); }
    Tape& tape() const { return *tape_; }
    std::size_t id() const noexcept { return id_; }
    bool valid() const noexcept { return tape_ != nullptr; }

private:
    friend class Tape;
    Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}

    Tape* tape_ = nullptr;
    std::size_t id_ = 0;
};

/// Ordered record of executed operations. Nodes that depend on no
/// gradient-requiring leaf store no backward closure, so a forward pass built
/// from constants only costs nothing extra.
class Tape {
public:
    using BackwardFn = std::function<void(Tape&, const Tensor& grad_out)>;

    Tape() = default;
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    Var constant(Tensor value);
    /// Leaf bound to a parameter; backward() adds into param.grad.
    Var leaf(Param& param);

    /// Records an op output. requires-grad is inherited from the inputs; `fn`
    /// is dropped when none of them needs a gradient.
    Var record(Tensor value, std::initializer_list<Var> inputs, BackwardFn fn);

    const Tensor& value(Var v) const { return nodes_[v.id()].value; }
    bool requires_grad(Var v) const { return nodes_[v.id()].requires_grad; }

    /// Gradient buffer of v during a backward sweep (allocated on first use).
    Tensor& grad_buffer(Var v);
    void accumulate(Var v, const Tensor& g);
    /// Gradient of the most recent backward() with respect to v (empty if untouched).
    const Tensor& grad(Var v) const { return nodes_[v.id()].grad; }

    /// Reverse sweep from a single-element loss. Param grads accumulate across
    /// calls; intermediate node grads are reset at the start of each call.
    void backward(Var loss);

    /// Folds a branch decision (ReLU mask, argmax) into a running signature.
    /// Finite-difference checks use it to detect non-differentiable neighborhoods.
    /// Ops skip computing signatures unless tracking is enabled.
    void track_branches(bool on) noexcept { tracking_ = on; }
    bool tracking_branches() const noexcept { return tracking_; }
    void note_branch(std::uint64_t bits) noexcept;
    std::uint64_t branch_signature() const noexcept { return signature_; }

    std::size_t size() const noexcept { return nodes_.size(); }

private:
    struct Node {
        Tensor value;
        Tensor grad;
        bool requires_grad = false;
        Param* param = nullptr;
        BackwardFn backward;
    };

    void check_owned(Var v) const;

    std::deque<Node> nodes_;
    std::uint64_t signature_ = 14695981039346656037ull;
    bool tracking_ = false;
};

/// FNV-1a style mixing over a sequence of integral decisions.
std::uint64_t hash_bits(std::uint64_t seed, std::uint64_t value) noexcept;

// ---------------------------------------------------------------------------
// Differentiable operations.

enum class ElementwiseOp { add, sub, mul };

/// a op b elementwise. b may be B x 1 x H x W against a B x C x H x W `a`.
Var elementwise(ElementwiseOp op, Var a, Var b);
inline Var add(Var a, Var b) { return elementwise(ElementwiseOp::add, a, b); }
inline Var sub(Var a, Var b) { return elementwise(ElementwiseOp::sub, a, b); }
inline Var mul(Var a, Var b) { return elementwise(ElementwiseOp::mul, a, b); }

Var scale(Var x, double factor);
Var sigmoid(Var x);
Var relu(Var x);
Var exp(Var x);
Var neg(Var x);

/// Softmax over the channel axis of a B x C x H x W tensor (C >= 2).
Var softmax_channels(Var logits);

/// 1x1 convolution. `bias` may be default-constructed for no bias.
Var conv1x1(Var x, Var weight, Var bias = {});
/// 3x3 convolution, any channel counts, reflect padding, cross-correlation.
Var conv2d_3x3(Var x, Var weight, Var bias = {});
/// Single-channel 3x3 spatial attention convolution (1 -> 1).
Var conv3x3(Var x, Var weight, Var bias);

/// Mean over the channel axis: B x C x H x W -> B x 1 x H x W.
Var channel_mean(Var x);
Var resize_bilinear(Var x, std::size_t out_h, std::size_t out_w);

/// Sum of all elements -> single-element tensor.
Var sum(Var x);
/// sum(x * weights) for a constant weight tensor of x's shape.
Var weighted_sum(Var x, const Tensor& weights);

/// Plain (non-recorded) forward helpers.
Tensor sigmoid(const Tensor& x);
Tensor softmax_channels(const Tensor& logits);

}  // namespace afrda
