#include "afrda/autodiff.hpp"

#include "afrda/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace afrda {

// ---------------------------------------------------------------------------
// ParamSet

Param& ParamSet::add(std::string name, Tensor value)
{
    if (index_.contains(name))
        throw DomainError("duplicate parameter name '" + name + "'");
    index_.emplace(name, params_.size());
    Tensor grad = Tensor::zeros_like(value);
    params_.push_back(Param{std::move(name), std::move(value), std::move(grad)});
    return params_.back();
}

Param& ParamSet::at(std::string_view name)
{
    auto it = index_.find(std::string(name));
    if (it == index_.end())
        throw DomainError("unknown parameter '" + std::string(name) + "'");
    return params_[it->second];
}

const Param& ParamSet::at(std::string_view name) const
{
    return const_cast<ParamSet*>(this)->at(name);
}

const Param* ParamSet::find(std::string_view name) const
{
    auto it = index_.find(std::string(name));
    return it == index_.end() ? nullptr : &params_[it->second];
}

void ParamSet::zero_grad()
{
    for (Param& p : params_)
        std::fill(p.grad.data().begin(), p.grad.data().end(), 0.0);
}

std::size_t ParamSet::scalar_count() const
{
    std::size_t n = 0;
    for (const Param& p : params_)
        n += p.value.size();
    return n;
}

bool ParamSet::same_structure(const ParamSet& other) const
{
    if (params_.size() != other.params_.size())
        return false;
    for (std::size_t i = 0; i < params_.size(); ++i)
        if (params_[i].name != other.params_[i].name || params_[i].value.shape() != other.params_[i].value.shape())
            return false;
    return true;
}

// ---------------------------------------------------------------------------
// Tape

const Tensor& Var::value() const
{
    return tape_->value(*this);
}

void Tape::check_owned(Var v) const
{
    if (!v.valid() || &v.tape() != this || v.id() >= nodes_.size())
        throw DomainError("variable does not belong to this tape");
}

Var Tape::constant(Tensor value)
{
    nodes_.push_back(Node{std::move(value), {}, false, nullptr, {}});
    return Var(this, nodes_.size() - 1);
}

Var Tape::leaf(Param& param)
{
    if (param.grad.shape() != param.value.shape())
        param.grad = Tensor::zeros_like(param.value);
    nodes_.push_back(Node{param.value, {}, true, &param, {}});
    return Var(this, nodes_.size() - 1);
}

Var Tape::record(Tensor value, std::initializer_list<Var> inputs, BackwardFn fn)
{
    bool needs = false;
    for (Var v : inputs) {
        if (!v.valid())
            continue;
        check_owned(v);
        needs = needs || nodes_[v.id()].requires_grad;
    }
    nodes_.push_back(Node{std::move(value), {}, needs, nullptr, needs ? std::move(fn) : BackwardFn{}});
    return Var(this, nodes_.size() - 1);
}

Tensor& Tape::grad_buffer(Var v)
{
    Node& n = nodes_[v.id()];
    if (n.grad.shape() != n.value.shape())
        n.grad = Tensor::zeros_like(n.value);
    return n.grad;
}

void Tape::accumulate(Var v, const Tensor& g)
{
    if (!requires_grad(v))
        return;
    Tensor& buf = grad_buffer(v);
    if (g.size() != buf.size())
        throw ShapeError("gradient " + to_string(g.shape()) + " does not match value " + to_string(buf.shape()));
    auto dst = buf.data();
    auto src = g.data();
    for (std::size_t i = 0; i < dst.size(); ++i)
        dst[i] += src[i];
}

void Tape::backward(Var loss)
{
    check_owned(loss);
    if (value(loss).size() != 1)
        throw DomainError("backward requires a single-element loss, got " + to_string(value(loss).shape()));
    for (Node& n : nodes_)
        n.grad = Tensor();
    if (!requires_grad(loss))
        return;
    grad_buffer(loss)[0] = 1.0;
    for (std::size_t i = loss.id() + 1; i-- > 0;) {
        Node& n = nodes_[i];
        if (n.grad.empty())
            continue;
        if (n.backward)
            n.backward(*this, n.grad);
        if (n.param) {
            auto dst = n.param->grad.data();
            auto src = n.grad.data();
            for (std::size_t k = 0; k < dst.size(); ++k)
                dst[k] += src[k];
        }
    }
}

std::uint64_t hash_bits(std::uint64_t seed, std::uint64_t value) noexcept
{
    constexpr std::uint64_t prime = 1099511628211ull;
    for (int i = 0; i < 8; ++i) {
        seed ^= (value >> (8 * i)) & 0xffu;
        seed *= prime;
    }
    return seed;
}

void Tape::note_branch(std::uint64_t bits) noexcept
{
    signature_ = hash_bits(signature_, bits);
}

// ---------------------------------------------------------------------------
// Operations

namespace {

bool channel_broadcast(const Shape& a, const Shape& b)
{
    return a.size() == 4 && b.size() == 4 && b[1] == 1 && a[1] > 1 && a[0] == b[0] && a[2] == b[2] &&
           a[3] == b[3];
}

template <typename F>
Tensor map(const Tensor& x, F f)
{
    Tensor y(x.shape());
    auto src = x.data();
    auto dst = y.data();
    for (std::size_t i = 0; i < src.size(); ++i)
        dst[i] = f(src[i]);
    return y;
}

double stable_sigmoid(double v)
{
    constexpr double lo = std::numeric_limits<double>::denorm_min();
    const double hi = std::nextafter(1.0, 0.0);
    const double s = v >= 0.0 ? 1.0 / (1.0 + std::exp(-v)) : std::exp(v) / (1.0 + std::exp(v));
    return std::clamp(s, lo, hi);
}

}  // namespace

Var elementwise(ElementwiseOp op, Var a, Var b)
{
    const Tensor& av = a.value();
    const Tensor& bv = b.value();
    const bool bcast = channel_broadcast(av.shape(), bv.shape());
    if (!bcast && av.shape() != bv.shape())
        throw ShapeError("elementwise shape mismatch: " + to_string(av.shape()) + " vs " + to_string(bv.shape()));

    Tensor out(av.shape());
    const std::size_t channels = bcast ? av.dim(1) : 1;
    const std::size_t plane = bcast ? av.dim(2) * av.dim(3) : av.size();
    const std::size_t outer = bcast ? av.dim(0) : 1;
    for (std::size_t n = 0; n < outer; ++n)
        for (std::size_t c = 0; c < channels; ++c) {
            const double* pa = av.raw() + (n * channels + c) * plane;
            const double* pb = bv.raw() + n * plane;
            double* po = out.raw() + (n * channels + c) * plane;
            switch (op) {
            case ElementwiseOp::add:
                for (std::size_t i = 0; i < plane; ++i) po[i] = pa[i] + pb[i];
                break;
            case ElementwiseOp::sub:
                for (std::size_t i = 0; i < plane; ++i) po[i] = pa[i] - pb[i];
                break;
            case ElementwiseOp::mul:
                for (std::size_t i = 0; i < plane; ++i) po[i] = pa[i] * pb[i];
                break;
            }
        }

    Tape& tape = a.tape();
    return tape.record(std::move(out), {a, b}, [a, b, op, channels, plane, outer](Tape& t, const Tensor& g) {
        const Tensor& av = t.value(a);
        const Tensor& bv = t.value(b);
        if (t.requires_grad(a)) {
            Tensor& ga = t.grad_buffer(a);
            for (std::size_t n = 0; n < outer; ++n)
                for (std::size_t c = 0; c < channels; ++c) {
                    const std::size_t base = (n * channels + c) * plane;
                    const double* pb = bv.raw() + n * plane;
                    for (std::size_t i = 0; i < plane; ++i)
                        ga[base + i] += op == ElementwiseOp::mul ? g[base + i] * pb[i] : g[base + i];
                }
        }
        if (t.requires_grad(b)) {
            Tensor& gb = t.grad_buffer(b);
            const double sign = op == ElementwiseOp::sub ? -1.0 : 1.0;
            for (std::size_t n = 0; n < outer; ++n)
                for (std::size_t c = 0; c < channels; ++c) {
                    const std::size_t base = (n * channels + c) * plane;
                    double* pgb = gb.raw() + n * plane;
                    for (std::size_t i = 0; i < plane; ++i)
                        pgb[i] += op == ElementwiseOp::mul ? g[base + i] * av[base + i] : sign * g[base + i];
                }
        }
    });
}

Var scale(Var x, double factor)
{
    Tensor out = map(x.value(), [factor](double v) { return v * factor; });
    return x.tape().record(std::move(out), {x}, [x, factor](Tape& t, const Tensor& g) {
        Tensor& gx = t.grad_buffer(x);
        for (std::size_t i = 0; i < g.size(); ++i)
            gx[i] += factor * g[i];
    });
}

Tensor sigmoid(const Tensor& x)
{
    return map(x, stable_sigmoid);
}

Var sigmoid(Var x)
{
    Tensor out = sigmoid(x.value());
    Tensor saved = out;
    return x.tape().record(std::move(out), {x}, [x, s = std::move(saved)](Tape& t, const Tensor& g) {
        Tensor& gx = t.grad_buffer(x);
        for (std::size_t i = 0; i < g.size(); ++i)
            gx[i] += g[i] * s[i] * (1.0 - s[i]);
    });
}

Var relu(Var x)
{
    const Tensor& xv = x.value();
    Tensor out(xv.shape());
    for (std::size_t i = 0; i < xv.size(); ++i)
        out[i] = xv[i] > 0.0 ? xv[i] : 0.0;
    if (x.tape().tracking_branches()) {
        std::uint64_t sig = 0;
        for (std::size_t i = 0; i < xv.size(); ++i)
            sig = hash_bits(sig, xv[i] > 0.0 ? i + 1 : 0);
        x.tape().note_branch(sig);
    }
    return x.tape().record(std::move(out), {x}, [x](Tape& t, const Tensor& g) {
        const Tensor& xv = t.value(x);
        Tensor& gx = t.grad_buffer(x);
        for (std::size_t i = 0; i < g.size(); ++i)
            if (xv[i] > 0.0)
                gx[i] += g[i];
    });
}

Var exp(Var x)
{
    Tensor out = map(x.value(), [](double v) { return std::exp(v); });
    Tensor saved = out;
    return x.tape().record(std::move(out), {x}, [x, saved = std::move(saved)](Tape& t, const Tensor& g) {
        Tensor& gx = t.grad_buffer(x);
        for (std::size_t i = 0; i < g.size(); ++i)
            gx[i] += g[i] * saved[i];
    });
}

Var neg(Var x)
{
    return scale(x, -1.0);
}

Tensor softmax_channels(const Tensor& logits)
{
    const Dims4 d = dims4(logits);
    if (d.channels < 2)
        throw DomainError("softmax over channels needs C >= 2, got " + to_string(logits.shape()));
    Tensor out(logits.shape());
    const std::size_t plane = d.plane();
    for (std::size_t b = 0; b < d.batch; ++b) {
        const double* in = logits.raw() + b * d.channels * plane;
        double* po = out.raw() + b * d.channels * plane;
        for (std::size_t p = 0; p < plane; ++p) {
            double mx = in[p];
            for (std::size_t c = 1; c < d.channels; ++c)
                mx = std::max(mx, in[c * plane + p]);
            double total = 0.0;
            for (std::size_t c = 0; c < d.channels; ++c) {
                po[c * plane + p] = std::exp(in[c * plane + p] - mx);
                total += po[c * plane + p];
            }
            for (std::size_t c = 0; c < d.channels; ++c)
                po[c * plane + p] /= total;
        }
    }
    return out;
}

Var softmax_channels(Var logits)
{
    Tensor out = softmax_channels(logits.value());
    Tensor saved = out;
    return logits.tape().record(std::move(out), {logits}, [logits, s = std::move(saved)](Tape& t, const Tensor& g) {
        const Dims4 d = dims4(s);
        const std::size_t plane = d.plane();
        Tensor& gx = t.grad_buffer(logits);
        for (std::size_t b = 0; b < d.batch; ++b) {
            const std::size_t base = b * d.channels * plane;
            for (std::size_t p = 0; p < plane; ++p) {
                double dot = 0.0;
                for (std::size_t c = 0; c < d.channels; ++c)
                    dot += g[base + c * plane + p] * s[base + c * plane + p];
                for (std::size_t c = 0; c < d.channels; ++c) {
                    const std::size_t i = base + c * plane + p;
                    gx[i] += s[i] * (g[i] - dot);
                }
            }
        }
    });
}

namespace {

Var conv_impl(Var x, Var weight, Var bias, bool spatial)
{
    const Tensor no_bias;
    const Tensor& bv = bias.valid() ? bias.value() : no_bias;
    Tensor out = spatial ? kernels::conv3x3_forward(x.value(), weight.value(), bv)
                         : kernels::conv1x1_forward(x.value(), weight.value(), bv);
    return x.tape().record(std::move(out), {x, weight, bias}, [x, weight, bias, spatial](Tape& t, const Tensor& g) {
        Tensor* gx = t.requires_grad(x) ? &t.grad_buffer(x) : nullptr;
        Tensor* gw = t.requires_grad(weight) ? &t.grad_buffer(weight) : nullptr;
        Tensor* gb = bias.valid() && t.requires_grad(bias) ? &t.grad_buffer(bias) : nullptr;
        if (spatial)
            kernels::conv3x3_backward(t.value(x), t.value(weight), g, gx, gw, gb);
        else
            kernels::conv1x1_backward(t.value(x), t.value(weight), g, gx, gw, gb);
    });
}

}  // namespace

Var conv1x1(Var x, Var weight, Var bias)
{
    return conv_impl(x, weight, bias, false);
}

Var conv2d_3x3(Var x, Var weight, Var bias)
{
    return conv_impl(x, weight, bias, true);
}

Var conv3x3(Var x, Var weight, Var bias)
{
    const Dims4 d = dims4(x.value());
    if (d.channels != 1)
        throw ShapeError("conv3x3 attention expects a single-channel input, got " + to_string(x.shape()));
    if (weight.shape() != Shape{1, 1, 3, 3} || bias.shape() != Shape{1})
        throw ShapeError("conv3x3 attention expects a 1x1x3x3 kernel and a 1-element bias");
    return conv_impl(x, weight, bias, true);
}

Var channel_mean(Var x)
{
    const Tensor& xv = x.value();
    const Dims4 d = dims4(xv);
    Tensor out({d.batch, 1, d.height, d.width});
    const double inv = 1.0 / static_cast<double>(d.channels);
    for (std::size_t b = 0; b < d.batch; ++b) {
        double* po = out.raw() + b * d.plane();
        for (std::size_t c = 0; c < d.channels; ++c) {
            const double* pi = xv.raw() + (b * d.channels + c) * d.plane();
            for (std::size_t p = 0; p < d.plane(); ++p)
                po[p] += pi[p];
        }
        for (std::size_t p = 0; p < d.plane(); ++p)
            po[p] *= inv;
    }
    return x.tape().record(std::move(out), {x}, [x, d, inv](Tape& t, const Tensor& g) {
        Tensor& gx = t.grad_buffer(x);
        for (std::size_t b = 0; b < d.batch; ++b)
            for (std::size_t c = 0; c < d.channels; ++c) {
                double* pg = gx.raw() + (b * d.channels + c) * d.plane();
                const double* go = g.raw() + b * d.plane();
                for (std::size_t p = 0; p < d.plane(); ++p)
                    pg[p] += inv * go[p];
            }
    });
}

Var resize_bilinear(Var x, std::size_t out_h, std::size_t out_w)
{
    const Dims4 d = dims4(x.value());
    Tensor out = kernels::resize_forward(x.value(), out_h, out_w);
    return x.tape().record(std::move(out), {x}, [x, d](Tape& t, const Tensor& g) {
        t.accumulate(x, kernels::resize_backward(g, d.height, d.width));
    });
}

Var sum(Var x)
{
    double s = 0.0;
    for (double v : x.value().data())
        s += v;
    return x.tape().record(Tensor::scalar(s), {x}, [x](Tape& t, const Tensor& g) {
        Tensor& gx = t.grad_buffer(x);
        for (std::size_t i = 0; i < gx.size(); ++i)
            gx[i] += g[0];
    });
}

Var weighted_sum(Var x, const Tensor& weights)
{
    if (weights.shape() != x.shape())
        throw ShapeError("weighted_sum weights " + to_string(weights.shape()) + " vs " + to_string(x.shape()));
    double s = 0.0;
    for (std::size_t i = 0; i < weights.size(); ++i)
        s += weights[i] * x.value()[i];
    return x.tape().record(Tensor::scalar(s), {x}, [x, weights](Tape& t, const Tensor& g) {
        Tensor& gx = t.grad_buffer(x);
        for (std::size_t i = 0; i < gx.size(); ++i)
            gx[i] += g[0] * weights[i];
    });
}

}  // namespace afrda
