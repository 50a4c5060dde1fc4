// Serial reference kernels. Written for obviousness, not speed: every output
// element is formed by walking its taps with an explicit reflect lookup, and
// every backward pass is the literal transpose (scatter) of its forward loop.

#include "afrda/kernels.hpp"

#include "checks.hpp"

#include <cmath>

namespace afrda::kernels::reference {

using detail::check_conv_args;
using detail::check_grad_out;

namespace {

using Index = std::ptrdiff_t;

Index as_index(std::size_t v) { return static_cast<Index>(v); }

}  // namespace

Tensor conv3x3_forward(const Tensor& x, const Tensor& weight, const Tensor& bias)
{
    check_conv_args(x, weight, bias, 9);
    const Dims4 d = dims4(x);
    const std::size_t co = weight.dim(0);
    Tensor y({d.batch, co, d.height, d.width});
    for (std::size_t b = 0; b < d.batch; ++b)
        for (std::size_t o = 0; o < co; ++o)
            for (std::size_t h = 0; h < d.height; ++h)
                for (std::size_t w = 0; w < d.width; ++w) {
                    double acc = bias.empty() ? 0.0 : bias[o];
                    for (std::size_t c = 0; c < d.channels; ++c)
                        for (Index ky = 0; ky < 3; ++ky)
                            for (Index kx = 0; kx < 3; ++kx) {
                                const auto sh = reflect_index(as_index(h) + ky - 1, as_index(d.height));
                                const auto sw = reflect_index(as_index(w) + kx - 1, as_index(d.width));
                                acc += weight.at(o, c, static_cast<std::size_t>(ky), static_cast<std::size_t>(kx)) *
                                       x.at(b, c, static_cast<std::size_t>(sh), static_cast<std::size_t>(sw));
                            }
                    y.at(b, o, h, w) = acc;
                }
    return y;
}

void conv3x3_backward(const Tensor& x, const Tensor& weight, const Tensor& grad_out,
                      Tensor* grad_x, Tensor* grad_weight, Tensor* grad_bias)
{
    check_conv_args(x, weight, Tensor(), 9);
    const Dims4 d = dims4(x);
    const std::size_t co = weight.dim(0);
    check_grad_out(grad_out, d, co);
    for (std::size_t b = 0; b < d.batch; ++b)
        for (std::size_t o = 0; o < co; ++o)
            for (std::size_t h = 0; h < d.height; ++h)
                for (std::size_t w = 0; w < d.width; ++w) {
                    const double g = grad_out.at(b, o, h, w);
                    if (grad_bias)
                        (*grad_bias)[o] += g;
                    for (std::size_t c = 0; c < d.channels; ++c)
                        for (Index ky = 0; ky < 3; ++ky)
                            for (Index kx = 0; kx < 3; ++kx) {
                                const auto sh = static_cast<std::size_t>(
                                    reflect_index(as_index(h) + ky - 1, as_index(d.height)));
                                const auto sw = static_cast<std::size_t>(
                                    reflect_index(as_index(w) + kx - 1, as_index(d.width)));
                                const auto uy = static_cast<std::size_t>(ky);
                                const auto ux = static_cast<std::size_t>(kx);
                                if (grad_x)
                                    grad_x->at(b, c, sh, sw) += weight.at(o, c, uy, ux) * g;
                                if (grad_weight)
                                    grad_weight->at(o, c, uy, ux) += x.at(b, c, sh, sw) * g;
                            }
                }
}

Tensor conv1x1_forward(const Tensor& x, const Tensor& weight, const Tensor& bias)
{
    check_conv_args(x, weight, bias, 1);
    const Dims4 d = dims4(x);
    const std::size_t co = weight.dim(0);
    Tensor y({d.batch, co, d.height, d.width});
    for (std::size_t b = 0; b < d.batch; ++b)
        for (std::size_t o = 0; o < co; ++o)
            for (std::size_t h = 0; h < d.height; ++h)
                for (std::size_t w = 0; w < d.width; ++w) {
                    double acc = bias.empty() ? 0.0 : bias[o];
                    for (std::size_t c = 0; c < d.channels; ++c)
                        acc += weight[o * d.channels + c] * x.at(b, c, h, w);
                    y.at(b, o, h, w) = acc;
                }
    return y;
}

void conv1x1_backward(const Tensor& x, const Tensor& weight, const Tensor& grad_out,
                      Tensor* grad_x, Tensor* grad_weight, Tensor* grad_bias)
{
    check_conv_args(x, weight, Tensor(), 1);
    const Dims4 d = dims4(x);
    const std::size_t co = weight.dim(0);
    check_grad_out(grad_out, d, co);
    for (std::size_t b = 0; b < d.batch; ++b)
        for (std::size_t o = 0; o < co; ++o)
            for (std::size_t h = 0; h < d.height; ++h)
                for (std::size_t w = 0; w < d.width; ++w) {
                    const double g = grad_out.at(b, o, h, w);
                    if (grad_bias)
                        (*grad_bias)[o] += g;
                    for (std::size_t c = 0; c < d.channels; ++c) {
                        if (grad_x)
                            grad_x->at(b, c, h, w) += weight[o * d.channels + c] * g;
                        if (grad_weight)
                            (*grad_weight)[o * d.channels + c] += x.at(b, c, h, w) * g;
                    }
                }
}

Tensor smooth_forward(const Tensor& x, std::span<const double> taps)
{
    detail::check_taps(taps.size());
    const Dims4 d = dims4(x);
    const Index half = as_index(taps.size() / 2);
    Tensor y(x.shape());
    for (std::size_t b = 0; b < d.batch; ++b)
        for (std::size_t c = 0; c < d.channels; ++c)
            for (std::size_t h = 0; h < d.height; ++h)
                for (std::size_t w = 0; w < d.width; ++w) {
                    const double center = x.at(b, c, h, w);
                    double acc = 0.0;
                    for (Index i = -half; i <= half; ++i)
                        for (Index j = -half; j <= half; ++j) {
                            const double k = taps[static_cast<std::size_t>(i + half)] *
                                             taps[static_cast<std::size_t>(j + half)];
                            const auto sh = reflect_index(as_index(h) + i, as_index(d.height));
                            const auto sw = reflect_index(as_index(w) + j, as_index(d.width));
                            acc += k * (x.at(b, c, static_cast<std::size_t>(sh), static_cast<std::size_t>(sw)) -
                                        center);
                        }
                    y.at(b, c, h, w) = center + acc;
                }
    return y;
}

Tensor smooth_backward(const Tensor& grad_out, std::span<const double> taps)
{
    detail::check_taps(taps.size());
    const Dims4 d = dims4(grad_out);
    const Index half = as_index(taps.size() / 2);
    Tensor gx(grad_out.shape());
    for (std::size_t b = 0; b < d.batch; ++b)
        for (std::size_t c = 0; c < d.channels; ++c)
            for (std::size_t h = 0; h < d.height; ++h)
                for (std::size_t w = 0; w < d.width; ++w) {
                    const double g = grad_out.at(b, c, h, w);
                    gx.at(b, c, h, w) += g;
                    for (Index i = -half; i <= half; ++i)
                        for (Index j = -half; j <= half; ++j) {
                            const double k = taps[static_cast<std::size_t>(i + half)] *
                                             taps[static_cast<std::size_t>(j + half)];
                            const auto sh = reflect_index(as_index(h) + i, as_index(d.height));
                            const auto sw = reflect_index(as_index(w) + j, as_index(d.width));
                            gx.at(b, c, static_cast<std::size_t>(sh), static_cast<std::size_t>(sw)) += k * g;
                            gx.at(b, c, h, w) -= k * g;
                        }
                }
    return gx;
}

namespace {

struct Sample {
    std::size_t lo;
    std::size_t hi;
    double t;
};

Sample source_coordinate(std::size_t dst, std::size_t in, std::size_t out)
{
    const double scale = static_cast<double>(in) / static_cast<double>(out);
    double src = (static_cast<double>(dst) + 0.5) * scale - 0.5;
    if (src < 0.0)
        src = 0.0;
    auto lo = static_cast<std::size_t>(std::floor(src));
    if (lo > in - 1)
        lo = in - 1;
    const std::size_t hi = lo + 1 < in ? lo + 1 : in - 1;
    return {lo, hi, src - static_cast<double>(lo)};
}

}  // namespace

Tensor resize_forward(const Tensor& x, std::size_t out_h, std::size_t out_w)
{
    const Dims4 d = dims4(x);
    if (out_h == 0 || out_w == 0)
        throw DomainError("resize target must be at least 1x1");
    Tensor y({d.batch, d.channels, out_h, out_w});
    for (std::size_t b = 0; b < d.batch; ++b)
        for (std::size_t c = 0; c < d.channels; ++c)
            for (std::size_t h = 0; h < out_h; ++h)
                for (std::size_t w = 0; w < out_w; ++w) {
                    const Sample sy = source_coordinate(h, d.height, out_h);
                    const Sample sx = source_coordinate(w, d.width, out_w);
                    const double top_l = x.at(b, c, sy.lo, sx.lo);
                    const double top = top_l + sx.t * (x.at(b, c, sy.lo, sx.hi) - top_l);
                    const double bot_l = x.at(b, c, sy.hi, sx.lo);
                    const double bot = bot_l + sx.t * (x.at(b, c, sy.hi, sx.hi) - bot_l);
                    y.at(b, c, h, w) = top + sy.t * (bot - top);
                }
    return y;
}

Tensor resize_backward(const Tensor& grad_out, std::size_t in_h, std::size_t in_w)
{
    const Dims4 d = dims4(grad_out);
    Tensor gx({d.batch, d.channels, in_h, in_w});
    for (std::size_t b = 0; b < d.batch; ++b)
        for (std::size_t c = 0; c < d.channels; ++c)
            for (std::size_t h = 0; h < d.height; ++h)
                for (std::size_t w = 0; w < d.width; ++w) {
                    const Sample sy = source_coordinate(h, in_h, d.height);
                    const Sample sx = source_coordinate(w, in_w, d.width);
                    const double g = grad_out.at(b, c, h, w);
                    gx.at(b, c, sy.lo, sx.lo) += (1.0 - sy.t) * (1.0 - sx.t) * g;
                    gx.at(b, c, sy.lo, sx.hi) += (1.0 - sy.t) * sx.t * g;
                    gx.at(b, c, sy.hi, sx.lo) += sy.t * (1.0 - sx.t) * g;
                    gx.at(b, c, sy.hi, sx.hi) += sy.t * sx.t * g;
                }
    return gx;
}

}  // namespace afrda::kernels::reference
