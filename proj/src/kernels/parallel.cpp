#include "afrda/kernels.hpp"

#include "checks.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

namespace afrda::kernels {

using detail::check_conv_args;
using detail::check_grad_out;

namespace {

using Index = std::ptrdiff_t;

Index as_index(std::size_t v) { return static_cast<Index>(v); }
std::ptrdiff_t loop_count(std::size_t n) { return static_cast<std::ptrdiff_t>(n); }

// Copies an H x W plane into an (H + 2 pad) x (W + 2 pad) buffer with reflect borders.
void pad_plane(const double* src, double* dst, std::size_t h, std::size_t w, std::size_t pad)
{
    const std::size_t pw = w + 2 * pad;
    for (std::size_t i = 0; i < h + 2 * pad; ++i) {
        const auto si = static_cast<std::size_t>(reflect_index(as_index(i) - as_index(pad), as_index(h)));
        const double* row = src + si * w;
        double* out = dst + i * pw;
        for (std::size_t j = 0; j < pad; ++j) {
            out[j] = row[reflect_index(as_index(j) - as_index(pad), as_index(w))];
            out[pad + w + j] = row[reflect_index(as_index(w + j), as_index(w))];
        }
        std::copy_n(row, w, out + pad);
    }
}

// Adjoint of pad_plane: folds a padded gradient back onto the H x W plane.
void fold_plane(const double* src, double* dst, std::size_t h, std::size_t w, std::size_t pad)
{
    const std::size_t pw = w + 2 * pad;
    for (std::size_t i = 0; i < h + 2 * pad; ++i) {
        const auto si = static_cast<std::size_t>(reflect_index(as_index(i) - as_index(pad), as_index(h)));
        double* row = dst + si * w;
        const double* in = src + i * pw;
        for (std::size_t j = 0; j < pad; ++j) {
            row[reflect_index(as_index(j) - as_index(pad), as_index(w))] += in[j];
            row[reflect_index(as_index(w + j), as_index(w))] += in[pad + w + j];
        }
        for (std::size_t j = 0; j < w; ++j)
            row[j] += in[pad + j];
    }
}

std::vector<double> pad_all(const Tensor& x, std::size_t pad)
{
    const Dims4 d = dims4(x);
    const std::size_t plane = (d.height + 2 * pad) * (d.width + 2 * pad);
    std::vector<double> padded(d.batch * d.channels * plane);
    const std::size_t planes = d.batch * d.channels;
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t p = 0; p < loop_count(planes); ++p) {
        const auto up = static_cast<std::size_t>(p);
        pad_plane(x.raw() + up * d.plane(), padded.data() + up * plane, d.height, d.width, pad);
    }
    return padded;
}

}  // namespace

Tensor conv3x3_forward(const Tensor& x, const Tensor& weight, const Tensor& bias)
{
    check_conv_args(x, weight, bias, 9);
    const Dims4 d = dims4(x);
    const std::size_t co = weight.dim(0);
    const std::size_t pw = d.width + 2;
    const std::size_t pplane = (d.height + 2) * pw;
    const std::vector<double> padded = pad_all(x, 1);
    Tensor y({d.batch, co, d.height, d.width});

#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t bo = 0; bo < loop_count(d.batch * co); ++bo) {
        const std::size_t b = static_cast<std::size_t>(bo) / co;
        const std::size_t o = static_cast<std::size_t>(bo) % co;
        double* out = y.raw() + static_cast<std::size_t>(bo) * d.plane();
        std::fill_n(out, d.plane(), bias.empty() ? 0.0 : bias[o]);
        for (std::size_t c = 0; c < d.channels; ++c) {
            const double* k = weight.raw() + (o * d.channels + c) * 9;
            const double* p = padded.data() + (b * d.channels + c) * pplane;
            const double k0 = k[0], k1 = k[1], k2 = k[2], k3 = k[3], k4 = k[4], k5 = k[5], k6 = k[6],
                         k7 = k[7], k8 = k[8];
            for (std::size_t h = 0; h < d.height; ++h) {
                const double* r0 = p + h * pw;
                const double* r1 = r0 + pw;
                const double* r2 = r1 + pw;
                double* orow = out + h * d.width;
#pragma omp simd
                for (std::size_t j = 0; j < d.width; ++j)
                    orow[j] += k0 * r0[j] + k1 * r0[j + 1] + k2 * r0[j + 2] + k3 * r1[j] + k4 * r1[j + 1] +
                               k5 * r1[j + 2] + k6 * r2[j] + k7 * r2[j + 1] + k8 * r2[j + 2];
            }
        }
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
    const std::size_t pw = d.width + 2;
    const std::size_t pplane = (d.height + 2) * pw;

    if (grad_x) {
        // Gradient w.r.t. the padded input is a correlation of the zero-padded
        // output gradient with the flipped kernel; fold_plane undoes the reflection.
        const std::size_t zw = d.width + 4;
        const std::size_t zplane = (d.height + 4) * zw;
        std::vector<double> gz(d.batch * co * zplane, 0.0);
        for (std::size_t bo = 0; bo < d.batch * co; ++bo)
            for (std::size_t h = 0; h < d.height; ++h)
                std::copy_n(grad_out.raw() + bo * d.plane() + h * d.width, d.width, gz.data() + bo * zplane + (h + 2) * zw + 2);

#pragma omp parallel for schedule(static)
        for (std::ptrdiff_t bc = 0; bc < loop_count(d.batch * d.channels); ++bc) {
            const std::size_t b = static_cast<std::size_t>(bc) / d.channels;
            const std::size_t c = static_cast<std::size_t>(bc) % d.channels;
            std::vector<double> gp(pplane, 0.0);
            for (std::size_t o = 0; o < co; ++o) {
                const double* k = weight.raw() + (o * d.channels + c) * 9;
                const double k0 = k[8], k1 = k[7], k2 = k[6], k3 = k[5], k4 = k[4], k5 = k[3], k6 = k[2],
                             k7 = k[1], k8 = k[0];
                const double* z = gz.data() + (b * co + o) * zplane;
                for (std::size_t py = 0; py < d.height + 2; ++py) {
                    const double* r0 = z + py * zw;
                    const double* r1 = r0 + zw;
                    const double* r2 = r1 + zw;
                    double* dst = gp.data() + py * pw;
#pragma omp simd
                    for (std::size_t j = 0; j < pw; ++j)
                        dst[j] += k0 * r0[j] + k1 * r0[j + 1] + k2 * r0[j + 2] + k3 * r1[j] + k4 * r1[j + 1] +
                                  k5 * r1[j + 2] + k6 * r2[j] + k7 * r2[j + 1] + k8 * r2[j + 2];
                }
            }
            fold_plane(gp.data(), grad_x->raw() + static_cast<std::size_t>(bc) * d.plane(), d.height, d.width, 1);
        }
    }

    if (grad_weight) {
        const std::vector<double> padded = pad_all(x, 1);
#pragma omp parallel for schedule(static)
        for (std::ptrdiff_t oc = 0; oc < loop_count(co * d.channels); ++oc) {
            const std::size_t o = static_cast<std::size_t>(oc) / d.channels;
            const std::size_t c = static_cast<std::size_t>(oc) % d.channels;
            double s0 = 0, s1 = 0, s2 = 0, s3 = 0, s4 = 0, s5 = 0, s6 = 0, s7 = 0, s8 = 0;
            for (std::size_t b = 0; b < d.batch; ++b) {
                const double* p = padded.data() + (b * d.channels + c) * pplane;
                const double* g = grad_out.raw() + (b * co + o) * d.plane();
                for (std::size_t h = 0; h < d.height; ++h) {
                    const double* gr = g + h * d.width;
                    const double* r0 = p + h * pw;
                    const double* r1 = r0 + pw;
                    const double* r2 = r1 + pw;
#pragma omp simd reduction(+ : s0, s1, s2, s3, s4, s5, s6, s7, s8)
                    for (std::size_t j = 0; j < d.width; ++j) {
                        s0 += gr[j] * r0[j];
                        s1 += gr[j] * r0[j + 1];
                        s2 += gr[j] * r0[j + 2];
                        s3 += gr[j] * r1[j];
                        s4 += gr[j] * r1[j + 1];
                        s5 += gr[j] * r1[j + 2];
                        s6 += gr[j] * r2[j];
                        s7 += gr[j] * r2[j + 1];
                        s8 += gr[j] * r2[j + 2];
                    }
                }
            }
            double* gw = grad_weight->raw() + static_cast<std::size_t>(oc) * 9;
            gw[0] += s0;
            gw[1] += s1;
            gw[2] += s2;
            gw[3] += s3;
            gw[4] += s4;
            gw[5] += s5;
            gw[6] += s6;
            gw[7] += s7;
            gw[8] += s8;
        }
    }

    if (grad_bias) {
        for (std::size_t o = 0; o < co; ++o) {
            double s = 0.0;
            for (std::size_t b = 0; b < d.batch; ++b) {
                const double* g = grad_out.raw() + (b * co + o) * d.plane();
                for (std::size_t i = 0; i < d.plane(); ++i)
                    s += g[i];
            }
            (*grad_bias)[o] += s;
        }
    }
}

Tensor conv1x1_forward(const Tensor& x, const Tensor& weight, const Tensor& bias)
{
    check_conv_args(x, weight, bias, 1);
    const Dims4 d = dims4(x);
    const std::size_t co = weight.dim(0);
    Tensor y({d.batch, co, d.height, d.width});
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t bo = 0; bo < loop_count(d.batch * co); ++bo) {
        const std::size_t b = static_cast<std::size_t>(bo) / co;
        const std::size_t o = static_cast<std::size_t>(bo) % co;
        double* out = y.raw() + static_cast<std::size_t>(bo) * d.plane();
        std::fill_n(out, d.plane(), bias.empty() ? 0.0 : bias[o]);
        for (std::size_t c = 0; c < d.channels; ++c) {
            const double wv = weight[o * d.channels + c];
            const double* in = x.raw() + (b * d.channels + c) * d.plane();
#pragma omp simd
            for (std::size_t i = 0; i < d.plane(); ++i)
                out[i] += wv * in[i];
        }
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

    if (grad_x) {
#pragma omp parallel for schedule(static)
        for (std::ptrdiff_t bc = 0; bc < loop_count(d.batch * d.channels); ++bc) {
            const std::size_t b = static_cast<std::size_t>(bc) / d.channels;
            const std::size_t c = static_cast<std::size_t>(bc) % d.channels;
            double* gx = grad_x->raw() + static_cast<std::size_t>(bc) * d.plane();
            for (std::size_t o = 0; o < co; ++o) {
                const double wv = weight[o * d.channels + c];
                const double* g = grad_out.raw() + (b * co + o) * d.plane();
#pragma omp simd
                for (std::size_t i = 0; i < d.plane(); ++i)
                    gx[i] += wv * g[i];
            }
        }
    }

    if (grad_weight) {
#pragma omp parallel for schedule(static)
        for (std::ptrdiff_t oc = 0; oc < loop_count(co * d.channels); ++oc) {
            const std::size_t o = static_cast<std::size_t>(oc) / d.channels;
            const std::size_t c = static_cast<std::size_t>(oc) % d.channels;
            double s = 0.0;
            for (std::size_t b = 0; b < d.batch; ++b) {
                const double* g = grad_out.raw() + (b * co + o) * d.plane();
                const double* in = x.raw() + (b * d.channels + c) * d.plane();
                for (std::size_t i = 0; i < d.plane(); ++i)
                    s += g[i] * in[i];
            }
            (*grad_weight)[static_cast<std::size_t>(oc)] += s;
        }
    }

    if (grad_bias) {
        for (std::size_t o = 0; o < co; ++o) {
            double s = 0.0;
            for (std::size_t b = 0; b < d.batch; ++b) {
                const double* g = grad_out.raw() + (b * co + o) * d.plane();
                for (std::size_t i = 0; i < d.plane(); ++i)
                    s += g[i];
            }
            (*grad_bias)[o] += s;
        }
    }
}

Tensor smooth_forward(const Tensor& x, std::span<const double> taps)
{
    detail::check_taps(taps.size());
    const Dims4 d = dims4(x);
    const std::size_t half = taps.size() / 2;
    Tensor y(x.shape());

#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t p = 0; p < loop_count(d.batch * d.channels); ++p) {
        const double* in = x.raw() + static_cast<std::size_t>(p) * d.plane();
        double* out = y.raw() + static_cast<std::size_t>(p) * d.plane();
        std::vector<double> rowbuf(d.width + 2 * half);
        std::vector<double> tmp(d.plane());

        // Horizontal pass.
        for (std::size_t h = 0; h < d.height; ++h) {
            const double* row = in + h * d.width;
            for (std::size_t j = 0; j < rowbuf.size(); ++j)
                rowbuf[j] = row[reflect_index(as_index(j) - as_index(half), as_index(d.width))];
            double* trow = tmp.data() + h * d.width;
            for (std::size_t j = 0; j < d.width; ++j) {
                const double center = row[j];
                double acc = 0.0;
                for (std::size_t t = 0; t < taps.size(); ++t)
                    acc += taps[t] * (rowbuf[j + t] - center);
                trow[j] = center + acc;
            }
        }

        // Vertical pass.
        for (std::size_t h = 0; h < d.height; ++h) {
            const double* center = tmp.data() + h * d.width;
            double* orow = out + h * d.width;
            std::fill_n(orow, d.width, 0.0);
            for (std::size_t t = 0; t < taps.size(); ++t) {
                const auto sh = static_cast<std::size_t>(
                    reflect_index(as_index(h + t) - as_index(half), as_index(d.height)));
                const double* src = tmp.data() + sh * d.width;
                const double tv = taps[t];
#pragma omp simd
                for (std::size_t j = 0; j < d.width; ++j)
                    orow[j] += tv * (src[j] - center[j]);
            }
            for (std::size_t j = 0; j < d.width; ++j)
                orow[j] += center[j];
        }
    }
    return y;
}

Tensor smooth_backward(const Tensor& grad_out, std::span<const double> taps)
{
    detail::check_taps(taps.size());
    const Dims4 d = dims4(grad_out);
    const std::size_t half = taps.size() / 2;
    Tensor gx(grad_out.shape());

#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t p = 0; p < loop_count(d.batch * d.channels); ++p) {
        const double* g = grad_out.raw() + static_cast<std::size_t>(p) * d.plane();
        double* out = gx.raw() + static_cast<std::size_t>(p) * d.plane();

        // Transpose of the vertical pass.
        std::vector<double> gt(g, g + d.plane());
        for (std::size_t h = 0; h < d.height; ++h) {
            const double* grow = g + h * d.width;
            double* center = gt.data() + h * d.width;
            for (std::size_t t = 0; t < taps.size(); ++t) {
                const auto sh = static_cast<std::size_t>(
                    reflect_index(as_index(h + t) - as_index(half), as_index(d.height)));
                double* dst = gt.data() + sh * d.width;
                const double tv = taps[t];
                for (std::size_t j = 0; j < d.width; ++j) {
                    dst[j] += tv * grow[j];
                    center[j] -= tv * grow[j];
                }
            }
        }

        // Transpose of the horizontal pass.
        std::vector<double> rowbuf(d.width + 2 * half);
        for (std::size_t h = 0; h < d.height; ++h) {
            const double* grow = gt.data() + h * d.width;
            double* orow = out + h * d.width;
            std::fill(rowbuf.begin(), rowbuf.end(), 0.0);
            for (std::size_t j = 0; j < d.width; ++j) {
                orow[j] += grow[j];
                for (std::size_t t = 0; t < taps.size(); ++t) {
                    rowbuf[j + t] += taps[t] * grow[j];
                    orow[j] -= taps[t] * grow[j];
                }
            }
            for (std::size_t j = 0; j < rowbuf.size(); ++j)
                orow[reflect_index(as_index(j) - as_index(half), as_index(d.width))] += rowbuf[j];
        }
    }
    return gx;
}

namespace {

struct AxisSample {
    std::size_t lo;
    std::size_t hi;
    double t;
};

std::vector<AxisSample> axis_samples(std::size_t in, std::size_t out)
{
    std::vector<AxisSample> s(out);
    const double scale = static_cast<double>(in) / static_cast<double>(out);
    for (std::size_t i = 0; i < out; ++i) {
        const double src = std::max(0.0, (static_cast<double>(i) + 0.5) * scale - 0.5);
        const std::size_t lo = std::min(static_cast<std::size_t>(src), in - 1);
        s[i] = {lo, std::min(lo + 1, in - 1), src - static_cast<double>(lo)};
    }
    return s;
}

}  // namespace

Tensor resize_forward(const Tensor& x, std::size_t out_h, std::size_t out_w)
{
    const Dims4 d = dims4(x);
    if (out_h == 0 || out_w == 0)
        throw DomainError("resize target must be at least 1x1");
    if (out_h == d.height && out_w == d.width)
        return x;
    const auto ys = axis_samples(d.height, out_h);
    const auto xs = axis_samples(d.width, out_w);
    Tensor y({d.batch, d.channels, out_h, out_w});
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t p = 0; p < loop_count(d.batch * d.channels); ++p) {
        const double* in = x.raw() + static_cast<std::size_t>(p) * d.plane();
        double* out = y.raw() + static_cast<std::size_t>(p) * out_h * out_w;
        for (std::size_t h = 0; h < out_h; ++h) {
            const double* r0 = in + ys[h].lo * d.width;
            const double* r1 = in + ys[h].hi * d.width;
            const double ty = ys[h].t;
            for (std::size_t w = 0; w < out_w; ++w) {
                const AxisSample& sx = xs[w];
                const double top = r0[sx.lo] + sx.t * (r0[sx.hi] - r0[sx.lo]);
                const double bot = r1[sx.lo] + sx.t * (r1[sx.hi] - r1[sx.lo]);
                out[h * out_w + w] = top + ty * (bot - top);
            }
        }
    }
    return y;
}

Tensor resize_backward(const Tensor& grad_out, std::size_t in_h, std::size_t in_w)
{
    const Dims4 d = dims4(grad_out);
    if (in_h == d.height && in_w == d.width)
        return grad_out;
    const auto ys = axis_samples(in_h, d.height);
    const auto xs = axis_samples(in_w, d.width);
    Tensor gx({d.batch, d.channels, in_h, in_w});
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t p = 0; p < loop_count(d.batch * d.channels); ++p) {
        const double* g = grad_out.raw() + static_cast<std::size_t>(p) * d.plane();
        double* out = gx.raw() + static_cast<std::size_t>(p) * in_h * in_w;
        for (std::size_t h = 0; h < d.height; ++h) {
            double* r0 = out + ys[h].lo * in_w;
            double* r1 = out + ys[h].hi * in_w;
            const double ty = ys[h].t;
            for (std::size_t w = 0; w < d.width; ++w) {
                const AxisSample& sx = xs[w];
                const double gv = g[h * d.width + w];
                const double top = (1.0 - ty) * gv;
                const double bot = ty * gv;
                r0[sx.lo] += (1.0 - sx.t) * top;
                r0[sx.hi] += sx.t * top;
                r1[sx.lo] += (1.0 - sx.t) * bot;
                r1[sx.hi] += sx.t * bot;
            }
        }
    }
    return gx;
}

}  // namespace afrda::kernels
