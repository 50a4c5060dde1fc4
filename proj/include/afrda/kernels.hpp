#pragma once

// Raw forward/backward kernels for the heavy spatial operations.
//
// Two implementations share one contract:
//   afrda::kernels            OpenMP-parallel, pre-padded, vectorizable loops
//   afrda::kernels::reference plain serial loops, one tap at a time
//
// Every kernel partitions work over independent output elements and sums in a
// fixed order, so results do not depend on the thread count. Backward kernels
// accumulate (+=) into the gradients they are handed; a null pointer skips that
// gradient. All spatial kernels use reflect padding and cross-correlation.

#include "afrda/tensor.hpp"

#include <cstddef>
#include <span>

namespace afrda::kernels {

/// Maps an out-of-range index back into [0, n) by mirror reflection about the
/// edge pixels (…2 1 | 0 1 2 … n-1 | n-2 …). A length-1 axis maps everything to 0.
inline std::ptrdiff_t reflect_index(std::ptrdiff_t i, std::ptrdiff_t n) noexcept
{
    if (n == 1)
        return 0;
    const std::ptrdiff_t period = 2 * (n - 1);
    i %= period;
    if (i < 0)
        i += period;
    return i < n ? i : period - i;
}

// x: B x Ci x H x W, weight: Co x Ci x 3 x 3, bias: Co (or empty).
Tensor conv3x3_forward(const Tensor& x, const Tensor& weight, const Tensor& bias);
void conv3x3_backward(const Tensor& x, const Tensor& weight, const Tensor& grad_out,
                      Tensor* grad_x, Tensor* grad_weight, Tensor* grad_bias);

// x: B x Ci x H x W, weight: Co x Ci, bias: Co (or empty).
Tensor conv1x1_forward(const Tensor& x, const Tensor& weight, const Tensor& bias);
void conv1x1_backward(const Tensor& x, const Tensor& weight, const Tensor& grad_out,
                      Tensor* grad_x, Tensor* grad_weight, Tensor* grad_bias);

// Per-channel Gaussian smoothing with the normalized 1-D taps (odd length);
// the 2-D kernel is their outer product. Evaluated in residual form
// x[p] + sum_j w_j (x[p+j] - x[p]), which maps constant fields to themselves exactly.
Tensor smooth_forward(const Tensor& x, std::span<const double> taps);
Tensor smooth_backward(const Tensor& grad_out, std::span<const double> taps);

// Bilinear resampling, align-corners false, lerp form a + t (b - a).
Tensor resize_forward(const Tensor& x, std::size_t out_h, std::size_t out_w);
Tensor resize_backward(const Tensor& grad_out, std::size_t in_h, std::size_t in_w);

namespace reference {

Tensor conv3x3_forward(const Tensor& x, const Tensor& weight, const Tensor& bias);
void conv3x3_backward(const Tensor& x, const Tensor& weight, const Tensor& grad_out,
                      Tensor* grad_x, Tensor* grad_weight, Tensor* grad_bias);

Tensor conv1x1_forward(const Tensor& x, const Tensor& weight, const Tensor& bias);
void conv1x1_backward(const Tensor& x, const Tensor& weight, const Tensor& grad_out,
                      Tensor* grad_x, Tensor* grad_weight, Tensor* grad_bias);

// Direct 2-D evaluation with the full outer-product kernel.
Tensor smooth_forward(const Tensor& x, std::span<const double> taps);
Tensor smooth_backward(const Tensor& grad_out, std::span<const double> taps);

Tensor resize_forward(const Tensor& x, std::size_t out_h, std::size_t out_w);
Tensor resize_backward(const Tensor& grad_out, std::size_t in_h, std::size_t in_w);

}  // namespace reference

}  // namespace afrda::kernels
