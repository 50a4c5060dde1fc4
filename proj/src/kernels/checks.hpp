#pragma once

#include "afrda/tensor.hpp"

namespace afrda::kernels::detail {

inline void check_conv_args(const Tensor& x, const Tensor& weight, const Tensor& bias, std::size_t taps)
{
    const Dims4 d = dims4(x);
    const bool ok_rank = taps == 9 ? weight.rank() == 4 && weight.dim(2) == 3 && weight.dim(3) == 3
                                   : weight.rank() == 2;
    if (!ok_rank || weight.dim(1) != d.channels)
        throw ShapeError("conv weight " + to_string(weight.shape()) + " does not match input " +
                         to_string(x.shape()));
    if (!bias.empty() && (bias.rank() != 1 || bias.dim(0) != weight.dim(0)))
        throw ShapeError("conv bias " + to_string(bias.shape()) + " does not match weight " +
                         to_string(weight.shape()));
}

inline void check_grad_out(const Tensor& grad_out, const Dims4& x, std::size_t out_channels)
{
    const Dims4 g = dims4(grad_out);
    if (g.batch != x.batch || g.channels != out_channels || g.height != x.height || g.width != x.width)
        throw ShapeError("gradient shape " + to_string(grad_out.shape()) + " does not match output");
}

inline void check_taps(std::size_t n)
{
    if (n == 0 || n % 2 == 0)
        throw DomainError("smoothing taps must have odd length");
}

}  // namespace afrda::kernels::detail
