#pragma once

#include "afrda/autodiff.hpp"
#include "afrda/tensor.hpp"

#include <vector>

namespace afrda {

/// Normalized, truncated k x k Gaussian. The 2-D weights are the outer product
/// of `taps` with itself; they are fixed constants, never learned.
class GaussianKernel {
public:
    GaussianKernel(double gamma, int size);

    double gamma() const noexcept { return gamma_; }
    int size() const noexcept { return size_; }
    const std::vector<double>& taps() const noexcept { return taps_; }

    /// Weight at integer offsets (di, dj) from the center, |di|,|dj| <= size/2.
    double weight(int di, int dj) const;
    /// Full k x k weight grid, row-major.
    std::vector<double> weights() const;

private:
    double gamma_;
    int size_;
    std::vector<double> taps_;
};

GaussianKernel build_kernel(double gamma, int size);

/// Per-channel Gaussian smoothing with reflect padding.
Tensor smooth(const Tensor& x, const GaussianKernel& kernel);
Var smooth(Var x, const GaussianKernel& kernel);

/// x - smooth(x): the boundary (high-frequency) residual.
Tensor high_freq(const Tensor& x, const GaussianKernel& kernel);
Var high_freq(Var x, const GaussianKernel& kernel);

}  // namespace afrda
