#include "afrda/gaussian.hpp"

#include "afrda/kernels.hpp"

#include <cmath>
#include <cstdlib>

namespace afrda {

GaussianKernel::GaussianKernel(double gamma, int size)
    : gamma_(gamma), size_(size)
{
    if (!(gamma > 0.0) || !std::isfinite(gamma))
        throw DomainError("Gaussian sigma must be positive, got " + std::to_string(gamma));
    if (size < 1 || size % 2 == 0)
        throw DomainError("Gaussian kernel size must be odd and >= 1, got " + std::to_string(size));

    // exp(-(i^2 + j^2) / 2g^2) = exp(-i^2 / 2g^2) * exp(-j^2 / 2g^2): normalizing the
    // 1-D factor normalizes the 2-D grid, and the 1 / (2 pi g^2) prefactor cancels.
    const int half = size / 2;
    taps_.resize(static_cast<std::size_t>(size));
    double total = 0.0;
    for (int i = -half; i <= half; ++i) {
        const double v = std::exp(-static_cast<double>(i * i) / (2.0 * gamma * gamma));
        taps_[static_cast<std::size_t>(i + half)] = v;
        total += v;
    }
    for (double& v : taps_)
        v /= total;
    if (!(taps_.front() * taps_.front() > 0.0))
        throw DomainError("Gaussian sigma " + std::to_string(gamma) + " is too small for a " + std::to_string(size) +
                          "x" + std::to_string(size) + " kernel: corner weights underflow");
}

double GaussianKernel::weight(int di, int dj) const
{
    const int half = size_ / 2;
    if (std::abs(di) > half || std::abs(dj) > half)
        throw DomainError("kernel offset out of range");
    return taps_[static_cast<std::size_t>(di + half)] * taps_[static_cast<std::size_t>(dj + half)];
}

std::vector<double> GaussianKernel::weights() const
{
    std::vector<double> w;
    w.reserve(taps_.size() * taps_.size());
    for (double a : taps_)
        for (double b : taps_)
            w.push_back(a * b);
    return w;
}

GaussianKernel build_kernel(double gamma, int size)
{
    return GaussianKernel(gamma, size);
}

Tensor smooth(const Tensor& x, const GaussianKernel& kernel)
{
    return kernels::smooth_forward(x, kernel.taps());
}

Var smooth(Var x, const GaussianKernel& kernel)
{
    Tensor out = smooth(x.value(), kernel);
    return x.tape().record(std::move(out), {x}, [x, taps = kernel.taps()](Tape& t, const Tensor& g) {
        t.accumulate(x, kernels::smooth_backward(g, taps));
    });
}

Tensor high_freq(const Tensor& x, const GaussianKernel& kernel)
{
    Tensor s = smooth(x, kernel);
    for (std::size_t i = 0; i < s.size(); ++i)
        s[i] = x[i] - s[i];
    return s;
}

Var high_freq(Var x, const GaussianKernel& kernel)
{
    return sub(x, smooth(x, kernel));
}

}  // namespace afrda
