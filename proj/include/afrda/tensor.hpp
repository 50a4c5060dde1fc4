#pragma once

#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace afrda {

using Shape = std::vector<std::size_t>;

class ShapeError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

class DomainError : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

std::string to_string(const Shape& shape);
std::size_t element_count(const Shape& shape);

/// Dense row-major array of doubles. The last axis is contiguous.
class Tensor {
public:
    Tensor() = default;
    explicit Tensor(Shape shape, double fill = 0.0);
    Tensor(Shape shape, std::vector<double> data);

    static Tensor scalar(double value);
    static Tensor zeros_like(const Tensor& other) { return Tensor(other.shape_); }

    const Shape& shape() const noexcept { return shape_; }
    std::size_t rank() const noexcept { return shape_.size(); }
    std::size_t size() const noexcept { return data_.size(); }
    std::size_t dim(std::size_t axis) const { return shape_.at(axis); }
    bool empty() const noexcept { return data_.empty(); }

    std::span<double> data() noexcept { return data_; }
    std::span<const double> data() const noexcept { return data_; }
    double* raw() noexcept { return data_.data(); }
    const double* raw() const noexcept { return data_.data(); }

    double& operator[](std::size_t i) noexcept { return data_[i]; }
    double operator[](std::size_t i) const noexcept { return data_[i]; }

    // 4-D accessors for B x C x H x W tensors.
    double& at(std::size_t b, std::size_t c, std::size_t h, std::size_t w);
    double at(std::size_t b, std::size_t c, std::size_t h, std::size_t w) const;

    double item() const;

    Tensor reshaped(Shape shape) const;

    friend bool operator==(const Tensor& a, const Tensor& b) = default;

private:
    Shape shape_;
    std::vector<double> data_;
};

/// Extents of a B x C x H x W tensor.
struct Dims4 {
    std::size_t batch = 0;
    std::size_t channels = 0;
    std::size_t height = 0;
    std::size_t width = 0;

    std::size_t plane() const noexcept { return height * width; }
    std::size_t count() const noexcept { return batch * channels * height * width; }
    Shape shape() const { return {batch, channels, height, width}; }
};

Dims4 dims4(const Tensor& t);

/// Integer class map of shape B x H x W.
struct LabelMap {
    std::size_t batch = 0;
    std::size_t height = 0;
    std::size_t width = 0;
    std::vector<int> data;

    LabelMap() = default;
    LabelMap(std::size_t b, std::size_t h, std::size_t w, int fill = 0)
        : batch(b), height(h), width(w), data(b * h * w, fill) {}

    std::size_t plane() const noexcept { return height * width; }
    int& at(std::size_t b, std::size_t h, std::size_t w) { return data[(b * height + h) * width + w]; }
    int at(std::size_t b, std::size_t h, std::size_t w) const { return data[(b * height + h) * width + w]; }

    friend bool operator==(const LabelMap&, const LabelMap&) = default;
};

inline constexpr int kIgnoreLabel = 255;

// Batch helpers: slice item i of a B x ... tensor into a 1 x ... tensor, and the inverse.
Tensor take(const Tensor& batch, std::size_t index);
Tensor stack(std::span<const Tensor> items);
LabelMap take(const LabelMap& batch, std::size_t index);
LabelMap stack(std::span<const LabelMap> items);

}  // namespace afrda
