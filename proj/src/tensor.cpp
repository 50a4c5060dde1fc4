#include "afrda/tensor.hpp"

#include <algorithm>
#include <functional>
#include <numeric>
#include <sstream>

namespace afrda {

std::string to_string(const Shape& shape)
{
    std::ostringstream os;
    os << '[';
    for (std::size_t i = 0; i < shape.size(); ++i)
        os << (i ? "x" : "") << shape[i];
    os << ']';
    return os.str();
}

std::size_t element_count(const Shape& shape)
{
    return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

static void check_extents(const Shape& shape)
{
    if (std::any_of(shape.begin(), shape.end(), [](std::size_t e) { return e == 0; }))
        throw ShapeError("tensor extents must be positive, got " + to_string(shape));
}

Tensor::Tensor(Shape shape, double fill)
    : shape_(std::move(shape))
{
    check_extents(shape_);
    data_.assign(element_count(shape_), fill);
}

Tensor::Tensor(Shape shape, std::vector<double> data)
    : shape_(std::move(shape)), data_(std::move(data))
{
    check_extents(shape_);
    if (data_.size() != element_count(shape_))
        throw ShapeError("data length " + std::to_string(data_.size()) + " does not match shape " +
                         to_string(shape_));
}

Tensor Tensor::scalar(double value)
{
    return Tensor({1}, value);
}

double& Tensor::at(std::size_t b, std::size_t c, std::size_t h, std::size_t w)
{
    return data_[((b * shape_[1] + c) * shape_[2] + h) * shape_[3] + w];
}

double Tensor::at(std::size_t b, std::size_t c, std::size_t h, std::size_t w) const
{
    return data_[((b * shape_[1] + c) * shape_[2] + h) * shape_[3] + w];
}

double Tensor::item() const
{
    if (data_.size() != 1)
        throw DomainError("item() requires a single-element tensor, got " + to_string(shape_));
    return data_[0];
}

Tensor Tensor::reshaped(Shape shape) const
{
    return Tensor(std::move(shape), data_);
}

Dims4 dims4(const Tensor& t)
{
    if (t.rank() != 4)
        throw ShapeError("expected a B x C x H x W tensor, got " + to_string(t.shape()));
    return {t.dim(0), t.dim(1), t.dim(2), t.dim(3)};
}

Tensor take(const Tensor& batch, std::size_t index)
{
    if (batch.rank() < 1 || index >= batch.dim(0))
        throw ShapeError("batch index " + std::to_string(index) + " out of range for " + to_string(batch.shape()));
    Shape shape = batch.shape();
    shape[0] = 1;
    const std::size_t stride = batch.size() / batch.dim(0);
    auto src = batch.data().subspan(index * stride, stride);
    return Tensor(std::move(shape), std::vector<double>(src.begin(), src.end()));
}

Tensor stack(std::span<const Tensor> items)
{
    if (items.empty())
        throw ShapeError("stack of zero tensors");
    Shape shape = items.front().shape();
    if (shape.empty() || shape[0] != 1)
        throw ShapeError("stack expects leading extent 1, got " + to_string(shape));
    std::vector<double> data;
    data.reserve(items.front().size() * items.size());
    for (const Tensor& t : items) {
        if (t.shape() != shape)
            throw ShapeError("stack shape mismatch: " + to_string(t.shape()) + " vs " + to_string(shape));
        data.insert(data.end(), t.data().begin(), t.data().end());
    }
    shape[0] = items.size();
    return Tensor(std::move(shape), std::move(data));
}

LabelMap take(const LabelMap& batch, std::size_t index)
{
    if (index >= batch.batch)
        throw ShapeError("label batch index out of range");
    LabelMap out(1, batch.height, batch.width);
    std::copy_n(batch.data.begin() + static_cast<std::ptrdiff_t>(index * batch.plane()), batch.plane(),
                out.data.begin());
    return out;
}

LabelMap stack(std::span<const LabelMap> items)
{
    if (items.empty())
        throw ShapeError("stack of zero label maps");
    LabelMap out(0, items.front().height, items.front().width);
    for (const LabelMap& m : items) {
        if (m.height != out.height || m.width != out.width)
            throw ShapeError("label map stack size mismatch");
        out.data.insert(out.data.end(), m.data.begin(), m.data.end());
        out.batch += m.batch;
    }
    return out;
}

}  // namespace afrda
