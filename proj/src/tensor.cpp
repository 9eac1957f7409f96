#include "inducer/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <sstream>

namespace inducer {

std::string shape_to_string(const Shape& shape)
{
    std::ostringstream out;
    out << '[';
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) out << 'x';
        out << shape[i];
    }
    out << ']';
    return out.str();
}

std::size_t shape_numel(const Shape& shape)
{
    std::size_t n = 1;
    for (auto d : shape) n *= d;
    return n;
}

namespace {

void check_shape(const Shape& shape)
{
    if (shape.empty()) throw ShapeError("tensor shape must have at least one dimension");
    for (auto d : shape) {
        if (d == 0) throw ShapeError("tensor dimensions must be positive, got " + shape_to_string(shape));
    }
}

}  // namespace

Tensor::Tensor(Shape shape, double fill) : impl_(std::make_shared<TensorImpl>())
{
    check_shape(shape);
    impl_->data.assign(shape_numel(shape), fill);
    impl_->shape = std::move(shape);
}

Tensor::Tensor(Shape shape, std::vector<double> data) : impl_(std::make_shared<TensorImpl>())
{
    check_shape(shape);
    if (shape_numel(shape) != data.size()) {
        throw ShapeError("data length " + std::to_string(data.size()) + " does not match shape " +
                         shape_to_string(shape));
    }
    impl_->shape = std::move(shape);
    impl_->data = std::move(data);
}

Tensor Tensor::vector(std::vector<double> values)
{
    Shape shape{values.size()};
    return Tensor(std::move(shape), std::move(values));
}

Tensor Tensor::matrix(std::initializer_list<std::initializer_list<double>> rows)
{
    const std::size_t r = rows.size();
    const std::size_t c = r ? rows.begin()->size() : 0;
    std::vector<double> data;
    data.reserve(r * c);
    for (const auto& row : rows) {
        if (row.size() != c) throw ShapeError("ragged matrix literal");
        data.insert(data.end(), row.begin(), row.end());
    }
    return Tensor(Shape{r, c}, std::move(data));
}

Tensor Tensor::identity(std::size_t n)
{
    Tensor t(Shape{n, n});
    for (std::size_t i = 0; i < n; ++i) t.impl_->data[i * n + i] = 1.0;
    return t;
}

std::size_t Tensor::rows() const
{
    return rank() == 1 ? 1 : impl_->shape[0];
}

std::size_t Tensor::cols() const
{
    return rank() == 1 ? impl_->shape[0] : numel() / impl_->shape[0];
}

double Tensor::item() const
{
    if (numel() != 1) throw ContractError("item() on tensor of shape " + shape_to_string(shape()));
    return impl_->data[0];
}

std::span<double> Tensor::mutable_grad()
{
    if (impl_->grad.empty()) impl_->grad.assign(impl_->data.size(), 0.0);
    return impl_->grad;
}

void Tensor::zero_grad()
{
    std::fill(impl_->grad.begin(), impl_->grad.end(), 0.0);
}

Tensor Tensor::clone() const
{
    Tensor copy(impl_->shape, impl_->data);
    copy.impl_->requires_grad = impl_->requires_grad;
    return copy;
}

bool bit_equal(const Tensor& a, const Tensor& b)
{
    if (a.shape() != b.shape()) return false;
    return std::memcmp(a.data().data(), b.data().data(), a.numel() * sizeof(double)) == 0;
}

double max_abs_diff(const Tensor& a, const Tensor& b)
{
    if (a.shape() != b.shape()) {
        throw ShapeError("max_abs_diff shape mismatch " + shape_to_string(a.shape()) + " vs " +
                         shape_to_string(b.shape()));
    }
    double m = 0.0;
    for (std::size_t i = 0; i < a.numel(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
    return m;
}

bool all_finite(const Tensor& t)
{
    return std::all_of(t.data().begin(), t.data().end(), [](double v) { return std::isfinite(v); });
}

}  // namespace inducer
