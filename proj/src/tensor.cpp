#include "mygo/tensor.hpp"

#include <cmath>
#include <functional>
#include <numeric>

#include "mygo/errors.hpp"

namespace mygo {

std::string shape_string(const Shape& shape) {
    std::string out = "[";
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) out += "x";
        out += std::to_string(shape[i]);
    }
    return out + "]";
}

namespace {

std::size_t element_count(const Shape& shape) {
    if (shape.empty() || shape.size() > 3)
        throw NumericError("tensor rank must be 1..3, got " + std::to_string(shape.size()));
    return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

}  // namespace

template <typename Real>
Tensor<Real>::Tensor(Shape shape, Real fill)
    : shape_(std::move(shape)), data_(element_count(shape_), fill) {}

template <typename Real>
Tensor<Real>::Tensor(Shape shape, std::vector<Real> values)
    : shape_(std::move(shape)), data_(std::move(values)) {
    if (element_count(shape_) != data_.size())
        throw NumericError("tensor shape " + shape_string(shape_) + " does not match " +
                           std::to_string(data_.size()) + " values");
}

template <typename Real>
void Tensor<Real>::set_requires_grad(bool flag) {
    requires_grad_ = flag;
    if (flag)
        grad_.assign(data_.size(), Real{0});
    else
        grad_.clear();
}

template <typename Real>
void Tensor<Real>::zero_grad() {
    std::fill(grad_.begin(), grad_.end(), Real{0});
}

template <typename Real>
void Tensor<Real>::check_finite(const char* what) const {
    for (Real v : data_)
        if (!std::isfinite(v)) throw NumericError(std::string("non-finite value in ") + what);
}

template class Tensor<float>;
template class Tensor<double>;

}  // namespace mygo
