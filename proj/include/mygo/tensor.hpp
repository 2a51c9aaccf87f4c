#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

namespace mygo {

using Shape = std::vector<std::size_t>;

std::string shape_string(const Shape& shape);

/// Dense row-major array of rank 1..3 with a gradient slot of the same shape.
template <typename Real>
class Tensor {
public:
    using value_type = Real;

    Tensor() = default;
    explicit Tensor(Shape shape, Real fill = Real{0});
    Tensor(Shape shape, std::vector<Real> values);

    const Shape& shape() const { return shape_; }
    std::size_t rank() const { return shape_.size(); }
    std::size_t size() const { return data_.size(); }
    std::size_t dim(std::size_t axis) const { return shape_.at(axis); }
    /// Leading extent and product of the remaining extents.
    std::size_t rows() const { return shape_.empty() ? 0 : shape_[0]; }
    std::size_t cols() const { return rows() == 0 ? 0 : data_.size() / rows(); }

    std::span<Real> data() { return data_; }
    std::span<const Real> data() const { return data_; }
    std::span<Real> grad() { return grad_; }
    std::span<const Real> grad() const { return grad_; }

    std::span<Real> row(std::size_t r) { return {data_.data() + r * cols(), cols()}; }
    std::span<const Real> row(std::size_t r) const { return {data_.data() + r * cols(), cols()}; }

    Real& operator[](std::size_t i) { return data_[i]; }
    Real operator[](std::size_t i) const { return data_[i]; }
    Real& operator()(std::size_t i, std::size_t j) { return data_[i * shape_[1] + j]; }
    Real operator()(std::size_t i, std::size_t j) const { return data_[i * shape_[1] + j]; }
    Real& operator()(std::size_t i, std::size_t j, std::size_t k) {
        return data_[(i * shape_[1] + j) * shape_[2] + k];
    }
    Real operator()(std::size_t i, std::size_t j, std::size_t k) const {
        return data_[(i * shape_[1] + j) * shape_[2] + k];
    }

    bool requires_grad() const { return requires_grad_; }
    void set_requires_grad(bool flag);
    void zero_grad();

    /// Throws NumericError naming `what` if any value is NaN or infinite.
    void check_finite(const char* what) const;

    template <typename Other>
    Tensor<Other> cast() const {
        Tensor<Other> out(shape_);
        for (std::size_t i = 0; i < data_.size(); ++i) out[i] = static_cast<Other>(data_[i]);
        out.set_requires_grad(requires_grad_);
        return out;
    }

    bool operator==(const Tensor& other) const {
        return shape_ == other.shape_ && data_ == other.data_;
    }

private:
    Shape shape_;
    std::vector<Real> data_;
    std::vector<Real> grad_;
    bool requires_grad_ = false;
};

extern template class Tensor<float>;
extern template class Tensor<double>;

}  // namespace mygo
