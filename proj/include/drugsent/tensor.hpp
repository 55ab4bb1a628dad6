#pragma once

#include <cstddef>
#include <string>
#include <vector>

namespace drugsent::nn {

using Shape = std::vector<std::size_t>;

std::size_t shape_numel(const Shape& shape);
std::string shape_str(const Shape& shape);
bool same_shape(const Shape& a, const Shape& b);

// Dense row-major array of doubles. All model math runs in 64-bit so
// analytic gradients can be checked against central finite differences.
class Tensor {
  public:
    Tensor() = default;
    explicit Tensor(Shape shape, double fill = 0.0)
        : shape_(std::move(shape)), data_(shape_numel(shape_), fill) {}
    Tensor(Shape shape, std::vector<double> data);

    static Tensor scalar(double v) { return Tensor({1}, {v}); }

    const Shape& shape() const { return shape_; }
    std::size_t rank() const { return shape_.size(); }
    std::size_t numel() const { return data_.size(); }
    std::size_t dim(std::size_t i) const { return shape_[i]; }

    double* data() { return data_.data(); }
    const double* data() const { return data_.data(); }
    double& operator[](std::size_t i) { return data_[i]; }
    double operator[](std::size_t i) const { return data_[i]; }

    const std::vector<double>& vec() const { return data_; }

    void fill(double v);
    bool all_finite() const;

    // numpy-style broadcast shape; throws std::invalid_argument on mismatch
    static Shape broadcast(const Shape& a, const Shape& b);

  private:
    Shape shape_;
    std::vector<double> data_;
};

// Sums `grad` down to `target` shape, undoing broadcasting.
Tensor reduce_to_shape(const Tensor& grad, const Shape& target);

// Row-major strides, with stride 0 on axes of size 1 when the shape is
// right-aligned against `out_rank` axes (for broadcast iteration).
std::vector<std::size_t> broadcast_strides(const Shape& shape,
                                           std::size_t out_rank,
                                           const Shape& out_shape);

} // namespace drugsent::nn
