#include "drugsent/tensor.hpp"

#include <cmath>
#include <stdexcept>

namespace drugsent::nn {

std::size_t shape_numel(const Shape& shape) {
    std::size_t n = 1;
    for (std::size_t d : shape) n *= d;
    return n;
}

std::string shape_str(const Shape& shape) {
    std::string s = "(";
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) s += ",";
        s += std::to_string(shape[i]);
    }
    return s + ")";
}

bool same_shape(const Shape& a, const Shape& b) { return a == b; }

Tensor::Tensor(Shape shape, std::vector<double> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
    if (data_.size() != shape_numel(shape_)) {
        throw std::invalid_argument("tensor data size does not match shape " +
                                    shape_str(shape_));
    }
}

void Tensor::fill(double v) {
    for (double& x : data_) x = v;
}

bool Tensor::all_finite() const {
    for (double x : data_) {
        if (!std::isfinite(x)) return false;
    }
    return true;
}

Shape Tensor::broadcast(const Shape& a, const Shape& b) {
    std::size_t rank = std::max(a.size(), b.size());
    Shape out(rank);
    for (std::size_t i = 0; i < rank; ++i) {
        std::size_t da = i < rank - a.size() ? 1 : a[i - (rank - a.size())];
        std::size_t db = i < rank - b.size() ? 1 : b[i - (rank - b.size())];
        if (da != db && da != 1 && db != 1) {
            throw std::invalid_argument("cannot broadcast " + shape_str(a) +
                                        " with " + shape_str(b));
        }
        out[i] = std::max(da, db);
    }
    return out;
}

std::vector<std::size_t> broadcast_strides(const Shape& shape,
                                           std::size_t out_rank,
                                           const Shape& out_shape) {
    std::vector<std::size_t> strides(out_rank, 0);
    std::size_t stride = 1;
    for (std::size_t i = 0; i < shape.size(); ++i) {
        std::size_t axis = shape.size() - 1 - i;     // axis within `shape`
        std::size_t out_axis = out_rank - 1 - i;     // right-aligned
        if (shape[axis] != 1) {
            if (shape[axis] != out_shape[out_axis]) {
                throw std::invalid_argument("broadcast stride mismatch");
            }
            strides[out_axis] = stride;
        }
        stride *= shape[axis];
    }
    return strides;
}

Tensor reduce_to_shape(const Tensor& grad, const Shape& target) {
    if (grad.shape() == target) return grad;
    Tensor out(target, 0.0);
    const std::size_t out_rank = grad.rank();
    const auto t_strides = broadcast_strides(target, out_rank, grad.shape());
    const Shape& gshape = grad.shape();

    std::vector<std::size_t> idx(out_rank, 0);
    for (std::size_t flat = 0; flat < grad.numel(); ++flat) {
        std::size_t t_off = 0;
        for (std::size_t a = 0; a < out_rank; ++a) t_off += idx[a] * t_strides[a];
        out[t_off] += grad[flat];
        for (std::size_t a = out_rank; a-- > 0;) {
            if (++idx[a] < gshape[a]) break;
            idx[a] = 0;
        }
    }
    return out;
}

} // namespace drugsent::nn
