#include "lae/tensor.hpp"

#include <stdexcept>
#include <string>
#include <utility>

namespace lae {

Tensor::Tensor(Shape shape, std::vector<double> values, Precision precision)
    : shape_(shape), data_(std::move(values)), precision_(precision) {
    if (shape_.batch == 0 || shape_.channels == 0 || shape_.height == 0 || shape_.width == 0) {
        throw std::invalid_argument("Tensor: all dimensions must be >= 1");
    }
    if (data_.size() != shape_.volume()) {
        throw std::invalid_argument(
            "Tensor: value count " + std::to_string(data_.size()) +
            " does not match shape volume " + std::to_string(shape_.volume()));
    }
}

Tensor Tensor::zeros(Shape shape, Precision precision) {
    return Tensor(shape, std::vector<double>(shape.volume(), 0.0), precision);
}

double Tensor::at(std::size_t b, std::size_t c, std::size_t h, std::size_t w) const {
    if (b >= shape_.batch || c >= shape_.channels || h >= shape_.height || w >= shape_.width) {
        throw std::out_of_range("Tensor::at: index out of range");
    }
    return data_[index(b, c, h, w)];
}

Tensor tensor_from(const Shape& shape, std::span<const double> values, Precision precision) {
    return Tensor(shape, std::vector<double>(values.begin(), values.end()), precision);
}

std::vector<double> spatial_slice(const Tensor& t, std::size_t b, std::size_t c) {
    const Shape& s = t.shape();
    if (b >= s.batch || c >= s.channels) {
        throw std::out_of_range("spatial_slice: batch/channel index out of range");
    }
    const std::size_t start = t.index(b, c, 0, 0);
    std::span<const double> data = t.data();
    return std::vector<double>(data.begin() + static_cast<std::ptrdiff_t>(start),
                               data.begin() + static_cast<std::ptrdiff_t>(start + s.window()));
}

} // namespace lae
