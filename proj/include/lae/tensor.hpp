#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace lae {

/// Element precision selector. Storage is always double; half/single
/// semantics are imposed by explicit rounding in precision.hpp, so the
/// reduced-precision study is reproducible regardless of host hardware.
enum class Precision { f16, f32, f64 };

/// Dimensions in batch/channel/height/width order. Pooling always acts
/// per channel over the full height x width window.
struct Shape {
    std::size_t batch = 1;
    std::size_t channels = 1;
    std::size_t height = 1;
    std::size_t width = 1;

    std::size_t volume() const { return batch * channels * height * width; }
    std::size_t window() const { return height * width; }

    bool operator==(const Shape&) const = default;
};

/// Dense rank-4 array, row-major in batch -> channel -> height -> width
/// order. Immutable after construction; safe to share across threads.
class Tensor {
public:
    Tensor(Shape shape, std::vector<double> values, Precision precision = Precision::f64);

    static Tensor zeros(Shape shape, Precision precision = Precision::f64);

    const Shape& shape() const { return shape_; }
    Precision precision() const { return precision_; }
    std::span<const double> data() const { return data_; }

    std::size_t index(std::size_t b, std::size_t c, std::size_t h, std::size_t w) const {
        return ((b * shape_.channels + c) * shape_.height + h) * shape_.width + w;
    }

    /// Bounds-checked element access.
    double at(std::size_t b, std::size_t c, std::size_t h, std::size_t w) const;

private:
    Shape shape_;
    std::vector<double> data_;
    Precision precision_;
};

/// Builds a tensor from a flat value sequence in canonical order.
/// Throws std::invalid_argument on a length mismatch.
Tensor tensor_from(const Shape& shape, std::span<const double> values,
                   Precision precision = Precision::f64);

/// The H*W values of one channel in row-major order: the per-channel
/// pooling window. Throws std::out_of_range on bad indices.
std::vector<double> spatial_slice(const Tensor& t, std::size_t b, std::size_t c);

} // namespace lae
