#pragma once

#include "supool/aligned.hpp"

#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace supool {

class ShapeError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

struct Shape4 {
    std::size_t n = 0, c = 0, h = 0, w = 0;

    std::size_t size() const noexcept { return n * c * h * w; }
    std::size_t per_sample() const noexcept { return c * h * w; }
    friend bool operator==(const Shape4&, const Shape4&) = default;
};

std::string to_string(const Shape4& s);

/// Per-sample shape (channels, height, width).
struct Shape3 {
    std::size_t c = 0, h = 0, w = 0;

    std::size_t size() const noexcept { return c * h * w; }
    friend bool operator==(const Shape3&, const Shape3&) = default;
};

/// Row-major NCHW tensor. Feature vectors are stored as (n, f, 1, 1).
template <typename T>
class BasicTensor4 {
public:
    using value_type = T;

    BasicTensor4() = default;
    explicit BasicTensor4(Shape4 shape, T fill = T{}) : shape_(shape), data_(shape.size(), fill) {}
    BasicTensor4(std::size_t n, std::size_t c, std::size_t h, std::size_t w, T fill = T{})
        : BasicTensor4(Shape4{n, c, h, w}, fill) {}
    BasicTensor4(Shape4 shape, const std::vector<T>& data) : BasicTensor4(shape, AlignedVector<T>(data.begin(), data.end())) {}
    BasicTensor4(Shape4 shape, AlignedVector<T> data) : shape_(shape), data_(std::move(data)) {
        if (data_.size() != shape_.size()) {
            throw ShapeError("tensor data length " + std::to_string(data_.size()) + " does not match shape " +
                             to_string(shape_));
        }
    }

    const Shape4& shape() const noexcept { return shape_; }
    std::size_t size() const noexcept { return data_.size(); }

    T& at(std::size_t n, std::size_t c, std::size_t h, std::size_t w) {
        return data_[((n * shape_.c + c) * shape_.h + h) * shape_.w + w];
    }
    const T& at(std::size_t n, std::size_t c, std::size_t h, std::size_t w) const {
        return data_[((n * shape_.c + c) * shape_.h + h) * shape_.w + w];
    }

    T& operator[](std::size_t i) { return data_[i]; }
    const T& operator[](std::size_t i) const { return data_[i]; }

    std::span<T> data() noexcept { return data_; }
    std::span<const T> data() const noexcept { return data_; }

    std::span<T> sample(std::size_t n) { return std::span<T>(data_).subspan(n * shape_.per_sample(), shape_.per_sample()); }
    std::span<const T> sample(std::size_t n) const {
        return std::span<const T>(data_).subspan(n * shape_.per_sample(), shape_.per_sample());
    }

    /// Same data under a new shape of equal size.
    BasicTensor4 reshaped(Shape4 shape) const& { return BasicTensor4(shape, data_); }
    BasicTensor4 reshaped(Shape4 shape) && { return BasicTensor4(shape, std::move(data_)); }

    friend bool operator==(const BasicTensor4&, const BasicTensor4&) = default;

private:
    Shape4 shape_{};
    AlignedVector<T> data_;
};

using Tensor4 = BasicTensor4<float>;

} // namespace supool
