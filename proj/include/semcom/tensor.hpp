#pragma once

// Dense row-major tensor used across the library. Images handed to and from
// the data pipeline are NHWC; the network internals work in NCHW.

#include <algorithm>
#include <cassert>
#include <concepts>
#include <cstddef>
#include <functional>
#include <initializer_list>
#include <numeric>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace semcom {

using Shape = std::vector<std::size_t>;

inline std::size_t shape_numel(const Shape& shape) {
    return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>{});
}

inline std::string shape_str(const Shape& shape) {
    std::ostringstream os;
    os << '[';
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) os << 'x';
        os << shape[i];
    }
    os << ']';
    return os.str();
}

// Raised for shape mismatches and other caller errors.
class ArgumentError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

// Raised when the caller asks for something v1 deliberately does not do.
class UnsupportedConfiguration : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

template <std::floating_point T>
class Tensor {
public:
    using value_type = T;

    Tensor() = default;
    explicit Tensor(Shape shape, T fill = T{0})
        : shape_(std::move(shape)), data_(shape_numel(shape_), fill) {}
    Tensor(Shape shape, std::vector<T> data) : shape_(std::move(shape)), data_(std::move(data)) {
        if (data_.size() != shape_numel(shape_))
            throw ArgumentError("tensor data size " + std::to_string(data_.size()) +
                                " does not match shape " + shape_str(shape_));
    }

    const Shape& shape() const noexcept { return shape_; }
    std::size_t dim(std::size_t i) const { return shape_.at(i); }
    std::size_t rank() const noexcept { return shape_.size(); }
    std::size_t size() const noexcept { return data_.size(); }
    bool empty() const noexcept { return data_.empty(); }

    T* data() noexcept { return data_.data(); }
    const T* data() const noexcept { return data_.data(); }
    std::span<T> span() noexcept { return data_; }
    std::span<const T> span() const noexcept { return data_; }
    std::vector<T>& vec() noexcept { return data_; }
    const std::vector<T>& vec() const noexcept { return data_; }

    T& operator[](std::size_t i) noexcept { return data_[i]; }
    const T& operator[](std::size_t i) const noexcept { return data_[i]; }

    // Size of one leading-dimension slice (one sample of a batch).
    std::size_t stride0() const { return shape_.empty() ? 0 : data_.size() / shape_[0]; }

    std::span<T> sample(std::size_t n) { return span().subspan(n * stride0(), stride0()); }
    std::span<const T> sample(std::size_t n) const { return span().subspan(n * stride0(), stride0()); }

    Tensor reshaped(Shape shape) const& {
        Tensor out = *this;
        out.reshape(std::move(shape));
        return out;
    }
    Tensor reshaped(Shape shape) && {
        reshape(std::move(shape));
        return std::move(*this);
    }
    void reshape(Shape shape) {
        if (shape_numel(shape) != data_.size())
            throw ArgumentError("cannot reshape " + shape_str(shape_) + " to " + shape_str(shape));
        shape_ = std::move(shape);
    }

    void fill(T v) { std::fill(data_.begin(), data_.end(), v); }
    void zero() { fill(T{0}); }

    Tensor& operator+=(const Tensor& o) {
        require_same_shape(o, "+=");
        for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += o.data_[i];
        return *this;
    }
    Tensor& operator*=(T s) {
        for (auto& x : data_) x *= s;
        return *this;
    }

    bool operator==(const Tensor& o) const = default;

    void require_same_shape(const Tensor& o, std::string_view what) const {
        if (shape_ != o.shape_)
            throw ArgumentError(std::string(what) + ": shape mismatch " + shape_str(shape_) +
                                " vs " + shape_str(o.shape_));
    }

    template <std::floating_point U>
    Tensor<U> cast() const {
        Tensor<U> out(shape_);
        std::transform(data_.begin(), data_.end(), out.data(), [](T x) { return static_cast<U>(x); });
        return out;
    }

private:
    Shape shape_;
    std::vector<T> data_;
};

// NHWC <-> NCHW for 4-d image tensors.
template <std::floating_point T>
Tensor<T> nhwc_to_nchw(const Tensor<T>& x) {
    if (x.rank() != 4) throw ArgumentError("nhwc_to_nchw expects rank 4, got " + shape_str(x.shape()));
    const std::size_t n = x.dim(0), h = x.dim(1), w = x.dim(2), c = x.dim(3);
    Tensor<T> out({n, c, h, w});
    for (std::size_t b = 0; b < n; ++b)
        for (std::size_t i = 0; i < h; ++i)
            for (std::size_t j = 0; j < w; ++j)
                for (std::size_t k = 0; k < c; ++k)
                    out[((b * c + k) * h + i) * w + j] = x[((b * h + i) * w + j) * c + k];
    return out;
}

template <std::floating_point T>
Tensor<T> nchw_to_nhwc(const Tensor<T>& x) {
    if (x.rank() != 4) throw ArgumentError("nchw_to_nhwc expects rank 4, got " + shape_str(x.shape()));
    const std::size_t n = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
    Tensor<T> out({n, h, w, c});
    for (std::size_t b = 0; b < n; ++b)
        for (std::size_t k = 0; k < c; ++k)
            for (std::size_t i = 0; i < h; ++i)
                for (std::size_t j = 0; j < w; ++j)
                    out[((b * h + i) * w + j) * c + k] = x[((b * c + k) * h + i) * w + j];
    return out;
}

}  // namespace semcom
