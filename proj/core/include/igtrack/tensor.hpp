#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <numeric>
#include <span>
#include <vector>

#include "igtrack/errors.hpp"

namespace igtrack {

/// Dense row-major array. Production code runs on float; the gradient checker
/// instantiates the same code on double.
template <class T>
class BasicTensor {
public:
    BasicTensor() = default;
    explicit BasicTensor(std::vector<std::size_t> dims, T fill = T{})
        : dims_(std::move(dims)), data_(element_count(dims_), fill) {}
    BasicTensor(std::vector<std::size_t> dims, std::vector<T> data) : dims_(std::move(dims)), data_(std::move(data)) {
        if (data_.size() != element_count(dims_)) throw ConfigError("tensor data does not match its shape");
    }

    const std::vector<std::size_t>& dims() const { return dims_; }
    std::size_t dim(std::size_t i) const { return dims_.at(i); }
    std::size_t rank() const { return dims_.size(); }
    std::size_t size() const { return data_.size(); }
    bool empty() const { return data_.empty(); }

    T* data() { return data_.data(); }
    const T* data() const { return data_.data(); }
    std::span<T> values() { return data_; }
    std::span<const T> values() const { return data_; }

    T& operator[](std::size_t i) { return data_[i]; }
    const T& operator[](std::size_t i) const { return data_[i]; }

    /// Element (c, y, x) of a rank-3 tensor.
    T& at(std::size_t c, std::size_t y, std::size_t x) { return data_[(c * dims_[1] + y) * dims_[2] + x]; }
    const T& at(std::size_t c, std::size_t y, std::size_t x) const {
        return data_[(c * dims_[1] + y) * dims_[2] + x];
    }

    void fill(T v) { std::fill(data_.begin(), data_.end(), v); }

    bool all_finite() const {
        for (T v : data_) {
            if (!std::isfinite(v)) return false;
        }
        return true;
    }

    template <class U>
    BasicTensor<U> cast() const {
        std::vector<U> out(data_.begin(), data_.end());
        return BasicTensor<U>(dims_, std::move(out));
    }

    friend bool operator==(const BasicTensor&, const BasicTensor&) = default;

    static std::size_t element_count(const std::vector<std::size_t>& dims) {
        return std::accumulate(dims.begin(), dims.end(), std::size_t{1}, std::multiplies<>());
    }

private:
    std::vector<std::size_t> dims_;
    std::vector<T> data_;
};

using Tensor = BasicTensor<float>;

}  // namespace igtrack
