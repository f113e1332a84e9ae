#pragma once

#include <cmath>
#include <cstddef>
#include <functional>
#include <initializer_list>
#include <numeric>
#include <span>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "neutrosim/error.hpp"

namespace neutrosim {

using Shape = std::vector<std::size_t>;

inline std::size_t numel(const Shape& shape) {
    return std::accumulate(shape.begin(), shape.end(), std::size_t{1},
                           std::multiplies<>{});
}

inline std::string to_string(const Shape& shape) {
    std::ostringstream out;
    out << '[';
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) out << ", ";
        out << shape[i];
    }
    out << ']';
    return out.str();
}

/// Dense row-major array of doubles. A rank-0 shape holds one element.
class Tensor {
public:
    Tensor() : Tensor(Shape{0}) {}

    explicit Tensor(Shape shape, double fill = 0.0)
        : shape_(std::move(shape)), data_(numel(shape_), fill) {}

    Tensor(Shape shape, std::vector<double> data)
        : shape_(std::move(shape)), data_(std::move(data)) {
        if (numel(shape_) != data_.size())
            throw InvalidArgument("tensor", "shape " + to_string(shape_) +
                                                " does not match " +
                                                std::to_string(data_.size()) +
                                                " values");
    }

    static Tensor scalar(double v) { return Tensor(Shape{}, {v}); }

    static Tensor vector(std::initializer_list<double> values) {
        return Tensor(Shape{values.size()}, std::vector<double>(values));
    }

    const Shape& shape() const noexcept { return shape_; }
    std::size_t rank() const noexcept { return shape_.size(); }
    std::size_t size() const noexcept { return data_.size(); }
    std::size_t dim(std::size_t i) const { return shape_.at(i); }

    std::span<double> data() noexcept { return data_; }
    std::span<const double> data() const noexcept { return data_; }
    const std::vector<double>& values() const noexcept { return data_; }

    double& operator[](std::size_t i) { return data_[i]; }
    double operator[](std::size_t i) const { return data_[i]; }

    double item() const {
        if (data_.size() != 1)
            throw InvalidArgument("tensor", "item() on tensor of shape " +
                                                to_string(shape_));
        return data_[0];
    }

    Tensor reshaped(Shape shape) const {
        return Tensor(std::move(shape), data_);
    }

    bool all_finite() const noexcept {
        for (double v : data_)
            if (!std::isfinite(v)) return false;
        return true;
    }

    friend bool operator==(const Tensor& a, const Tensor& b) {
        return a.shape_ == b.shape_ && a.data_ == b.data_;
    }

private:
    Shape shape_;
    std::vector<double> data_;
};

}  // namespace neutrosim
