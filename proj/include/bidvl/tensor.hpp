#pragma once

#include <cstddef>
#include <initializer_list>
#include <vector>

#include "bidvl/errors.hpp"

namespace bidvl {

// Dense row-major tensor of doubles. Value type; copies are deep.
class Tensor {
public:
    Tensor() = default;

    explicit Tensor(std::vector<std::size_t> shape);
    Tensor(std::vector<std::size_t> shape, std::vector<double> data);
    Tensor(std::vector<std::size_t> shape, double fill);

    static Tensor scalar(double x) { return Tensor({1}, std::vector<double>{x}); }
    static Tensor zeros_like(const Tensor& t) { return Tensor(t.shape_, 0.0); }

    // 2-D row-major constructor from nested initializer lists, for tests.
    static Tensor matrix(std::initializer_list<std::initializer_list<double>> rows);
    static Tensor vec(std::initializer_list<double> xs);

    const std::vector<std::size_t>& shape() const { return shape_; }
    std::size_t rank() const { return shape_.size(); }
    std::size_t size() const { return data_.size(); }
    std::size_t dim(std::size_t i) const { return shape_.at(i); }

    double* data() { return data_.data(); }
    const double* data() const { return data_.data(); }

    double& operator[](std::size_t i) { return data_[i]; }
    double operator[](std::size_t i) const { return data_[i]; }

    double& at(std::size_t r, std::size_t c);
    double at(std::size_t r, std::size_t c) const;

    bool same_shape(const Tensor& o) const { return shape_ == o.shape_; }
    bool all_finite() const;

    // Throws NumericError naming `what` if any element is NaN/Inf.
    void check_finite(const char* what) const;

private:
    std::vector<std::size_t> shape_;
    std::vector<double> data_;
};

std::size_t shape_product(const std::vector<std::size_t>& shape);
std::string shape_str(const std::vector<std::size_t>& shape);

}  // namespace bidvl
