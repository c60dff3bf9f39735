#include "bidvl/tensor.hpp"

#include <cmath>
#include <sstream>

namespace bidvl {

std::size_t shape_product(const std::vector<std::size_t>& shape) {
    std::size_t n = 1;
    for (std::size_t d : shape) n *= d;
    return n;
}

std::string shape_str(const std::vector<std::size_t>& shape) {
    std::ostringstream os;
    os << "[";
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) os << "x";
        os << shape[i];
    }
    os << "]";
    return os.str();
}

Tensor::Tensor(std::vector<std::size_t> shape)
    : shape_(std::move(shape)), data_(shape_product(shape_), 0.0) {
    for (std::size_t d : shape_) {
        if (d == 0) throw ShapeError("zero dimension in " + shape_str(shape_));
    }
}

Tensor::Tensor(std::vector<std::size_t> shape, std::vector<double> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
    if (shape_product(shape_) != data_.size()) {
        throw ShapeError("data length " + std::to_string(data_.size()) +
                         " does not match shape " + shape_str(shape_));
    }
}

Tensor::Tensor(std::vector<std::size_t> shape, double fill)
    : shape_(std::move(shape)), data_(shape_product(shape_), fill) {}

Tensor Tensor::matrix(std::initializer_list<std::initializer_list<double>> rows) {
    std::size_t r = rows.size();
    std::size_t c = rows.begin()->size();
    std::vector<double> data;
    data.reserve(r * c);
    for (const auto& row : rows) {
        if (row.size() != c) throw ShapeError("ragged initializer matrix");
        for (double x : row) data.push_back(x);
    }
    return Tensor({r, c}, std::move(data));
}

Tensor Tensor::vec(std::initializer_list<double> xs) {
    return Tensor({xs.size()}, std::vector<double>(xs));
}

double& Tensor::at(std::size_t r, std::size_t c) {
    if (rank() != 2 || r >= shape_[0] || c >= shape_[1]) {
        throw ShapeError("at(" + std::to_string(r) + "," + std::to_string(c) +
                         ") on tensor " + shape_str(shape_));
    }
    return data_[r * shape_[1] + c];
}

double Tensor::at(std::size_t r, std::size_t c) const {
    return const_cast<Tensor*>(this)->at(r, c);
}

bool Tensor::all_finite() const {
    for (double x : data_) {
        if (!std::isfinite(x)) return false;
    }
    return true;
}

void Tensor::check_finite(const char* what) const {
    if (!all_finite()) throw NumericError(std::string("non-finite value in ") + what);
}

}  // namespace bidvl
