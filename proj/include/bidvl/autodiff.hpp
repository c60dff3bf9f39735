#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "bidvl/tensor.hpp"

namespace bidvl {

class Tape;

// Handle to a node recorded on a Tape.
struct Var {
    Tape* tape = nullptr;
    int id = -1;
};

// Trainable parameter: value plus accumulated gradient of identical shape.
struct Param {
    Tensor value;
    Tensor grad;
    std::string name;

    explicit Param(Tensor v, std::string n = "")
        : value(std::move(v)), grad(Tensor::zeros_like(value)), name(std::move(n)) {}

    void zero_grad() { grad = Tensor::zeros_like(value); }
};

// Per-forward-pass tape of primitive operations. Nodes only reference
// earlier nodes; one backward pass visits each node exactly once and is
// then consumed.
class Tape {
public:
    Var constant(Tensor t);
    Var leaf(Param& p, bool track = true);

    const Tensor& value(Var v) const;

    // Reverse accumulation from a scalar root into every tracked Param.
    void backward(Var root);

    std::size_t num_nodes() const { return nodes_.size(); }

    // Primitive-op plumbing; used by the op functions below.
    struct Node {
        Tensor value;
        Tensor grad;
        int p0 = -1;
        int p1 = -1;
        Param* param = nullptr;
        bool track = false;
        std::function<void(Tape&, int)> back;
    };

    Var record(Tensor value, int p0, int p1, std::function<void(Tape&, int)> back);
    Node& node(int id) { return nodes_[static_cast<std::size_t>(id)]; }
    Tensor& grad_of(int id);

private:
    std::vector<Node> nodes_;
    bool consumed_ = false;
};

Var matmul(Var a, Var b);     // [m×k]·[k×n] -> [m×n]
Var matmul_nt(Var a, Var b);  // [m×k]·[n×k]ᵀ -> [m×n]
Var add(Var a, Var b);        // same shape, or one side scalar
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var scale(Var a, double c);
Var add_scalar(Var a, double c);
Var neg(Var a);
Var relu(Var a);
Var tanh_op(Var a);
Var softplus(Var a);
Var sigmoid(Var a);
Var exp_op(Var a);
Var log_op(Var a);
Var square(Var a);
Var clamp(Var a, double lo, double hi);
Var add_rowvec(Var mat, Var v);  // [m×n] + broadcast of [n] over rows
Var sum(Var a);
Var mean(Var a);
Var sum_axis(Var a, std::size_t axis);
Var mean_axis(Var a, std::size_t axis);

// Plain (non-recorded) elementwise helpers shared with the op kernels.
double softplus_stable(double x);
double sigmoid_stable(double x);

// Central-difference gradient of a scalar function, one coordinate at a time.
Tensor finite_diff(const std::function<double(const Tensor&)>& f, const Tensor& x, double h);

}  // namespace bidvl
