#include "bidvl/autodiff.hpp"

#include <cmath>

namespace bidvl {

namespace {

// C[m×n] += A[m×k] · B[k×n]
void mm_nn(double* C, const double* A, const double* B, std::size_t m, std::size_t k, std::size_t n) {
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t p = 0; p < k; ++p) {
            const double a = A[i * k + p];
            const double* brow = B + p * n;
            double* crow = C + i * n;
            for (std::size_t j = 0; j < n; ++j) crow[j] += a * brow[j];
        }
    }
}

// C[m×n] += A[m×k] · B[n×k]ᵀ
void mm_nt(double* C, const double* A, const double* B, std::size_t m, std::size_t k, std::size_t n) {
    for (std::size_t i = 0; i < m; ++i) {
        const double* arow = A + i * k;
        for (std::size_t j = 0; j < n; ++j) {
            const double* brow = B + j * k;
            double acc = 0.0;
            for (std::size_t p = 0; p < k; ++p) acc += arow[p] * brow[p];
            C[i * n + j] += acc;
        }
    }
}

// C[p×n] += A[m×p]ᵀ · B[m×n]
void mm_tn(double* C, const double* A, const double* B, std::size_t m, std::size_t p, std::size_t n) {
    for (std::size_t r = 0; r < m; ++r) {
        const double* brow = B + r * n;
        for (std::size_t i = 0; i < p; ++i) {
            const double a = A[r * p + i];
            double* crow = C + i * n;
            for (std::size_t j = 0; j < n; ++j) crow[j] += a * brow[j];
        }
    }
}

void require_same_tape(Var a, Var b) {
    if (a.tape != b.tape) throw ContractError("operands recorded on different tapes");
}

}  // namespace

double softplus_stable(double x) {
    // max(x,0) + log1p(exp(-|x|)) avoids overflow for large |x|
    return std::max(x, 0.0) + std::log1p(std::exp(-std::fabs(x)));
}

double sigmoid_stable(double x) {
    if (x >= 0.0) {
        const double z = std::exp(-x);
        return 1.0 / (1.0 + z);
    }
    const double z = std::exp(x);
    return z / (1.0 + z);
}

Var Tape::record(Tensor value, int p0, int p1, std::function<void(Tape&, int)> back) {
    if (consumed_) throw ContractError("tape already consumed by backward");
    Node n;
    n.value = std::move(value);
    n.p0 = p0;
    n.p1 = p1;
    n.back = std::move(back);
    nodes_.push_back(std::move(n));
    return Var{this, static_cast<int>(nodes_.size()) - 1};
}

Var Tape::constant(Tensor t) { return record(std::move(t), -1, -1, nullptr); }

Var Tape::leaf(Param& p, bool track) {
    Var v = record(p.value, -1, -1, nullptr);
    node(v.id).param = &p;
    node(v.id).track = track;
    return v;
}

const Tensor& Tape::value(Var v) const {
    if (v.tape != this || v.id < 0 || v.id >= static_cast<int>(nodes_.size())) {
        throw ContractError("invalid Var handle");
    }
    return nodes_[static_cast<std::size_t>(v.id)].value;
}

Tensor& Tape::grad_of(int id) {
    Node& n = node(id);
    if (n.grad.size() == 0) n.grad = Tensor::zeros_like(n.value);
    return n.grad;
}

void Tape::backward(Var root) {
    if (root.tape != this) throw ContractError("root belongs to another tape");
    if (consumed_) throw ContractError("tape already consumed by backward");
    if (value(root).size() != 1) throw ContractError("backward root must be a scalar");

    grad_of(root.id)[0] = 1.0;
    for (int i = root.id; i >= 0; --i) {
        Node& n = node(i);
        if (n.grad.size() == 0) continue;  // not reached from root
        if (n.param != nullptr && n.track) {
            for (std::size_t j = 0; j < n.grad.size(); ++j) n.param->grad[j] += n.grad[j];
        }
        if (n.back) n.back(*this, i);
    }
    consumed_ = true;
}

Var matmul(Var a, Var b) {
    require_same_tape(a, b);
    Tape& t = *a.tape;
    const Tensor& A = t.value(a);
    const Tensor& B = t.value(b);
    if (A.rank() != 2 || B.rank() != 2 || A.dim(1) != B.dim(0)) {
        throw ShapeError("matmul " + shape_str(A.shape()) + " x " + shape_str(B.shape()));
    }
    const std::size_t m = A.dim(0), k = A.dim(1), n = B.dim(1);
    Tensor C({m, n}, 0.0);
    mm_nn(C.data(), A.data(), B.data(), m, k, n);
    return t.record(std::move(C), a.id, b.id, [a, b, m, k, n](Tape& tp, int self) {
        const Tensor& dC = tp.grad_of(self);
        const Tensor& A_ = tp.node(a.id).value;
        const Tensor& B_ = tp.node(b.id).value;
        mm_nt(tp.grad_of(a.id).data(), dC.data(), B_.data(), m, n, k);
        mm_tn(tp.grad_of(b.id).data(), A_.data(), dC.data(), m, k, n);
    });
}

Var matmul_nt(Var a, Var b) {
    require_same_tape(a, b);
    Tape& t = *a.tape;
    const Tensor& A = t.value(a);
    const Tensor& B = t.value(b);
    if (A.rank() != 2 || B.rank() != 2 || A.dim(1) != B.dim(1)) {
        throw ShapeError("matmul_nt " + shape_str(A.shape()) + " x " + shape_str(B.shape()) + "ᵀ");
    }
    const std::size_t m = A.dim(0), k = A.dim(1), n = B.dim(0);
    Tensor C({m, n}, 0.0);
    mm_nt(C.data(), A.data(), B.data(), m, k, n);
    return t.record(std::move(C), a.id, b.id, [a, b, m, k, n](Tape& tp, int self) {
        const Tensor& dC = tp.grad_of(self);
        const Tensor& A_ = tp.node(a.id).value;
        const Tensor& B_ = tp.node(b.id).value;
        mm_nn(tp.grad_of(a.id).data(), dC.data(), B_.data(), m, n, k);
        mm_tn(tp.grad_of(b.id).data(), dC.data(), A_.data(), m, n, k);
    });
}

namespace {

enum class BinOp { Add, Sub, Mul };

// Same-shape elementwise op, or scalar-with-tensor broadcast on either side.
Var binary(Var a, Var b, BinOp op) {
    require_same_tape(a, b);
    Tape& t = *a.tape;
    const Tensor& A = t.value(a);
    const Tensor& B = t.value(b);
    const bool a_scalar = A.size() == 1;
    const bool b_scalar = B.size() == 1;
    if (!A.same_shape(B) && !a_scalar && !b_scalar) {
        throw ShapeError("elementwise " + shape_str(A.shape()) + " vs " + shape_str(B.shape()));
    }
    const Tensor& big = a_scalar && !b_scalar ? B : A;
    Tensor C = Tensor::zeros_like(big);
    for (std::size_t i = 0; i < C.size(); ++i) {
        const double x = a_scalar ? A[0] : A[i];
        const double y = b_scalar ? B[0] : B[i];
        switch (op) {
            case BinOp::Add: C[i] = x + y; break;
            case BinOp::Sub: C[i] = x - y; break;
            case BinOp::Mul: C[i] = x * y; break;
        }
    }
    return t.record(std::move(C), a.id, b.id,
                    [a, b, op, a_scalar, b_scalar](Tape& tp, int self) {
        const Tensor& dC = tp.grad_of(self);
        const Tensor& A_ = tp.node(a.id).value;
        const Tensor& B_ = tp.node(b.id).value;
        Tensor& da = tp.grad_of(a.id);
        Tensor& db = tp.grad_of(b.id);
        for (std::size_t i = 0; i < dC.size(); ++i) {
            const double g = dC[i];
            double ga = 0.0, gb = 0.0;
            switch (op) {
                case BinOp::Add: ga = g; gb = g; break;
                case BinOp::Sub: ga = g; gb = -g; break;
                case BinOp::Mul:
                    ga = g * (b_scalar ? B_[0] : B_[i]);
                    gb = g * (a_scalar ? A_[0] : A_[i]);
                    break;
            }
            da[a_scalar ? 0 : i] += ga;
            db[b_scalar ? 0 : i] += gb;
        }
    });
}

// Unary elementwise op with local derivative expressed from (x, y).
Var unary(Var a, double (*fwd)(double), double (*dydx)(double x, double y)) {
    Tape& t = *a.tape;
    const Tensor& A = t.value(a);
    Tensor C = Tensor::zeros_like(A);
    for (std::size_t i = 0; i < C.size(); ++i) C[i] = fwd(A[i]);
    return t.record(std::move(C), a.id, -1, [a, dydx](Tape& tp, int self) {
        const Tensor& dC = tp.grad_of(self);
        const Tensor& x = tp.node(a.id).value;
        const Tensor& y = tp.node(self).value;
        Tensor& da = tp.grad_of(a.id);
        for (std::size_t i = 0; i < dC.size(); ++i) da[i] += dC[i] * dydx(x[i], y[i]);
    });
}

}  // namespace

Var add(Var a, Var b) { return binary(a, b, BinOp::Add); }
Var sub(Var a, Var b) { return binary(a, b, BinOp::Sub); }
Var mul(Var a, Var b) { return binary(a, b, BinOp::Mul); }

Var scale(Var a, double c) {
    Tape& t = *a.tape;
    Tensor C = t.value(a);
    for (std::size_t i = 0; i < C.size(); ++i) C[i] *= c;
    return t.record(std::move(C), a.id, -1, [a, c](Tape& tp, int self) {
        const Tensor& dC = tp.grad_of(self);
        Tensor& da = tp.grad_of(a.id);
        for (std::size_t i = 0; i < dC.size(); ++i) da[i] += c * dC[i];
    });
}

Var add_scalar(Var a, double c) {
    Tape& t = *a.tape;
    Tensor C = t.value(a);
    for (std::size_t i = 0; i < C.size(); ++i) C[i] += c;
    return t.record(std::move(C), a.id, -1, [a](Tape& tp, int self) {
        const Tensor& dC = tp.grad_of(self);
        Tensor& da = tp.grad_of(a.id);
        for (std::size_t i = 0; i < dC.size(); ++i) da[i] += dC[i];
    });
}

Var neg(Var a) { return scale(a, -1.0); }

Var relu(Var a) {
    return unary(a, [](double x) { return x > 0.0 ? x : 0.0; },
                 [](double x, double) { return x > 0.0 ? 1.0 : 0.0; });
}

Var tanh_op(Var a) {
    return unary(a, [](double x) { return std::tanh(x); },
                 [](double, double y) { return 1.0 - y * y; });
}

Var softplus(Var a) {
    return unary(a, [](double x) { return softplus_stable(x); },
                 [](double x, double) { return sigmoid_stable(x); });
}

Var sigmoid(Var a) {
    return unary(a, [](double x) { return sigmoid_stable(x); },
                 [](double, double y) { return y * (1.0 - y); });
}

Var exp_op(Var a) {
    Var r = unary(a, [](double x) { return std::exp(x); },
                  [](double, double y) { return y; });
    a.tape->value(r).check_finite("exp");
    return r;
}

Var log_op(Var a) {
    const Tensor& A = a.tape->value(a);
    for (std::size_t i = 0; i < A.size(); ++i) {
        if (!(A[i] > 0.0)) throw DomainError("log of non-positive value");
    }
    return unary(a, [](double x) { return std::log(x); },
                 [](double x, double) { return 1.0 / x; });
}

Var square(Var a) {
    return unary(a, [](double x) { return x * x; },
                 [](double x, double) { return 2.0 * x; });
}

Var clamp(Var a, double lo, double hi) {
    Tape& t = *a.tape;
    Tensor C = t.value(a);
    for (std::size_t i = 0; i < C.size(); ++i) C[i] = std::min(std::max(C[i], lo), hi);
    return t.record(std::move(C), a.id, -1, [a, lo, hi](Tape& tp, int self) {
        const Tensor& dC = tp.grad_of(self);
        const Tensor& x = tp.node(a.id).value;
        Tensor& da = tp.grad_of(a.id);
        for (std::size_t i = 0; i < dC.size(); ++i) {
            if (x[i] >= lo && x[i] <= hi) da[i] += dC[i];
        }
    });
}

Var add_rowvec(Var mat, Var v) {
    require_same_tape(mat, v);
    Tape& t = *mat.tape;
    const Tensor& M = t.value(mat);
    const Tensor& V = t.value(v);
    if (M.rank() != 2 || V.rank() != 1 || M.dim(1) != V.dim(0)) {
        throw ShapeError("add_rowvec " + shape_str(M.shape()) + " + " + shape_str(V.shape()));
    }
    const std::size_t m = M.dim(0), n = M.dim(1);
    Tensor C = M;
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = 0; j < n; ++j) C[i * n + j] += V[j];
    }
    return t.record(std::move(C), mat.id, v.id, [mat, v, m, n](Tape& tp, int self) {
        const Tensor& dC = tp.grad_of(self);
        Tensor& dm = tp.grad_of(mat.id);
        Tensor& dv = tp.grad_of(v.id);
        for (std::size_t i = 0; i < m; ++i) {
            for (std::size_t j = 0; j < n; ++j) {
                dm[i * n + j] += dC[i * n + j];
                dv[j] += dC[i * n + j];
            }
        }
    });
}

Var sum(Var a) {
    Tape& t = *a.tape;
    const Tensor& A = t.value(a);
    if (A.size() == 0) throw DomainError("reduce over empty tensor");
    double s = 0.0;
    for (std::size_t i = 0; i < A.size(); ++i) s += A[i];
    return t.record(Tensor::scalar(s), a.id, -1, [a](Tape& tp, int self) {
        const double g = tp.grad_of(self)[0];
        Tensor& da = tp.grad_of(a.id);
        for (std::size_t i = 0; i < da.size(); ++i) da[i] += g;
    });
}

Var mean(Var a) {
    const Tensor& A = a.tape->value(a);
    if (A.size() == 0) throw DomainError("reduce over empty tensor");
    return scale(sum(a), 1.0 / static_cast<double>(A.size()));
}

Var sum_axis(Var a, std::size_t axis) {
    Tape& t = *a.tape;
    const Tensor& A = t.value(a);
    if (axis >= A.rank()) {
        throw ShapeError("axis " + std::to_string(axis) + " out of range for rank " +
                         std::to_string(A.rank()));
    }
    std::size_t outer = 1, inner = 1;
    for (std::size_t i = 0; i < axis; ++i) outer *= A.dim(i);
    for (std::size_t i = axis + 1; i < A.rank(); ++i) inner *= A.dim(i);
    const std::size_t mid = A.dim(axis);

    std::vector<std::size_t> rshape;
    for (std::size_t i = 0; i < A.rank(); ++i) {
        if (i != axis) rshape.push_back(A.dim(i));
    }
    if (rshape.empty()) rshape = {1};

    Tensor C(rshape, 0.0);
    for (std::size_t o = 0; o < outer; ++o) {
        for (std::size_t m = 0; m < mid; ++m) {
            const double* src = A.data() + (o * mid + m) * inner;
            double* dst = C.data() + o * inner;
            for (std::size_t i = 0; i < inner; ++i) dst[i] += src[i];
        }
    }
    return t.record(std::move(C), a.id, -1, [a, outer, mid, inner](Tape& tp, int self) {
        const Tensor& dC = tp.grad_of(self);
        Tensor& da = tp.grad_of(a.id);
        for (std::size_t o = 0; o < outer; ++o) {
            for (std::size_t m = 0; m < mid; ++m) {
                double* dst = da.data() + (o * mid + m) * inner;
                const double* src = dC.data() + o * inner;
                for (std::size_t i = 0; i < inner; ++i) dst[i] += src[i];
            }
        }
    });
}

Var mean_axis(Var a, std::size_t axis) {
    const Tensor& A = a.tape->value(a);
    if (axis >= A.rank()) {
        throw ShapeError("axis " + std::to_string(axis) + " out of range for rank " +
                         std::to_string(A.rank()));
    }
    return scale(sum_axis(a, axis), 1.0 / static_cast<double>(A.dim(axis)));
}

Tensor finite_diff(const std::function<double(const Tensor&)>& f, const Tensor& x, double h) {
    if (!(h > 0.0)) throw ContractError("finite_diff step must be positive");
    Tensor g = Tensor::zeros_like(x);
    Tensor xp = x;
    for (std::size_t i = 0; i < x.size(); ++i) {
        xp[i] = x[i] + h;
        const double fp = f(xp);
        xp[i] = x[i] - h;
        const double fm = f(xp);
        xp[i] = x[i];
        if (!std::isfinite(fp) || !std::isfinite(fm)) {
            throw NumericError("finite_diff: non-finite function value");
        }
        g[i] = (fp - fm) / (2.0 * h);
    }
    return g;
}

}  // namespace bidvl
