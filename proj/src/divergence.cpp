#include "bidvl/divergence.hpp"

#include <algorithm>
#include <cmath>

namespace bidvl {

RatioVariant parse_ratio_variant(const std::string& name) {
    if (name == "constant") return RatioVariant::Constant;
    if (name == "exp-normalized") return RatioVariant::ExpNormalized;
    if (name == "sigmoid") return RatioVariant::Sigmoid;
    throw ConfigError("unknown ratio mode '" + name + "'");
}

std::string ratio_variant_name(RatioVariant v) {
    switch (v) {
        case RatioVariant::Constant: return "constant";
        case RatioVariant::ExpNormalized: return "exp-normalized";
        case RatioVariant::Sigmoid: return "sigmoid";
    }
    return "?";
}

namespace {
void require_same(const Tensor& a, const Tensor& b, const char* op) {
    if (!a.same_shape(b)) {
        throw ShapeError(std::string(op) + ": " + shape_str(a.shape()) + " vs " +
                         shape_str(b.shape()));
    }
}

void require_distribution(const std::vector<double>& p, const char* name) {
    double s = 0.0;
    for (double x : p) {
        if (x < 0.0) throw ContractError(std::string(name) + " has a negative entry");
        s += x;
    }
    if (std::fabs(s - 1.0) > 1e-12) {
        throw ContractError(std::string(name) + " sums to " + std::to_string(s));
    }
}
}  // namespace

Tensor kl_diag_gaussians(const Tensor& mu1, const Tensor& lv1, const Tensor& mu2,
                         const Tensor& lv2) {
    require_same(mu1, lv1, "kl_diag_gaussians");
    require_same(mu1, mu2, "kl_diag_gaussians");
    require_same(mu1, lv2, "kl_diag_gaussians");
    const std::size_t n = mu1.dim(0), d = mu1.dim(1);
    Tensor out({n}, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        double acc = 0.0;
        for (std::size_t j = 0; j < d; ++j) {
            const std::size_t k = i * d + j;
            const double dm = mu1[k] - mu2[k];
            acc += 0.5 * (lv2[k] - lv1[k] + (std::exp(lv1[k]) + dm * dm) / std::exp(lv2[k]) - 1.0);
        }
        out[i] = acc;
    }
    return out;
}

Tensor kl_to_standard_prior(const Tensor& mu, const Tensor& logvar) {
    return kl_diag_gaussians(mu, logvar, Tensor::zeros_like(mu), Tensor::zeros_like(logvar));
}

Var kl_to_standard_prior(Var mu, Var logvar) {
    // 0.5 * rowsum(exp(lv) + mu² - 1 - lv)
    Var per_elem = sub(add(exp_op(logvar), square(mu)), add_scalar(logvar, 1.0));
    return scale(sum_axis(per_elem, 1), 0.5);
}

Tensor importance_ratio(const Tensor& energies, const RatioMode& mode) {
    if (energies.size() < 1) throw ContractError("importance_ratio needs a nonempty batch");
    if (!(mode.r_basic > 0.0)) throw ContractError("r_basic must be positive");
    energies.check_finite("importance_ratio energies");
    const std::size_t n = energies.size();
    Tensor w({n}, mode.r_basic);
    switch (mode.variant) {
        case RatioVariant::Constant:
            break;
        case RatioVariant::ExpNormalized: {
            // shift by max(-E) so the exponentials stay bounded
            double m = -energies[0];
            for (std::size_t i = 1; i < n; ++i) m = std::max(m, -energies[i]);
            double denom = 0.0;
            for (std::size_t i = 0; i < n; ++i) denom += std::exp(-energies[i] - m);
            denom /= static_cast<double>(n);
            for (std::size_t i = 0; i < n; ++i) {
                w[i] = mode.r_basic * std::exp(-energies[i] - m) / denom;
            }
            break;
        }
        case RatioVariant::Sigmoid: {
            double mean_e = 0.0;
            for (std::size_t i = 0; i < n; ++i) mean_e += energies[i];
            mean_e /= static_cast<double>(n);
            for (std::size_t i = 0; i < n; ++i) {
                w[i] = mode.r_basic * sigmoid_stable(mean_e - energies[i]);
            }
            break;
        }
    }
    return w;
}

namespace {
double sqdist_rows(const Tensor& A, std::size_t i, const Tensor& B, std::size_t j) {
    const std::size_t d = A.dim(1);
    double s = 0.0;
    for (std::size_t k = 0; k < d; ++k) {
        const double dx = A[i * d + k] - B[j * d + k];
        s += dx * dx;
    }
    return s;
}
}  // namespace

double mmd2_rbf(const Tensor& X, const Tensor& Y, const KernelSpec& kernel) {
    if (X.rank() != 2 || Y.rank() != 2 || X.dim(1) != Y.dim(1)) {
        throw ShapeError("mmd2_rbf: " + shape_str(X.shape()) + " vs " + shape_str(Y.shape()));
    }
    const std::size_t n = X.dim(0), m = Y.dim(0);
    if (n < 2 || m < 2) throw ContractError("mmd2_rbf needs at least 2 samples per side");
    if (kernel.bandwidths.empty()) throw ContractError("mmd2_rbf: empty bandwidth list");
    for (double s : kernel.bandwidths) {
        if (!(s > 0.0)) throw ContractError("mmd2_rbf: non-positive bandwidth");
    }

    double total = 0.0;
    for (double sigma : kernel.bandwidths) {
        const double inv = 1.0 / (2.0 * sigma * sigma);
        double kxx = 0.0, kyy = 0.0, kxy = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t j = i + 1; j < n; ++j) kxx += std::exp(-sqdist_rows(X, i, X, j) * inv);
        }
        for (std::size_t i = 0; i < m; ++i) {
            for (std::size_t j = i + 1; j < m; ++j) kyy += std::exp(-sqdist_rows(Y, i, Y, j) * inv);
        }
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t j = 0; j < m; ++j) kxy += std::exp(-sqdist_rows(X, i, Y, j) * inv);
        }
        const double nn = static_cast<double>(n), mm = static_cast<double>(m);
        total += 2.0 * kxx / (nn * (nn - 1.0)) + 2.0 * kyy / (mm * (mm - 1.0)) -
                 2.0 * kxy / (nn * mm);
    }
    return total;
}

double stein_kernel_rbf(const std::vector<double>& x, const std::vector<double>& sx,
                        const std::vector<double>& y, const std::vector<double>& sy,
                        double bandwidth) {
    const std::size_t d = x.size();
    const double inv2 = 1.0 / (bandwidth * bandwidth);
    double sq = 0.0, ss = 0.0, sx_dy = 0.0, sy_dx = 0.0;
    for (std::size_t k = 0; k < d; ++k) {
        const double diff = x[k] - y[k];
        sq += diff * diff;
        ss += sx[k] * sy[k];
        sx_dy += sx[k] * diff;   // paired with ∇_y k = k·(x-y)/σ²
        sy_dx += sy[k] * (-diff);  // ∇_x k = -k·(x-y)/σ²
    }
    const double k = std::exp(-sq / (2.0 * bandwidth * bandwidth));
    const double trace = k * (static_cast<double>(d) * inv2 - sq * inv2 * inv2);
    return ss * k + sx_dy * k * inv2 + sy_dx * k * inv2 + trace;
}

double ksd_rbf(const Tensor& X, const std::function<Tensor(const Tensor&)>& score,
               double bandwidth) {
    if (X.rank() != 2) throw ShapeError("ksd_rbf expects [n×d] samples");
    const std::size_t n = X.dim(0), d = X.dim(1);
    if (n < 2) throw ContractError("ksd_rbf needs at least 2 samples");
    if (!(bandwidth > 0.0)) throw ContractError("ksd_rbf: non-positive bandwidth");

    const Tensor S = score(X);
    if (!S.same_shape(X)) throw ShapeError("score output shape mismatch");
    S.check_finite("ksd_rbf score");

    auto row = [d](const Tensor& t, std::size_t i) {
        return std::vector<double>(t.data() + i * d, t.data() + (i + 1) * d);
    };

    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const auto xi = row(X, i);
        const auto si = row(S, i);
        for (std::size_t j = i + 1; j < n; ++j) {
            acc += stein_kernel_rbf(xi, si, row(X, j), row(S, j), bandwidth);
        }
    }
    return 2.0 * acc / (static_cast<double>(n) * static_cast<double>(n - 1));
}

double tv_discrete(const std::vector<double>& p, const std::vector<double>& q) {
    if (p.size() != q.size()) throw ContractError("tv_discrete: size mismatch");
    require_distribution(p, "p");
    require_distribution(q, "q");
    double s = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) s += std::fabs(p[i] - q[i]);
    return 0.5 * s;
}

double kl_discrete(const std::vector<double>& p, const std::vector<double>& q) {
    if (p.size() != q.size()) throw ContractError("kl_discrete: size mismatch");
    require_distribution(p, "p");
    require_distribution(q, "q");
    double s = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
        if (p[i] == 0.0) continue;  // 0·log 0 = 0
        if (q[i] <= 0.0) throw DomainError("kl_discrete: support violation");
        s += p[i] * std::log(p[i] / q[i]);
    }
    return s;
}

double symmetric_kl_discrete(const std::vector<double>& p, const std::vector<double>& q) {
    return kl_discrete(p, q) + kl_discrete(q, p);
}

}  // namespace bidvl
