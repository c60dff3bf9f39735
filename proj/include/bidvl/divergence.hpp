#pragma once

#include <functional>
#include <string>
#include <vector>

#include "bidvl/autodiff.hpp"
#include "bidvl/tensor.hpp"

namespace bidvl {

enum class RatioVariant { Constant, ExpNormalized, Sigmoid };

RatioVariant parse_ratio_variant(const std::string& name);
std::string ratio_variant_name(RatioVariant v);

// Importance-ratio estimate r(v): a basic scalar term r_basic, optionally
// modulated per sample by the batch energies. Weights are plain constants;
// they never enter the gradient graph.
struct RatioMode {
    RatioVariant variant = RatioVariant::Constant;
    double r_basic = 0.05;
};

struct KernelSpec {
    std::vector<double> bandwidths{0.1, 0.5, 1.0, 2.0, 8.0};
};

// Row-wise KL(N(mu1,exp(lv1)) || N(mu2,exp(lv2))) for diagonal Gaussians.
Tensor kl_diag_gaussians(const Tensor& mu1, const Tensor& lv1, const Tensor& mu2,
                         const Tensor& lv2);

// Specialization against the standard normal prior.
Tensor kl_to_standard_prior(const Tensor& mu, const Tensor& logvar);

// Graph version used inside training losses; returns [batch].
Var kl_to_standard_prior(Var mu, Var logvar);

Tensor importance_ratio(const Tensor& energies, const RatioMode& mode);

// Unbiased U-statistic MMD² with an RBF mixture k(x,y) = exp(-|x-y|²/(2σ²)).
double mmd2_rbf(const Tensor& X, const Tensor& Y, const KernelSpec& kernel);

// Kernelized Stein discrepancy U-statistic with an RBF kernel and its
// analytic derivatives; `score` maps samples [n×d] to ∇_x log q(x) [n×d].
double ksd_rbf(const Tensor& X, const std::function<Tensor(const Tensor&)>& score,
               double bandwidth);

// Stein kernel u_q(x,x') for two single points, exposed for symmetry tests.
double stein_kernel_rbf(const std::vector<double>& x, const std::vector<double>& sx,
                        const std::vector<double>& y, const std::vector<double>& sy,
                        double bandwidth);

double tv_discrete(const std::vector<double>& p, const std::vector<double>& q);
double kl_discrete(const std::vector<double>& p, const std::vector<double>& q);
double symmetric_kl_discrete(const std::vector<double>& p, const std::vector<double>& q);

}  // namespace bidvl
