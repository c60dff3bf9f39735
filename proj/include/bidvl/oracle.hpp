#pragma once

#include <iosfwd>
#include <vector>

#include "bidvl/rng.hpp"
#include "bidvl/tensor.hpp"

namespace bidvl {
namespace oracle {

// Finite energy table over V×H; everything about it is computed by exact
// enumeration with log-sum-exp, so identities can be checked to 1e-10.
struct DiscreteEBLVM {
    Tensor E;  // [V×H]

    std::size_t V() const { return E.dim(0); }
    std::size_t H() const { return E.dim(1); }
};

// q_post rows are conditionals q(h|v); p_joint is a full joint over V×H.
struct DiscreteVariational {
    Tensor q_post;   // [V×H], each row sums to 1
    Tensor p_joint;  // [V×H], sums to 1
};

struct DataDist {
    std::vector<double> q;  // over V, sums to 1
};

struct ExactMarginals {
    double logZ;
    Tensor p_joint;      // [V×H]
    std::vector<double> p_v;
    Tensor p_h_given_v;  // [V×H], rows sum to 1
};

struct SplitTerms {
    Tensor a, b, c;  // gradient tables, a + b + c == exact_nll_grad
};

struct JObjectives {
    double J;         // KL(q(v) || p(v))
    double J_UL;      // KL(q·q1 || p_joint) - KL(p2 || p_joint)
    double KL_post;   // KL(q·q1 || q·p(h|v))
    double KL_joint;  // KL(p2 || p_joint)
};

ExactMarginals exact_marginals(const DiscreteEBLVM& m);
Tensor exact_nll_grad(const DiscreteEBLVM& m, const DataDist& data);
SplitTerms split_terms(const DiscreteEBLVM& m, const DiscreteVariational& var,
                       const DataDist& data);
DiscreteVariational solve_ll_exact(const DiscreteEBLVM& m, const DataDist& data);
JObjectives j_objectives(const DiscreteEBLVM& m, const DiscreteVariational& var,
                         const DataDist& data);

// Builds the exact LL solution and returns max|term_a - exact_nll_grad|.
double theorem1_grad_check(const DiscreteEBLVM& m, const DataDist& data);

// Generic random instances for property checks.
DiscreteEBLVM random_model(Rng& rng, std::size_t V, std::size_t H, double lo = -2.0,
                           double hi = 2.0);
DiscreteVariational random_variational(Rng& rng, std::size_t V, std::size_t H);
DataDist random_data(Rng& rng, std::size_t V);

// Runs every oracle identity check; writes one CSV row per check
// (check,cases,max_deviation,tolerance,pass) and returns overall pass.
bool run_suite(int n_seeds, std::ostream& csv);

}  // namespace oracle
}  // namespace bidvl
