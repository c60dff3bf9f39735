#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "bidvl/autodiff.hpp"
#include "bidvl/rng.hpp"

namespace bidvl {

enum class InitScheme { KaimingUniform, XavierUniform };

InitScheme parse_init_scheme(const std::string& name);

// Affine layer with optional spectral normalization. When SN is active the
// forward pass uses W / sigma_hat with the sigma estimate from the most
// recent spectral_normalize call; sigma_hat is held constant through
// backward so gradients stay consistent with the recorded forward.
struct LinearLayer {
    Param W;  // [out×in]
    Param b;  // [out]
    bool use_sn = false;
    Tensor u;      // [out] power-iteration state
    Tensor v_vec;  // [in]
    double sigma_hat = 1.0;
    bool sn_degenerate = false;

    LinearLayer(std::size_t out, std::size_t in, const std::string& name, bool sn = false);

    std::size_t fan_in() const { return W.value.dim(1); }
    std::size_t fan_out() const { return W.value.dim(0); }

    // x: [batch×in] -> [batch×out]; leaves tracked iff `track`.
    Var forward(Tape& tape, Var x, bool track = true);

    void init(Rng& rng, InitScheme scheme);
};

// Power iteration estimate of the top singular value; updates sigma_hat.
// A zero matrix is flagged degenerate and forward falls back to W unscaled.
double spectral_normalize(LinearLayer& layer, int n_iters);

// Marginal energy network: MLP with ReLU hidden activations, scalar output,
// no output nonlinearity, spectral-normalized layers.
struct EnergyNet {
    std::vector<LinearLayer> layers;

    EnergyNet(const std::vector<std::size_t>& widths, const std::string& name, bool sn = true);

    // v: [batch×d_v] -> per-sample energy [batch]
    Var energy(Tape& tape, Var v, bool track = true);

    std::vector<Param*> params();
    void power_iterate(int n_iters);
};

// Gaussian posterior q(h|v) = N(mu(v), diag(exp(logvar(v)))) with
// logvar = -softplus(rawlv) so the variance stays in (0,1).
struct GaussianEncoder {
    std::vector<LinearLayer> trunk;
    LinearLayer head_mu;
    LinearLayer head_rawlv;

    GaussianEncoder(std::size_t d_v, const std::vector<std::size_t>& hidden, std::size_t d_h,
                    const std::string& name);

    // v: [batch×d_v] -> (mu [batch×d_h], logvar [batch×d_h]), logvar <= 0
    std::pair<Var, Var> encode(Tape& tape, Var v, bool track = true);

    std::vector<Param*> params();
};

// Deterministic generator with tanh output; every coordinate lands in (-1,1).
struct Generator {
    std::vector<LinearLayer> layers;

    Generator(const std::vector<std::size_t>& widths, const std::string& name);

    // h: [batch×d_h] -> v [batch×d_v]
    Var generate(Tape& tape, Var h, bool track = true);

    std::vector<Param*> params();
};

// Fixed standard-normal latent prior.
struct Prior {
    std::size_t dim;

    explicit Prior(std::size_t d) : dim(d) {}
    Tensor sample(Rng& rng, std::size_t batch) const;
};

// h = mu + exp(logvar/2) ⊙ eps, differentiable through mu and logvar.
Var sample_posterior(Var mu, Var logvar, Var eps);

// Row-wise log N(h; mu, diag(exp(logvar))) -> [batch]
Var log_prob_diag_gaussian(Var h, Var mu, Var logvar);

void init_params(EnergyNet& net, std::uint64_t seed, InitScheme scheme);
void init_params(GaussianEncoder& net, std::uint64_t seed, InitScheme scheme);
void init_params(Generator& net, std::uint64_t seed, InitScheme scheme);

}  // namespace bidvl
