#pragma once

#include <cstdint>
#include <string>

#include "bidvl/divergence.hpp"

namespace bidvl {

enum class GradMode { NonOffset, Offset };
enum class EnergyLoss { Plain, Hinge };

GradMode parse_grad_mode(const std::string& name);
EnergyLoss parse_energy_loss(const std::string& name);
std::string grad_mode_name(GradMode m);
std::string energy_loss_name(EnergyLoss m);

// Every training and ablation knob. Defaults follow the protocol the
// training loop is calibrated for: offset gradients, constant ratio 0.05,
// one lower-level step.
struct TrainConfig {
    GradMode grad_mode = GradMode::Offset;
    EnergyLoss energy_loss = EnergyLoss::Plain;
    RatioMode ratio;               // constant, r' = 0.05
    int n_ll_steps = 1;
    double lr_var = 1e-3;          // alpha
    double lr_energy = 5e-4;       // beta
    double adam_beta1 = 0.9;
    double adam_beta2 = 0.999;
    double adam_eps = 1e-8;
    std::size_t batch = 128;
    std::uint64_t seed = 42;
    std::size_t d_h = 2;
    double lambda_rec = 1.0;
    std::uint64_t max_iters = 6000;
    std::uint64_t eval_every = 500;
    std::string dataset = "eight_gaussians";
    std::size_t dataset_n = 8192;

    void validate() const;  // throws ConfigError
};

}  // namespace bidvl
