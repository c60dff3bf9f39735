#pragma once

#include <map>
#include <string>
#include <utility>
#include <vector>

#include "bidvl/divergence.hpp"
#include "bidvl/train.hpp"

namespace bidvl {

struct EvalReport {
    double mmd2 = 0.0;
    double rmse = 0.0;
    std::map<std::string, double> auroc_per_ood_set;
    std::size_t modes_covered = 0;
    std::vector<double> per_mode_mass;
};

double rmse(const Tensor& x, const Tensor& xhat);

// Per-sample marginal energies with frozen parameters.
Tensor energies_of(Models& m, const Tensor& v);

// Generator samples from prior noise.
Tensor sample_generator(Models& m, std::size_t n, Rng& rng);

// x̂ = G(mu(x)): reconstruction through the posterior mean, no sampling.
std::pair<Tensor, double> recon_pass(Models& m, const Tensor& test_set);

// Pair-counting AUROC, ties worth 1/2.
double auroc(const std::vector<double>& scores_in, const std::vector<double>& scores_out);

// AUROC of the negative marginal energy against each named OOD set.
std::map<std::string, double> ood_report(Models& m, const Tensor& in_set,
                                         const std::vector<std::pair<std::string, Tensor>>& ood_sets);

// Nearest-center assignment within `radius`; a mode counts as covered when
// it holds at least `mass_threshold` of the samples.
std::pair<std::size_t, std::vector<double>> mode_coverage(
    const Tensor& samples, const std::vector<std::pair<double, double>>& centers,
    double radius, double mass_threshold = 0.02);

// Energy values over a square grid (d_v == 2 only), row-major.
Tensor energy_grid(Models& m, double lo, double hi, std::size_t resolution);

void write_csv_matrix(const std::string& path, const Tensor& t);

// 8-bit PGM, min-max normalized; a flat field maps to 0.
void write_pgm(const std::string& path, const Tensor& t);

Tensor uniform_box_noise(std::size_t n, std::size_t d, Rng& rng);

}  // namespace bidvl
