#include "bidvl/train.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

namespace bidvl {

Models::Models(std::size_t dv, std::size_t dh, std::uint64_t seed, std::size_t hidden,
               InitScheme scheme)
    : energy({dv, hidden, hidden, 1}, "energy", /*sn=*/true),
      encoder(dv, {hidden, hidden}, dh, "encoder"),
      generator({dh, hidden, hidden, dv}, "generator"),
      prior(dh),
      d_v(dv),
      d_h(dh) {
    init_params(energy, seed, scheme);
    init_params(encoder, seed, scheme);
    init_params(generator, seed, scheme);
}

std::vector<Param*> Models::all_params() {
    auto ps = energy_params();
    for (Param* p : var_params()) ps.push_back(p);
    return ps;
}

std::vector<Param*> Models::var_params() {
    auto ps = encoder.params();
    for (Param* p : generator.params()) ps.push_back(p);
    return ps;
}

std::vector<Param*> Models::energy_params() { return energy.params(); }
std::vector<Param*> Models::encoder_params() { return encoder.params(); }

Tensor joint_energy(Models& m, const Tensor& v, const Tensor& h) {
    Tape tape;
    Var vv = tape.constant(v);
    Var hv = tape.constant(h);
    Var e = m.energy.energy(tape, vv, /*track=*/false);
    auto [mu, lv] = m.encoder.encode(tape, vv, /*track=*/false);
    Var logq = log_prob_diag_gaussian(hv, mu, lv);
    return tape.value(sub(e, logq));
}

AdamState::AdamState(std::vector<Param*> params) : params_(std::move(params)) {
    m_.reserve(params_.size());
    s_.reserve(params_.size());
    for (Param* p : params_) {
        m_.push_back(Tensor::zeros_like(p->value));
        s_.push_back(Tensor::zeros_like(p->value));
    }
}

void AdamState::step(double lr, double beta1, double beta2, double eps) {
    ++t_;
    const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(t_));
    for (std::size_t k = 0; k < params_.size(); ++k) {
        Param& p = *params_[k];
        for (std::size_t i = 0; i < p.value.size(); ++i) {
            const double g = p.grad[i];
            m_[k][i] = beta1 * m_[k][i] + (1.0 - beta1) * g;
            s_[k][i] = beta2 * s_[k][i] + (1.0 - beta2) * g * g;
            const double mhat = m_[k][i] / bc1;
            const double shat = s_[k][i] / bc2;
            p.value[i] -= lr * mhat / (std::sqrt(shat) + eps);
        }
        p.zero_grad();
    }
}

namespace {

double scalar_value(Tape& tape, Var v) { return tape.value(v)[0]; }

void check_component(double x, const char* name) {
    if (!std::isfinite(x)) {
        throw NumericError(std::string("bidvl-core: non-finite ") + name + " loss");
    }
}

}  // namespace

LossReport ll_step(Models& m, const Tensor& data_batch, const Tensor& eps_batch,
                   const Tensor& noise_batch, const TrainConfig& cfg) {
    LossReport rep;

    // Importance weights are plain constants outside the gradient graph.
    Tensor weights({data_batch.dim(0)}, cfg.ratio.r_basic);
    if (cfg.ratio.variant != RatioVariant::Constant) {
        Tape etape;
        Var ev = m.energy.energy(etape, etape.constant(data_batch), /*track=*/false);
        weights = importance_ratio(etape.value(ev), cfg.ratio);
    }

    Tape tape;
    Var v = tape.constant(data_batch);
    Var w = tape.constant(weights);

    // (i) weighted VAE term: r(v)·[λ·‖v − G(h̃)‖² + KL(q(h|v) ‖ p(h))]
    auto [mu, lv] = m.encoder.encode(tape, v, /*track=*/true);
    Var h_tilde = sample_posterior(mu, lv, tape.constant(eps_batch));
    Var xhat = m.generator.generate(tape, h_tilde, /*track=*/true);
    Var recon_row = sum_axis(square(sub(v, xhat)), 1);
    Var klp_row = kl_to_standard_prior(mu, lv);
    Var w_recon = mean(mul(w, scale(recon_row, cfg.lambda_rec)));
    Var w_klp = mean(mul(w, klp_row));

    // (ii) energy chase: mean E_psi'(G(h)), energy frozen, grads to omega2
    Var h_noise = tape.constant(noise_batch);
    Var v_gen = m.generator.generate(tape, h_noise, /*track=*/true);
    Var chase = mean(m.energy.energy(tape, v_gen, /*track=*/false));

    // (iii) latent cycle: mean −log q_omega1(h | G(h)); omega1 receives
    // gradients only in non-offset mode
    const bool cycle_tracks_encoder = cfg.grad_mode == GradMode::NonOffset;
    auto [mu_c, lv_c] = m.encoder.encode(tape, v_gen, cycle_tracks_encoder);
    Var cycle = mean(neg(log_prob_diag_gaussian(h_noise, mu_c, lv_c)));

    rep.weighted_recon = scalar_value(tape, w_recon);
    rep.weighted_klprior = scalar_value(tape, w_klp);
    rep.energy_chase = scalar_value(tape, chase);
    rep.latent_cycle = scalar_value(tape, cycle);
    check_component(rep.weighted_recon, "weighted_recon");
    check_component(rep.weighted_klprior, "weighted_klprior");
    check_component(rep.energy_chase, "energy_chase");
    check_component(rep.latent_cycle, "latent_cycle");

    Var total = add(add(w_recon, w_klp), add(chase, cycle));
    tape.backward(total);
    return rep;
}

LossReport ul_step(Models& m, const Tensor& data_batch, const Tensor& noise_batch,
                   const TrainConfig& cfg) {
    LossReport rep;

    // Generated samples enter the upper level as constants.
    Tensor v_gen_values;
    {
        Tape gtape;
        Var vg = m.generator.generate(gtape, gtape.constant(noise_batch), /*track=*/false);
        v_gen_values = gtape.value(vg);
    }

    Tape tape;
    Var e_data = m.energy.energy(tape, tape.constant(data_batch), /*track=*/true);
    Var e_gen = m.energy.energy(tape, tape.constant(v_gen_values), /*track=*/true);

    rep.ul_data_energy = scalar_value(tape, mean(e_data));
    rep.ul_model_energy = scalar_value(tape, mean(e_gen));
    check_component(rep.ul_data_energy, "ul_data_energy");
    check_component(rep.ul_model_energy, "ul_model_energy");

    Var loss = cfg.energy_loss == EnergyLoss::Plain
                   ? sub(mean(e_data), mean(e_gen))
                   : add(mean(relu(add_scalar(e_data, 1.0))),
                         mean(relu(add_scalar(neg(e_gen), 1.0))));
    tape.backward(loss);

    if (cfg.grad_mode == GradMode::NonOffset) {
        // prior-chase replacement: min KL(q_omega1(h|v) || p(h)) on generated v
        Tape ptape;
        auto [mu, lv] = m.encoder.encode(ptape, ptape.constant(v_gen_values), /*track=*/true);
        Var prior_loss = mean(kl_to_standard_prior(mu, lv));
        check_component(scalar_value(ptape, prior_loss), "prior_chase");
        ptape.backward(prior_loss);
    }
    return rep;
}

TrainResult train(const TrainConfig& cfg, const Tensor& dataset, const std::string& outdir) {
    cfg.validate();
    if (dataset.dim(0) == 0) throw ConfigError("empty dataset");
    std::filesystem::create_directories(outdir);

    Models models(dataset.dim(1), cfg.d_h, cfg.seed);
    AdamState adam_var(models.var_params());
    AdamState adam_energy(models.energy_params());
    AdamState adam_ul_var(models.encoder_params());

    BatchIterator batches(dataset, cfg.batch, cfg.seed);
    Rng eps_rng(cfg.seed, 5);
    Rng noise_rng(cfg.seed, 6);

    TrainResult result;
    result.metrics_path = outdir + "/metrics.csv";
    std::ofstream metrics(result.metrics_path, std::ios::trunc);
    metrics.precision(12);
    metrics << "iter,weighted_recon,weighted_klprior,energy_chase,latent_cycle,"
               "ul_data_energy,ul_model_energy\n";

    const auto params = models.all_params();
    auto write_ckpt = [&](std::uint64_t iter) {
        char name[32];
        std::snprintf(name, sizeof(name), "/ckpt_%06llu.bdvl",
                      static_cast<unsigned long long>(iter));
        const std::string path = outdir + name;
        save_checkpoint(path, params, iter);
        result.checkpoint_paths.push_back(path);
    };

    write_ckpt(0);

    for (std::uint64_t iter = 1; iter <= cfg.max_iters; ++iter) {
        models.energy.power_iterate(1);
        const Tensor batch = batches.next();

        LossReport ll{};
        for (int n = 0; n < cfg.n_ll_steps; ++n) {
            Tensor eps({cfg.batch, cfg.d_h});
            for (std::size_t i = 0; i < eps.size(); ++i) eps[i] = eps_rng.normal();
            const Tensor noise = models.prior.sample(noise_rng, cfg.batch);
            ll = ll_step(models, batch, eps, noise, cfg);
            adam_var.step(cfg.lr_var, cfg.adam_beta1, cfg.adam_beta2, cfg.adam_eps);
        }

        const Tensor noise_ul = models.prior.sample(noise_rng, cfg.batch);
        const LossReport ul = ul_step(models, batch, noise_ul, cfg);
        adam_energy.step(cfg.lr_energy, cfg.adam_beta1, cfg.adam_beta2, cfg.adam_eps);
        if (cfg.grad_mode == GradMode::NonOffset) {
            adam_ul_var.step(cfg.lr_var, cfg.adam_beta1, cfg.adam_beta2, cfg.adam_eps);
        }

        metrics << iter << "," << ll.weighted_recon << "," << ll.weighted_klprior << ","
                << ll.energy_chase << "," << ll.latent_cycle << "," << ul.ul_data_energy
                << "," << ul.ul_model_energy << "\n";

        if (iter % cfg.eval_every == 0 || iter == cfg.max_iters) write_ckpt(iter);
        result.iterations_run = iter;
    }
    return result;
}

}  // namespace bidvl
