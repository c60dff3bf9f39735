#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <vector>

#include "bidvl/train.hpp"

using namespace bidvl;

namespace {

void zero_params(Models& m) {
    for (Param* p : m.all_params()) {
        for (std::size_t i = 0; i < p->value.size(); ++i) p->value[i] = 0.0;
    }
}

// Move every parameter off its initialization point so no ReLU sits
// exactly on a kink during finite-difference comparisons.
void jitter_params(Models& m, std::uint64_t seed) {
    Rng rng(seed, 24);
    for (Param* p : m.all_params()) {
        for (std::size_t i = 0; i < p->value.size(); ++i) {
            p->value[i] += rng.uniform(-0.05, 0.05);
        }
    }
}

void clear_grads(Models& m) {
    for (Param* p : m.all_params()) p->zero_grad();
}

double grad_at(const Param& p, std::size_t i) {
    return p.grad.size() ? p.grad[i] : 0.0;
}

std::vector<std::uint8_t> file_bytes(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    REQUIRE(in.good());
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

Tensor rand_matrix(std::size_t n, std::size_t d, Rng& rng, double scale = 0.5) {
    Tensor t({n, d});
    for (std::size_t i = 0; i < t.size(); ++i) t[i] = scale * rng.normal();
    return t;
}

}  // namespace

TEST_CASE("joint energy of the zeroed decoupled model") {
    Models m(1, 1, 0);
    zero_params(m);
    m.encoder.head_rawlv.b.value = Tensor({1}, -20.0);  // logvar -> 0

    // energy is identically zero, posterior is N(0,1): E(v,h) = -log N(h;0,1)
    const Tensor v = Tensor::matrix({{0.3}, {-0.7}});
    const Tensor h = Tensor::matrix({{0.0}, {1.0}});
    const Tensor e = joint_energy(m, v, h);
    CHECK(e[0] == doctest::Approx(0.9189385332046727).epsilon(1e-6));
    CHECK(e[1] == doctest::Approx(1.4189385332046727).epsilon(1e-6));
}

TEST_CASE("joint energy decomposes into marginal energy minus posterior log-density") {
    Models m(2, 2, 5);
    jitter_params(m, 5);
    Rng rng(5, 44);
    const Tensor v = rand_matrix(3, 2, rng);
    const Tensor h = rand_matrix(3, 2, rng);

    Tape t;
    Var vv = t.constant(v);
    const Tensor e_marg = t.value(m.energy.energy(t, vv, false));
    auto [mu, lv] = m.encoder.encode(t, vv, false);
    const Tensor logq = t.value(log_prob_diag_gaussian(t.constant(h), mu, lv));

    const Tensor joint = joint_energy(m, v, h);
    for (std::size_t i = 0; i < 3; ++i) {
        CHECK(joint[i] == doctest::Approx(e_marg[i] - logq[i]).epsilon(1e-12));
    }
}

TEST_CASE("lower-level objective degenerates to the plain vae at unit weight") {
    Models m(2, 2, 7);
    jitter_params(m, 7);
    Rng rng(7, 45);
    const Tensor data = rand_matrix(8, 2, rng);
    const Tensor eps = rand_matrix(8, 2, rng, 1.0);
    const Tensor noise = rand_matrix(8, 2, rng, 1.0);

    TrainConfig cfg;
    cfg.ratio.r_basic = 1.0;
    cfg.lambda_rec = 1.0;
    const LossReport rep = ll_step(m, data, eps, noise, cfg);
    clear_grads(m);

    // hand-computed negative-elbo pieces with the same eps draws
    Tape t;
    Var vv = t.constant(data);
    auto [mu, lv] = m.encoder.encode(t, vv, false);
    const Tensor muv = t.value(mu), lvv = t.value(lv);
    Tensor h_tilde({8, 2});
    for (std::size_t i = 0; i < h_tilde.size(); ++i) {
        h_tilde[i] = muv[i] + std::exp(lvv[i] / 2.0) * eps[i];
    }
    const Tensor xhat = t.value(m.generator.generate(t, t.constant(h_tilde), false));
    double recon = 0.0;
    for (std::size_t i = 0; i < 8; ++i) {
        for (std::size_t j = 0; j < 2; ++j) {
            const double d = data[i * 2 + j] - xhat[i * 2 + j];
            recon += d * d;
        }
    }
    recon /= 8.0;
    const Tensor klrow = kl_to_standard_prior(muv, lvv);
    double klp = 0.0;
    for (std::size_t i = 0; i < 8; ++i) klp += klrow[i];
    klp /= 8.0;

    CHECK(rep.weighted_recon == doctest::Approx(recon).epsilon(1e-12));
    CHECK(rep.weighted_klprior == doctest::Approx(klp).epsilon(1e-12));
}

TEST_CASE("lower-level gradients match central differences") {
    // non-offset mode with a constant ratio: every surviving dependence on
    // the variational parameters is tracked, so finite differences of the
    // reported total must reproduce the accumulated gradients.
    TrainConfig cfg;
    cfg.grad_mode = GradMode::NonOffset;

    Models m(2, 1, 13, /*hidden=*/3);
    jitter_params(m, 13);
    Rng rng(13, 46);
    const Tensor data = rand_matrix(3, 2, rng);
    const Tensor eps = rand_matrix(3, 1, rng, 1.0);
    const Tensor noise = rand_matrix(3, 1, rng, 1.0);

    auto loss_value = [&]() {
        const LossReport r = ll_step(m, data, eps, noise, cfg);
        clear_grads(m);
        return r.weighted_recon + r.weighted_klprior + r.energy_chase + r.latent_cycle;
    };

    ll_step(m, data, eps, noise, cfg);
    // the energy net is frozen at the lower level
    for (Param* p : m.energy_params()) {
        for (std::size_t i = 0; i < p->value.size(); ++i) CHECK(grad_at(*p, i) == 0.0);
    }
    // snapshot before finite differencing: loss_value wipes the gradients
    std::vector<std::vector<double>> grads;
    for (Param* p : m.var_params()) {
        std::vector<double> g(p->value.size());
        for (std::size_t i = 0; i < g.size(); ++i) g[i] = grad_at(*p, i);
        grads.push_back(std::move(g));
    }
    clear_grads(m);

    const double h = 1e-4;
    double max_err = 0.0;
    std::size_t k = 0;
    for (Param* p : m.var_params()) {
        for (std::size_t i = 0; i < p->value.size(); ++i) {
            const double g = grads[k][i];
            const double save = p->value[i];
            p->value[i] = save + h;
            const double fp = loss_value();
            p->value[i] = save - h;
            const double fm = loss_value();
            p->value[i] = save;
            const double fd = (fp - fm) / (2.0 * h);
            max_err = std::max(max_err,
                               std::abs(fd - g) / std::max({1.0, std::abs(fd), std::abs(g)}));
        }
        ++k;
    }
    clear_grads(m);
    CHECK(max_err <= 1e-5);
}

TEST_CASE("upper-level gradients match central differences") {
    TrainConfig cfg;
    Models m(2, 1, 17, /*hidden=*/3);
    jitter_params(m, 17);
    Rng rng(17, 47);
    const Tensor data = rand_matrix(3, 2, rng);
    const Tensor noise = rand_matrix(3, 1, rng, 1.0);

    auto loss_value = [&]() {
        const LossReport r = ul_step(m, data, noise, cfg);
        clear_grads(m);
        return r.ul_data_energy - r.ul_model_energy;
    };

    ul_step(m, data, noise, cfg);
    // in offset mode the upper level never touches the variational nets
    for (Param* p : m.var_params()) {
        for (std::size_t i = 0; i < p->value.size(); ++i) CHECK(grad_at(*p, i) == 0.0);
    }
    // snapshot before finite differencing: loss_value wipes the gradients
    std::vector<std::vector<double>> grads;
    for (Param* p : m.energy_params()) {
        std::vector<double> g(p->value.size());
        for (std::size_t i = 0; i < g.size(); ++i) g[i] = grad_at(*p, i);
        grads.push_back(std::move(g));
    }
    clear_grads(m);

    const double h = 1e-4;
    double max_err = 0.0;
    std::size_t k = 0;
    for (Param* p : m.energy_params()) {
        for (std::size_t i = 0; i < p->value.size(); ++i) {
            const double g = grads[k][i];
            const double save = p->value[i];
            p->value[i] = save + h;
            const double fp = loss_value();
            p->value[i] = save - h;
            const double fm = loss_value();
            p->value[i] = save;
            const double fd = (fp - fm) / (2.0 * h);
            max_err = std::max(max_err,
                               std::abs(fd - g) / std::max({1.0, std::abs(fd), std::abs(g)}));
        }
        ++k;
    }
    clear_grads(m);
    CHECK(max_err <= 1e-5);
}

TEST_CASE("offset and non-offset modes give identical energy gradients") {
    TrainConfig a, b;
    a.grad_mode = GradMode::Offset;
    b.grad_mode = GradMode::NonOffset;

    Models m1(2, 2, 21), m2(2, 2, 21);
    jitter_params(m1, 21);
    jitter_params(m2, 21);
    Rng rng(21, 48);
    const Tensor data = rand_matrix(6, 2, rng);
    const Tensor noise = rand_matrix(6, 2, rng, 1.0);

    ul_step(m1, data, noise, a);
    ul_step(m2, data, noise, b);

    auto e1 = m1.energy_params(), e2 = m2.energy_params();
    for (std::size_t k = 0; k < e1.size(); ++k) {
        for (std::size_t i = 0; i < e1[k]->value.size(); ++i) {
            CHECK(grad_at(*e1[k], i) == grad_at(*e2[k], i));
        }
    }
    // non-offset additionally moves the encoder toward the prior
    double enc_grad_norm = 0.0;
    for (Param* p : m2.encoder_params()) {
        for (std::size_t i = 0; i < p->value.size(); ++i) {
            enc_grad_norm += grad_at(*p, i) * grad_at(*p, i);
        }
    }
    CHECK(enc_grad_norm > 0.0);
    for (Param* p : m1.encoder_params()) {
        for (std::size_t i = 0; i < p->value.size(); ++i) CHECK(grad_at(*p, i) == 0.0);
    }
}

TEST_CASE("the plain energy loss is invariant to a global energy shift") {
    // mean E(data) - mean E(gen): the final bias cancels exactly
    TrainConfig cfg;
    Models m(2, 2, 23);
    jitter_params(m, 23);
    Rng rng(23, 49);
    ul_step(m, rand_matrix(5, 2, rng), rand_matrix(5, 2, rng, 1.0), cfg);
    CHECK(grad_at(m.energy.layers.back().b, 0) == 0.0);
}

TEST_CASE("hinge loss clips dead regions") {
    TrainConfig cfg;
    cfg.energy_loss = EnergyLoss::Hinge;
    Rng rng(29, 58);

    Models m(2, 2, 29);
    zero_params(m);  // energy reduces to its final bias
    m.energy.layers.back().b.value = Tensor({1}, -3.0);
    ul_step(m, rand_matrix(4, 2, rng), rand_matrix(4, 2, rng, 1.0), cfg);
    // data hinge dead (1 + E = -2), generated hinge active (1 - E = 4)
    CHECK(grad_at(m.energy.layers.back().b, 0) == doctest::Approx(-1.0).epsilon(1e-12));

    Models m2(2, 2, 29);
    zero_params(m2);
    m2.energy.layers.back().b.value = Tensor({1}, 3.0);
    ul_step(m2, rand_matrix(4, 2, rng), rand_matrix(4, 2, rng, 1.0), cfg);
    CHECK(grad_at(m2.energy.layers.back().b, 0) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("adam first step has magnitude close to the learning rate") {
    Param p(Tensor::vec({1.0, -2.0}), "p");
    p.grad = Tensor::vec({0.5, -40.0});
    AdamState adam({&p});
    adam.step(1e-3, 0.9, 0.999, 1e-8);
    CHECK(adam.t() == 1);
    CHECK(std::abs(1.0 - p.value[0]) == doctest::Approx(1e-3).epsilon(1e-6));
    CHECK(std::abs(-2.0 - p.value[1]) == doctest::Approx(1e-3).epsilon(1e-6));
    CHECK(p.value[0] < 1.0);   // moved against the gradient
    CHECK(p.value[1] > -2.0);
    CHECK(p.grad[0] == 0.0);   // consumed
    CHECK(p.grad[1] == 0.0);
}

TEST_CASE("adam leaves parameters alone under a zero gradient") {
    Param p(Tensor::vec({0.75}), "p");
    p.zero_grad();
    AdamState adam({&p});
    adam.step(1e-2, 0.9, 0.999, 1e-8);
    CHECK(p.value[0] == 0.75);
}

TEST_CASE("training is deterministic and checkpoints are bitwise identical") {
    DatasetSpec spec;
    spec.n = 64;
    spec.seed = 31;
    const Tensor data = make_dataset(spec);

    TrainConfig cfg;
    cfg.batch = 16;
    cfg.max_iters = 30;
    cfg.eval_every = 10;
    cfg.seed = 31;

    const auto dir = std::filesystem::temp_directory_path() / "bidvl_core_det";
    const std::string d1 = (dir / "a").string(), d2 = (dir / "b").string();
    const TrainResult r1 = train(cfg, data, d1);
    const TrainResult r2 = train(cfg, data, d2);
    CHECK(r1.iterations_run == 30);
    REQUIRE(!r1.checkpoint_paths.empty());
    CHECK(file_bytes(r1.checkpoint_paths.back()) == file_bytes(r2.checkpoint_paths.back()));
    CHECK(file_bytes(r1.metrics_path) == file_bytes(r2.metrics_path));
    std::filesystem::remove_all(dir);
}

TEST_CASE("training with zero iterations still writes the initial checkpoint") {
    DatasetSpec spec;
    spec.n = 8;
    spec.seed = 37;
    const Tensor data = make_dataset(spec);

    TrainConfig cfg;
    cfg.batch = 4;
    cfg.max_iters = 0;

    const auto dir = std::filesystem::temp_directory_path() / "bidvl_core_zero";
    const TrainResult r = train(cfg, data, dir.string());
    CHECK(r.iterations_run == 0);
    REQUIRE(r.checkpoint_paths.size() == 1);
    CHECK(r.checkpoint_paths[0].find("ckpt_000000") != std::string::npos);
    std::filesystem::remove_all(dir);
}

TEST_CASE("non-finite losses are rejected") {
    TrainConfig cfg;
    Models m(2, 2, 41);
    jitter_params(m, 41);
    // a poisoned output bias reaches the reported mean energy unclipped
    m.energy.layers.back().b.value = Tensor({1}, std::nan(""));
    Rng rng(41, 59);
    CHECK_THROWS_AS(ul_step(m, rand_matrix(2, 2, rng), rand_matrix(2, 2, rng, 1.0), cfg),
                    NumericError);
}
