#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <sstream>

#include "bidvl/divergence.hpp"
#include "bidvl/oracle.hpp"

using namespace bidvl;
using namespace bidvl::oracle;

TEST_CASE("exact marginals of the uniform table") {
    DiscreteEBLVM m{Tensor({2, 2}, 0.0)};
    const auto mg = exact_marginals(m);
    CHECK(mg.logZ == doctest::Approx(std::log(4.0)).epsilon(1e-14));
    for (std::size_t i = 0; i < 4; ++i) {
        CHECK(mg.p_joint[i] == doctest::Approx(0.25).epsilon(1e-14));
        CHECK(mg.p_h_given_v[i] == doctest::Approx(0.5).epsilon(1e-14));
    }
    CHECK(mg.p_v[0] == doctest::Approx(0.5).epsilon(1e-14));
}

TEST_CASE("hand-enumerated 2x2 model") {
    DiscreteEBLVM m{Tensor::matrix({{0.0, std::log(2.0)}, {0.0, 0.0}})};
    const auto mg = exact_marginals(m);
    // Z = 1 + 1/2 + 1 + 1 = 3.5
    CHECK(std::exp(mg.logZ) == doctest::Approx(3.5).epsilon(1e-14));
    CHECK(mg.p_joint.at(0, 1) == doctest::Approx(1.0 / 7.0).epsilon(1e-14));
}

TEST_CASE("energy-shift invariance") {
    Rng rng(4, 60);
    auto m = random_model(rng, 3, 4);
    const auto data = oracle::random_data(rng, 3);
    const auto mg0 = exact_marginals(m);
    const auto g0 = exact_nll_grad(m, data);
    DiscreteEBLVM shifted{m.E};
    for (std::size_t i = 0; i < shifted.E.size(); ++i) shifted.E[i] += 1.75;
    const auto mg1 = exact_marginals(shifted);
    const auto g1 = exact_nll_grad(shifted, data);
    CHECK(mg1.logZ == doctest::Approx(mg0.logZ - 1.75).epsilon(1e-12));
    for (std::size_t i = 0; i < g0.size(); ++i) {
        CHECK(g1[i] == doctest::Approx(g0[i]).epsilon(1e-12));
        CHECK(mg1.p_joint[i] == doctest::Approx(mg0.p_joint[i]).epsilon(1e-12));
    }
}

TEST_CASE("exact nll gradient hand case and zero-sum property") {
    DiscreteEBLVM m{Tensor({2, 2}, 0.0)};
    DataDist data{{1.0, 0.0}};
    const Tensor g = exact_nll_grad(m, data);
    CHECK(g.at(0, 0) == doctest::Approx(0.25).epsilon(1e-14));
    CHECK(g.at(0, 1) == doctest::Approx(0.25).epsilon(1e-14));
    CHECK(g.at(1, 0) == doctest::Approx(-0.25).epsilon(1e-14));
    CHECK(g.at(1, 1) == doctest::Approx(-0.25).epsilon(1e-14));

    Rng rng(8, 61);
    for (int s = 0; s < 20; ++s) {
        const auto rm = random_model(rng, 4, 3);
        const auto rd = oracle::random_data(rng, 4);
        const Tensor rg = exact_nll_grad(rm, rd);
        double sum = 0.0;
        for (std::size_t i = 0; i < rg.size(); ++i) sum += rg[i];
        CHECK(std::abs(sum) <= 1e-14);
    }
}

TEST_CASE("gradient at the data-matching model is zero") {
    Rng rng(15, 62);
    const auto m = random_model(rng, 3, 3);
    const auto mg = exact_marginals(m);
    DataDist data{mg.p_v};
    const Tensor g = exact_nll_grad(m, data);
    for (std::size_t i = 0; i < g.size(); ++i) CHECK(std::abs(g[i]) <= 1e-14);
}

TEST_CASE("split identity and residual structure") {
    Rng rng(23, 63);
    for (int s = 0; s < 100; ++s) {
        const std::size_t V = 2 + rng.below(5), H = 2 + rng.below(5);
        const auto m = random_model(rng, V, H);
        const auto data = oracle::random_data(rng, V);
        const auto var = random_variational(rng, V, H);
        const auto t = split_terms(m, var, data);
        const Tensor exact = exact_nll_grad(m, data);
        for (std::size_t i = 0; i < exact.size(); ++i) {
            CHECK(std::abs(t.a[i] + t.b[i] + t.c[i] - exact[i]) <= 1e-12);
        }
    }

    // at the exact optimum both residual tables vanish
    const auto m = random_model(rng, 3, 4);
    const auto data = oracle::random_data(rng, 3);
    const auto var = solve_ll_exact(m, data);
    const auto t = split_terms(m, var, data);
    for (std::size_t i = 0; i < t.b.size(); ++i) {
        CHECK(std::abs(t.b[i]) <= 1e-14);
        CHECK(std::abs(t.c[i]) <= 1e-14);
    }

    // matching joint but wrong posterior: only the posterior residual is live
    auto half = solve_ll_exact(m, data);
    half.q_post = random_variational(rng, 3, 4).q_post;
    const auto t2 = split_terms(m, half, data);
    double bmax = 0.0;
    for (std::size_t i = 0; i < t2.c.size(); ++i) {
        CHECK(std::abs(t2.c[i]) <= 1e-14);
        bmax = std::max(bmax, std::abs(t2.b[i]));
    }
    CHECK(bmax > 1e-6);
}

TEST_CASE("solve_ll_exact gives divergence zero in every metric") {
    Rng rng(31, 64);
    const auto m = random_model(rng, 4, 4);
    const auto data = oracle::random_data(rng, 4);
    const auto var = solve_ll_exact(m, data);
    const auto mg = exact_marginals(m);

    std::vector<double> pj(var.p_joint.data(), var.p_joint.data() + var.p_joint.size());
    std::vector<double> mj(mg.p_joint.data(), mg.p_joint.data() + mg.p_joint.size());
    CHECK(kl_discrete(pj, mj) == doctest::Approx(0.0).epsilon(1e-14));
    CHECK(symmetric_kl_discrete(pj, mj) == doctest::Approx(0.0).epsilon(1e-14));
    CHECK(tv_discrete(pj, mj) == doctest::Approx(0.0).epsilon(1e-14));
}

TEST_CASE("theorem 1 objective and gradient equivalence") {
    Rng rng(47, 65);
    for (int s = 0; s < 50; ++s) {
        const std::size_t V = 2 + rng.below(5), H = 2 + rng.below(5);
        const auto m = random_model(rng, V, H);
        const auto data = oracle::random_data(rng, V);
        const auto var = solve_ll_exact(m, data);
        const auto j = j_objectives(m, var, data);
        CHECK(std::abs(j.J_UL - j.J) <= 1e-10);
        CHECK(theorem1_grad_check(m, data) <= 1e-10);
    }
}

TEST_CASE("perturbing the solved posterior breaks the gradient equality") {
    Rng rng(53, 66);
    const auto m = random_model(rng, 3, 3);
    const auto data = oracle::random_data(rng, 3);
    auto var = solve_ll_exact(m, data);
    // nudge one row of the posterior, renormalize
    var.q_post[0] += 1e-3;
    double row = 0.0;
    for (std::size_t h = 0; h < 3; ++h) row += var.q_post[h];
    for (std::size_t h = 0; h < 3; ++h) var.q_post[h] /= row;

    const auto t = split_terms(m, var, data);
    const Tensor exact = exact_nll_grad(m, data);
    double dev = 0.0;
    for (std::size_t i = 0; i < exact.size(); ++i) {
        dev = std::max(dev, std::abs(t.a[i] - exact[i]));
    }
    CHECK(dev > 1e-6);
}

TEST_CASE("appendix identity and bound for arbitrary tables") {
    Rng rng(61, 67);
    for (int s = 0; s < 100; ++s) {
        const std::size_t V = 2 + rng.below(5), H = 2 + rng.below(5);
        const auto m = random_model(rng, V, H);
        const auto data = oracle::random_data(rng, V);
        const auto var = random_variational(rng, V, H);
        const auto j = j_objectives(m, var, data);
        CHECK(std::abs((j.J_UL - j.J) - (j.KL_post - j.KL_joint)) <= 1e-12);
        CHECK(std::abs(j.J_UL - j.J) <= j.KL_post + j.KL_joint + 1e-12);
    }
}

TEST_CASE("full verification suite passes") {
    std::ostringstream csv;
    CHECK(run_suite(50, csv));
    CHECK(csv.str().find("fail") == std::string::npos);
}
