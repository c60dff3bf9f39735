#include "bidvl/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>

#include "bidvl/divergence.hpp"

namespace bidvl {
namespace oracle {

namespace {

double logsumexp(const double* xs, std::size_t n) {
    double m = xs[0];
    for (std::size_t i = 1; i < n; ++i) m = std::max(m, xs[i]);
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += std::exp(xs[i] - m);
    return m + std::log(s);
}

std::vector<double> flatten(const Tensor& t) {
    return std::vector<double>(t.data(), t.data() + t.size());
}

}  // namespace

ExactMarginals exact_marginals(const DiscreteEBLVM& m) {
    m.E.check_finite("discrete energy table");
    const std::size_t V = m.V(), H = m.H();
    std::vector<double> neg(V * H);
    for (std::size_t i = 0; i < V * H; ++i) neg[i] = -m.E[i];

    ExactMarginals out;
    out.logZ = logsumexp(neg.data(), V * H);
    out.p_joint = Tensor({V, H});
    out.p_h_given_v = Tensor({V, H});
    out.p_v.assign(V, 0.0);
    for (std::size_t v = 0; v < V; ++v) {
        const double row_lse = logsumexp(neg.data() + v * H, H);
        out.p_v[v] = std::exp(row_lse - out.logZ);
        for (std::size_t h = 0; h < H; ++h) {
            out.p_joint[v * H + h] = std::exp(neg[v * H + h] - out.logZ);
            out.p_h_given_v[v * H + h] = std::exp(neg[v * H + h] - row_lse);
        }
    }
    return out;
}

Tensor exact_nll_grad(const DiscreteEBLVM& m, const DataDist& data) {
    const auto mg = exact_marginals(m);
    const std::size_t V = m.V(), H = m.H();
    if (data.q.size() != V) throw ContractError("data distribution size mismatch");
    Tensor g({V, H});
    for (std::size_t v = 0; v < V; ++v) {
        for (std::size_t h = 0; h < H; ++h) {
            g[v * H + h] = data.q[v] * mg.p_h_given_v[v * H + h] - mg.p_joint[v * H + h];
        }
    }
    return g;
}

SplitTerms split_terms(const DiscreteEBLVM& m, const DiscreteVariational& var,
                       const DataDist& data) {
    const auto mg = exact_marginals(m);
    const std::size_t V = m.V(), H = m.H();
    SplitTerms t{Tensor({V, H}), Tensor({V, H}), Tensor({V, H})};
    for (std::size_t v = 0; v < V; ++v) {
        for (std::size_t h = 0; h < H; ++h) {
            const std::size_t k = v * H + h;
            t.a[k] = data.q[v] * var.q_post[k] - var.p_joint[k];
            t.b[k] = data.q[v] * mg.p_h_given_v[k] - data.q[v] * var.q_post[k];
            t.c[k] = var.p_joint[k] - mg.p_joint[k];
        }
    }
    return t;
}

DiscreteVariational solve_ll_exact(const DiscreteEBLVM& m, const DataDist&) {
    const auto mg = exact_marginals(m);
    return DiscreteVariational{mg.p_h_given_v, mg.p_joint};
}

JObjectives j_objectives(const DiscreteEBLVM& m, const DiscreteVariational& var,
                         const DataDist& data) {
    const auto mg = exact_marginals(m);
    const std::size_t V = m.V(), H = m.H();

    std::vector<double> q_q1(V * H), q_post_model(V * H);
    for (std::size_t v = 0; v < V; ++v) {
        for (std::size_t h = 0; h < H; ++h) {
            q_q1[v * H + h] = data.q[v] * var.q_post[v * H + h];
            q_post_model[v * H + h] = data.q[v] * mg.p_h_given_v[v * H + h];
        }
    }

    JObjectives r;
    r.J = kl_discrete(data.q, mg.p_v);
    const double kl_q1_model = kl_discrete(q_q1, flatten(mg.p_joint));
    r.KL_joint = kl_discrete(flatten(var.p_joint), flatten(mg.p_joint));
    r.J_UL = kl_q1_model - r.KL_joint;
    r.KL_post = kl_discrete(q_q1, q_post_model);
    return r;
}

double theorem1_grad_check(const DiscreteEBLVM& m, const DataDist& data) {
    const auto var = solve_ll_exact(m, data);
    const auto t = split_terms(m, var, data);
    const Tensor exact = exact_nll_grad(m, data);
    double dev = 0.0;
    for (std::size_t i = 0; i < exact.size(); ++i) {
        dev = std::max(dev, std::fabs(t.a[i] - exact[i]));
    }
    return dev;
}

DiscreteEBLVM random_model(Rng& rng, std::size_t V, std::size_t H, double lo, double hi) {
    Tensor E({V, H});
    for (std::size_t i = 0; i < E.size(); ++i) E[i] = rng.uniform(lo, hi);
    return DiscreteEBLVM{std::move(E)};
}

DiscreteVariational random_variational(Rng& rng, std::size_t V, std::size_t H) {
    DiscreteVariational var{Tensor({V, H}), Tensor({V, H})};
    double total = 0.0;
    for (std::size_t v = 0; v < V; ++v) {
        double row = 0.0;
        for (std::size_t h = 0; h < H; ++h) {
            var.q_post[v * H + h] = 0.05 + rng.uniform();
            var.p_joint[v * H + h] = 0.05 + rng.uniform();
            row += var.q_post[v * H + h];
            total += var.p_joint[v * H + h];
        }
        for (std::size_t h = 0; h < H; ++h) var.q_post[v * H + h] /= row;
    }
    for (std::size_t i = 0; i < V * H; ++i) var.p_joint[i] /= total;
    return var;
}

DataDist random_data(Rng& rng, std::size_t V) {
    DataDist d;
    d.q.resize(V);
    double s = 0.0;
    for (std::size_t v = 0; v < V; ++v) {
        d.q[v] = 0.05 + rng.uniform();
        s += d.q[v];
    }
    for (std::size_t v = 0; v < V; ++v) d.q[v] /= s;
    return d;
}

namespace {
struct CheckRow {
    const char* name;
    int cases;
    double max_dev;
    double tol;
    bool pass() const { return max_dev <= tol; }
};

void emit(std::ostream& csv, const CheckRow& r) {
    csv << r.name << "," << r.cases << "," << r.max_dev << "," << r.tol << ","
        << (r.pass() ? "pass" : "fail") << "\n";
}
}  // namespace

bool run_suite(int n_seeds, std::ostream& csv) {
    csv << "check,cases,max_deviation,tolerance,pass\n";
    csv.precision(17);
    std::vector<CheckRow> rows;

    // Theorem 1 at the exact LL optimum: objective values and gradients.
    {
        double dev_obj = 0.0, dev_grad = 0.0;
        for (int s = 0; s < n_seeds; ++s) {
            Rng rng(static_cast<std::uint64_t>(s) + 1, 11);
            const std::size_t V = 2 + rng.below(5), H = 2 + rng.below(5);
            const auto m = random_model(rng, V, H);
            const auto data = random_data(rng, V);
            const auto var = solve_ll_exact(m, data);
            const auto j = j_objectives(m, var, data);
            dev_obj = std::max(dev_obj, std::fabs(j.J_UL - j.J));
            dev_grad = std::max(dev_grad, theorem1_grad_check(m, data));
        }
        rows.push_back({"theorem1_objective", n_seeds, dev_obj, 1e-10});
        rows.push_back({"theorem1_gradient", n_seeds, dev_grad, 1e-10});
    }

    // Gradient split identity a + b + c == exact gradient, arbitrary tables.
    {
        double dev = 0.0;
        for (int s = 0; s < 100; ++s) {
            Rng rng(static_cast<std::uint64_t>(s) + 1, 12);
            const std::size_t V = 2 + rng.below(5), H = 2 + rng.below(5);
            const auto m = random_model(rng, V, H);
            const auto data = random_data(rng, V);
            const auto var = random_variational(rng, V, H);
            const auto t = split_terms(m, var, data);
            const Tensor exact = exact_nll_grad(m, data);
            for (std::size_t i = 0; i < exact.size(); ++i) {
                dev = std::max(dev, std::fabs(t.a[i] + t.b[i] + t.c[i] - exact[i]));
            }
        }
        rows.push_back({"gradient_split_identity", 100, dev, 1e-12});
    }

    // J_UL - J == KL_post - KL_joint exactly, and the two-sided bound.
    {
        double dev_eq = 0.0, dev_bound = 0.0;
        for (int s = 0; s < 100; ++s) {
            Rng rng(static_cast<std::uint64_t>(s) + 1, 13);
            const std::size_t V = 2 + rng.below(5), H = 2 + rng.below(5);
            const auto m = random_model(rng, V, H);
            const auto data = random_data(rng, V);
            const auto var = random_variational(rng, V, H);
            const auto j = j_objectives(m, var, data);
            dev_eq = std::max(dev_eq, std::fabs((j.J_UL - j.J) - (j.KL_post - j.KL_joint)));
            dev_bound = std::max(dev_bound,
                                 std::fabs(j.J_UL - j.J) - (j.KL_post + j.KL_joint));
        }
        rows.push_back({"ul_gap_identity", 100, dev_eq, 1e-12});
        rows.push_back({"ul_gap_bound", 100, std::max(dev_bound, 0.0), 1e-12});
    }

    // Pinsker: 2·TV² <= KL on random discrete pairs.
    {
        double dev = 0.0;
        Rng rng(99, 14);
        for (int s = 0; s < 1000; ++s) {
            const std::size_t n = 2 + rng.below(15);
            const auto p = random_data(rng, n).q;
            const auto q = random_data(rng, n).q;
            const double tv = tv_discrete(p, q);
            const double kl = kl_discrete(p, q);
            dev = std::max(dev, 2.0 * tv * tv - kl);
        }
        rows.push_back({"pinsker", 1000, std::max(dev, 0.0), 1e-12});
    }

    // Energy-shift invariance: E + c leaves tables and gradients unchanged.
    {
        double dev = 0.0;
        for (int s = 0; s < 20; ++s) {
            Rng rng(static_cast<std::uint64_t>(s) + 1, 15);
            const std::size_t V = 2 + rng.below(5), H = 2 + rng.below(5);
            auto m = random_model(rng, V, H);
            const auto data = random_data(rng, V);
            const double c = rng.uniform(-3.0, 3.0);
            const auto g0 = exact_nll_grad(m, data);
            const auto mg0 = exact_marginals(m);
            DiscreteEBLVM shifted{m.E};
            for (std::size_t i = 0; i < shifted.E.size(); ++i) shifted.E[i] += c;
            const auto g1 = exact_nll_grad(shifted, data);
            const auto mg1 = exact_marginals(shifted);
            for (std::size_t i = 0; i < g0.size(); ++i) {
                dev = std::max(dev, std::fabs(g0[i] - g1[i]));
                dev = std::max(dev, std::fabs(mg0.p_joint[i] - mg1.p_joint[i]));
            }
            dev = std::max(dev, std::fabs((mg1.logZ + c) - mg0.logZ));
        }
        rows.push_back({"energy_shift_invariance", 20, dev, 1e-10});
    }

    bool ok = true;
    for (const auto& r : rows) {
        emit(csv, r);
        ok = ok && r.pass();
    }
    return ok;
}

}  // namespace oracle
}  // namespace bidvl
