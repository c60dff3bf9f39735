#include "bidvl/nets.hpp"

#include <cmath>

namespace bidvl {

namespace {
constexpr double kHalfLog2Pi = 0.91893853320467274178;  // 0.5*ln(2*pi)

double norm2(const Tensor& t) {
    double s = 0.0;
    for (std::size_t i = 0; i < t.size(); ++i) s += t[i] * t[i];
    return std::sqrt(s);
}
}  // namespace

InitScheme parse_init_scheme(const std::string& name) {
    if (name == "kaiming-uniform") return InitScheme::KaimingUniform;
    if (name == "xavier-uniform") return InitScheme::XavierUniform;
    throw ConfigError("unknown init scheme '" + name + "'");
}

namespace {

// Fixed pseudo-random start for power iteration. A deterministic constant
// vector can land nearly orthogonal to the top singular direction and stall
// convergence; a generic direction keeps the initial overlap healthy while
// staying bitwise reproducible.
Tensor power_iteration_start(std::size_t n, std::uint64_t salt) {
    Rng rng(0x53504e49ull ^ salt, 10);
    Tensor t({n});
    double norm = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        t[i] = rng.normal();
        norm += t[i] * t[i];
    }
    norm = std::sqrt(norm);
    for (std::size_t i = 0; i < n; ++i) t[i] /= norm;
    return t;
}

}  // namespace

LinearLayer::LinearLayer(std::size_t out, std::size_t in, const std::string& name, bool sn)
    : W(Tensor({out, in}, 0.0), name + ".W"),
      b(Tensor({out}, 0.0), name + ".b"),
      use_sn(sn),
      u(power_iteration_start(out, out)),
      v_vec(power_iteration_start(in, in * 0x9e3779b9ull)) {}

Var LinearLayer::forward(Tape& tape, Var x, bool track) {
    const Tensor& xv = tape.value(x);
    if (xv.rank() != 2 || xv.dim(1) != fan_in()) {
        throw ShapeError("linear layer " + W.name + " expects width " +
                         std::to_string(fan_in()) + ", got " + shape_str(xv.shape()));
    }
    Var w = tape.leaf(W, track);
    Var out = matmul_nt(x, w);
    if (use_sn && !sn_degenerate && sigma_hat > 0.0) {
        out = scale(out, 1.0 / sigma_hat);
    }
    return add_rowvec(out, tape.leaf(b, track));
}

void LinearLayer::init(Rng& rng, InitScheme scheme) {
    const double fin = static_cast<double>(fan_in());
    const double fout = static_cast<double>(fan_out());
    const double bound = scheme == InitScheme::KaimingUniform
                             ? std::sqrt(6.0 / fin)
                             : std::sqrt(6.0 / (fin + fout));
    for (std::size_t i = 0; i < W.value.size(); ++i) W.value[i] = rng.uniform(-bound, bound);
    for (std::size_t i = 0; i < b.value.size(); ++i) b.value[i] = 0.0;

    for (std::size_t i = 0; i < u.size(); ++i) u[i] = rng.normal();
    const double un = norm2(u);
    for (std::size_t i = 0; i < u.size(); ++i) u[i] /= un;
    if (use_sn) spectral_normalize(*this, 50);
}

double spectral_normalize(LinearLayer& layer, int n_iters) {
    if (n_iters < 1) throw ContractError("spectral_normalize needs n_iters >= 1");
    const Tensor& W = layer.W.value;
    const std::size_t out = W.dim(0), in = W.dim(1);

    bool all_zero = true;
    for (std::size_t i = 0; i < W.size() && all_zero; ++i) {
        if (W[i] != 0.0) all_zero = false;
    }
    if (all_zero) {
        layer.sigma_hat = 0.0;
        layer.sn_degenerate = true;
        return 0.0;
    }
    layer.sn_degenerate = false;

    Tensor& u = layer.u;
    Tensor& v = layer.v_vec;
    for (int it = 0; it < n_iters; ++it) {
        // u <- Wv / ||Wv||
        for (std::size_t i = 0; i < out; ++i) {
            double s = 0.0;
            for (std::size_t j = 0; j < in; ++j) s += W[i * in + j] * v[j];
            u[i] = s;
        }
        const double un = norm2(u);
        if (un > 0.0) {
            for (std::size_t i = 0; i < out; ++i) u[i] /= un;
        }
        // v <- Wᵀu / ||Wᵀu||
        for (std::size_t j = 0; j < in; ++j) v[j] = 0.0;
        for (std::size_t i = 0; i < out; ++i) {
            for (std::size_t j = 0; j < in; ++j) v[j] += W[i * in + j] * u[i];
        }
        const double vn = norm2(v);
        if (vn > 0.0) {
            for (std::size_t j = 0; j < in; ++j) v[j] /= vn;
        }
    }
    double sigma = 0.0;
    for (std::size_t i = 0; i < out; ++i) {
        double s = 0.0;
        for (std::size_t j = 0; j < in; ++j) s += W[i * in + j] * v[j];
        sigma += u[i] * s;
    }
    layer.sigma_hat = sigma;
    return sigma;
}

EnergyNet::EnergyNet(const std::vector<std::size_t>& widths, const std::string& name, bool sn) {
    if (widths.size() < 2) throw ConfigError("energy net needs at least two widths");
    for (std::size_t i = 0; i + 1 < widths.size(); ++i) {
        layers.emplace_back(widths[i + 1], widths[i], name + ".l" + std::to_string(i), sn);
    }
}

Var EnergyNet::energy(Tape& tape, Var v, bool track) {
    Var x = v;
    for (std::size_t i = 0; i < layers.size(); ++i) {
        x = layers[i].forward(tape, x, track);
        if (i + 1 < layers.size()) x = relu(x);
    }
    if (tape.value(x).dim(1) != 1) throw ShapeError("energy net output must be scalar per row");
    return sum_axis(x, 1);
}

std::vector<Param*> EnergyNet::params() {
    std::vector<Param*> ps;
    for (auto& l : layers) {
        ps.push_back(&l.W);
        ps.push_back(&l.b);
    }
    return ps;
}

void EnergyNet::power_iterate(int n_iters) {
    for (auto& l : layers) {
        if (l.use_sn) spectral_normalize(l, n_iters);
    }
}

GaussianEncoder::GaussianEncoder(std::size_t d_v, const std::vector<std::size_t>& hidden,
                                 std::size_t d_h, const std::string& name)
    : head_mu(d_h, hidden.empty() ? d_v : hidden.back(), name + ".mu"),
      head_rawlv(d_h, hidden.empty() ? d_v : hidden.back(), name + ".rawlv") {
    std::size_t prev = d_v;
    for (std::size_t i = 0; i < hidden.size(); ++i) {
        trunk.emplace_back(hidden[i], prev, name + ".t" + std::to_string(i));
        prev = hidden[i];
    }
}

std::pair<Var, Var> GaussianEncoder::encode(Tape& tape, Var v, bool track) {
    Var x = v;
    for (auto& l : trunk) x = relu(l.forward(tape, x, track));
    Var mu = head_mu.forward(tape, x, track);
    Var rawlv = head_rawlv.forward(tape, x, track);
    // clamp keeps softplus out of its saturated plateau
    Var logvar = neg(softplus(clamp(rawlv, -20.0, 20.0)));
    return {mu, logvar};
}

std::vector<Param*> GaussianEncoder::params() {
    std::vector<Param*> ps;
    for (auto& l : trunk) {
        ps.push_back(&l.W);
        ps.push_back(&l.b);
    }
    ps.push_back(&head_mu.W);
    ps.push_back(&head_mu.b);
    ps.push_back(&head_rawlv.W);
    ps.push_back(&head_rawlv.b);
    return ps;
}

Generator::Generator(const std::vector<std::size_t>& widths, const std::string& name) {
    if (widths.size() < 2) throw ConfigError("generator needs at least two widths");
    for (std::size_t i = 0; i + 1 < widths.size(); ++i) {
        layers.emplace_back(widths[i + 1], widths[i], name + ".l" + std::to_string(i));
    }
}

Var Generator::generate(Tape& tape, Var h, bool track) {
    Var x = h;
    for (std::size_t i = 0; i < layers.size(); ++i) {
        x = layers[i].forward(tape, x, track);
        x = i + 1 < layers.size() ? relu(x) : tanh_op(x);
    }
    return x;
}

std::vector<Param*> Generator::params() {
    std::vector<Param*> ps;
    for (auto& l : layers) {
        ps.push_back(&l.W);
        ps.push_back(&l.b);
    }
    return ps;
}

Tensor Prior::sample(Rng& rng, std::size_t batch) const {
    Tensor t({batch, dim});
    for (std::size_t i = 0; i < t.size(); ++i) t[i] = rng.normal();
    return t;
}

Var sample_posterior(Var mu, Var logvar, Var eps) {
    return add(mu, mul(exp_op(scale(logvar, 0.5)), eps));
}

Var log_prob_diag_gaussian(Var h, Var mu, Var logvar) {
    Tape& t = *h.tape;
    const std::size_t d = t.value(h).dim(1);
    Var diff2 = square(sub(h, mu));
    Var quad = mul(diff2, exp_op(neg(logvar)));
    Var per_elem = add(scale(logvar, 0.5), scale(quad, 0.5));
    Var row = sum_axis(per_elem, 1);
    return add_scalar(neg(row), -kHalfLog2Pi * static_cast<double>(d));
}

void init_params(EnergyNet& net, std::uint64_t seed, InitScheme scheme) {
    Rng rng(seed, 7);
    for (auto& l : net.layers) l.init(rng, scheme);
}

void init_params(GaussianEncoder& net, std::uint64_t seed, InitScheme scheme) {
    Rng rng(seed, 8);
    for (auto& l : net.trunk) l.init(rng, scheme);
    net.head_mu.init(rng, scheme);
    net.head_rawlv.init(rng, scheme);
}

void init_params(Generator& net, std::uint64_t seed, InitScheme scheme) {
    Rng rng(seed, 9);
    for (auto& l : net.layers) l.init(rng, scheme);
}

}  // namespace bidvl
