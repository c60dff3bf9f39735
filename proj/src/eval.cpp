#include "bidvl/eval.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

namespace bidvl {

double rmse(const Tensor& x, const Tensor& xhat) {
    if (!x.same_shape(xhat)) {
        throw ShapeError("rmse: " + shape_str(x.shape()) + " vs " + shape_str(xhat.shape()));
    }
    double s = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double d = x[i] - xhat[i];
        s += d * d;
    }
    return std::sqrt(s / static_cast<double>(x.size()));
}

Tensor energies_of(Models& m, const Tensor& v) {
    Tape tape;
    Var e = m.energy.energy(tape, tape.constant(v), /*track=*/false);
    return tape.value(e);
}

Tensor sample_generator(Models& m, std::size_t n, Rng& rng) {
    const Tensor h = m.prior.sample(rng, n);
    Tape tape;
    Var v = m.generator.generate(tape, tape.constant(h), /*track=*/false);
    return tape.value(v);
}

std::pair<Tensor, double> recon_pass(Models& m, const Tensor& test_set) {
    Tape tape;
    auto [mu, lv] = m.encoder.encode(tape, tape.constant(test_set), /*track=*/false);
    Var xhat = m.generator.generate(tape, mu, /*track=*/false);
    Tensor recon = tape.value(xhat);
    const double err = rmse(test_set, recon);
    return {std::move(recon), err};
}

double auroc(const std::vector<double>& scores_in, const std::vector<double>& scores_out) {
    if (scores_in.empty() || scores_out.empty()) {
        throw ContractError("auroc needs nonempty score sets");
    }
    double wins = 0.0;
    for (double si : scores_in) {
        for (double so : scores_out) {
            if (si > so) wins += 1.0;
            else if (si == so) wins += 0.5;
        }
    }
    return wins / (static_cast<double>(scores_in.size()) * static_cast<double>(scores_out.size()));
}

std::map<std::string, double> ood_report(Models& m, const Tensor& in_set,
                                         const std::vector<std::pair<std::string, Tensor>>& ood_sets) {
    const Tensor e_in = energies_of(m, in_set);
    std::vector<double> s_in(e_in.data(), e_in.data() + e_in.size());
    for (double& s : s_in) s = -s;

    std::map<std::string, double> out;
    for (const auto& [name, set] : ood_sets) {
        const Tensor e = energies_of(m, set);
        std::vector<double> s_out(e.data(), e.data() + e.size());
        for (double& s : s_out) s = -s;
        out[name] = auroc(s_in, s_out);
    }
    return out;
}

std::pair<std::size_t, std::vector<double>> mode_coverage(
    const Tensor& samples, const std::vector<std::pair<double, double>>& centers,
    double radius, double mass_threshold) {
    if (centers.empty()) throw ContractError("mode_coverage needs centers");
    if (samples.rank() != 2 || samples.dim(1) != 2) {
        throw ShapeError("mode_coverage expects [n×2] samples");
    }
    const std::size_t n = samples.dim(0);
    std::vector<double> mass(centers.size(), 0.0);
    if (radius > 0.0) {
        for (std::size_t i = 0; i < n; ++i) {
            const double x = samples[i * 2], y = samples[i * 2 + 1];
            std::size_t best = 0;
            double best_d2 = 1e300;
            for (std::size_t c = 0; c < centers.size(); ++c) {
                const double dx = x - centers[c].first, dy = y - centers[c].second;
                const double d2 = dx * dx + dy * dy;
                if (d2 < best_d2) {
                    best_d2 = d2;
                    best = c;
                }
            }
            if (best_d2 <= radius * radius) mass[best] += 1.0;
        }
    }
    std::size_t covered = 0;
    for (double& ms : mass) {
        ms /= static_cast<double>(n);
        if (ms >= mass_threshold) ++covered;
    }
    return {covered, mass};
}

Tensor energy_grid(Models& m, double lo, double hi, std::size_t resolution) {
    if (m.d_v != 2) throw ContractError("energy_grid supports d_v == 2 only");
    if (resolution < 2) throw ContractError("energy_grid needs resolution >= 2");
    Tensor pts({resolution * resolution, 2});
    for (std::size_t r = 0; r < resolution; ++r) {
        const double y = lo + (hi - lo) * static_cast<double>(r) / static_cast<double>(resolution - 1);
        for (std::size_t c = 0; c < resolution; ++c) {
            const double x = lo + (hi - lo) * static_cast<double>(c) / static_cast<double>(resolution - 1);
            pts[(r * resolution + c) * 2 + 0] = x;
            pts[(r * resolution + c) * 2 + 1] = y;
        }
    }
    const Tensor e = energies_of(m, pts);
    return Tensor({resolution, resolution},
                  std::vector<double>(e.data(), e.data() + e.size()));
}

void write_csv_matrix(const std::string& path, const Tensor& t) {
    if (t.rank() != 2) throw ShapeError("write_csv_matrix expects a matrix");
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw FormatError("cannot write '" + path + "'");
    out.precision(12);
    for (std::size_t r = 0; r < t.dim(0); ++r) {
        for (std::size_t c = 0; c < t.dim(1); ++c) {
            if (c) out << ",";
            out << t[r * t.dim(1) + c];
        }
        out << "\n";
    }
}

void write_pgm(const std::string& path, const Tensor& t) {
    if (t.rank() != 2) throw ShapeError("write_pgm expects a matrix");
    double lo = t[0], hi = t[0];
    for (std::size_t i = 0; i < t.size(); ++i) {
        lo = std::min(lo, t[i]);
        hi = std::max(hi, t[i]);
    }
    const double range = hi - lo;
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw FormatError("cannot write '" + path + "'");
    out << "P5\n" << t.dim(1) << " " << t.dim(0) << "\n255\n";
    for (std::size_t i = 0; i < t.size(); ++i) {
        const double v = range > 0.0 ? (t[i] - lo) / range * 255.0 : 0.0;
        out.put(static_cast<char>(static_cast<int>(std::lround(v))));
    }
}

Tensor uniform_box_noise(std::size_t n, std::size_t d, Rng& rng) {
    Tensor t({n, d});
    for (std::size_t i = 0; i < t.size(); ++i) t[i] = rng.uniform(-1.0, 1.0);
    return t;
}

}  // namespace bidvl
