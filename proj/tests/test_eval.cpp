#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <vector>

#include "bidvl/eval.hpp"

using namespace bidvl;

namespace {

void zero_params(Models& m) {
    for (Param* p : m.all_params()) {
        for (std::size_t i = 0; i < p->value.size(); ++i) p->value[i] = 0.0;
    }
}

std::string tmp_path(const std::string& name) {
    return (std::filesystem::temp_directory_path() / name).string();
}

}  // namespace

TEST_CASE("rmse closed cases") {
    Tensor a = Tensor::matrix({{1.0, 2.0}, {3.0, 4.0}});
    CHECK(rmse(a, a) == 0.0);

    Tensor b = Tensor::matrix({{2.0, 3.0}, {4.0, 5.0}});
    CHECK(rmse(a, b) == doctest::Approx(1.0).epsilon(1e-14));
    CHECK(rmse(a, b) == rmse(b, a));

    Tensor c = Tensor::matrix({{0.0}, {5.0}});
    Tensor d = Tensor::matrix({{0.0}, {0.0}});
    CHECK(rmse(c, d) == doctest::Approx(std::sqrt(12.5)).epsilon(1e-14));

    CHECK_THROWS_AS(rmse(a, c), ShapeError);
}

TEST_CASE("auroc pair counting") {
    // 2 concordant pairs, 1 discordant, 1 tie-free inversion: 3/4
    CHECK(auroc({2.0, 4.0}, {1.0, 3.0}) == doctest::Approx(0.75).epsilon(1e-14));
    CHECK(auroc({5.0, 6.0}, {1.0, 2.0}) == 1.0);
    CHECK(auroc({1.0, 2.0}, {5.0, 6.0}) == 0.0);
    CHECK(auroc({1.0, 1.0}, {1.0, 1.0}) == doctest::Approx(0.5).epsilon(1e-14));
    CHECK_THROWS_AS(auroc({}, {1.0}), ContractError);
    CHECK_THROWS_AS(auroc({1.0}, {}), ContractError);

    // complementary sets give complementary scores
    const std::vector<double> in{0.3, 1.7, -0.2, 0.9}, out{0.1, 2.0, -1.0};
    CHECK(auroc(in, out) == doctest::Approx(1.0 - auroc(out, in)).epsilon(1e-14));

    // invariant under any strictly increasing transform of the scores
    auto mono = [](std::vector<double> v) {
        for (double& x : v) x = std::atan(3.0 * x) + 0.1 * x;
        return v;
    };
    CHECK(auroc(in, out) == doctest::Approx(auroc(mono(in), mono(out))).epsilon(1e-14));
}

TEST_CASE("mode coverage") {
    const auto centers = eight_gaussian_centers();
    // one sample placed exactly on each center: all modes covered at 1/8 mass
    Tensor on_modes({8, 2});
    for (std::size_t k = 0; k < 8; ++k) {
        on_modes[k * 2 + 0] = centers[k].first;
        on_modes[k * 2 + 1] = centers[k].second;
    }
    auto [covered, mass] = mode_coverage(on_modes, centers, 0.15);
    CHECK(covered == 8);
    for (double x : mass) CHECK(x == doctest::Approx(0.125).epsilon(1e-14));

    // total collapse onto a single mode
    Tensor collapsed({100, 2});
    for (std::size_t i = 0; i < 100; ++i) {
        collapsed[i * 2 + 0] = centers[0].first;
        collapsed[i * 2 + 1] = centers[0].second;
    }
    CHECK(mode_coverage(collapsed, centers, 0.15).first == 1);

    // zero radius rejects everything
    CHECK(mode_coverage(on_modes, centers, 0.0).first == 0);

    // a cluster below the mass threshold does not count
    Tensor skew({100, 2});
    for (std::size_t i = 0; i < 100; ++i) {
        const auto& c = centers[i < 99 ? 0 : 1];
        skew[i * 2 + 0] = c.first;
        skew[i * 2 + 1] = c.second;
    }
    CHECK(mode_coverage(skew, centers, 0.15, 0.02).first == 1);
    CHECK(mode_coverage(skew, centers, 0.15, 0.01).first == 2);
}

TEST_CASE("energies and sampling at a frozen model") {
    Models m(2, 2, 3);
    zero_params(m);
    m.energy.layers.back().b.value = Tensor({1}, 1.5);  // constant energy field

    Rng rng(3, 43);
    const Tensor pts = uniform_box_noise(16, 2, rng);
    const Tensor e = energies_of(m, pts);
    CHECK(e.shape() == std::vector<std::size_t>{16});
    for (std::size_t i = 0; i < 16; ++i) CHECK(e[i] == doctest::Approx(1.5).epsilon(1e-12));

    // a zeroed generator maps all noise to the origin
    const Tensor s = sample_generator(m, 32, rng);
    CHECK(s.dim(0) == 32);
    CHECK(s.dim(1) == 2);
    for (std::size_t i = 0; i < s.size(); ++i) CHECK(s[i] == 0.0);
}

TEST_CASE("reconstruction through a zeroed generator") {
    Models m(2, 2, 9);
    zero_params(m);
    Tensor x = Tensor::matrix({{0.6, -0.8}, {0.0, 0.0}});
    auto [xhat, err] = recon_pass(m, x);
    for (std::size_t i = 0; i < xhat.size(); ++i) CHECK(xhat[i] == 0.0);
    // rmse collapses to the root mean square of the data itself
    CHECK(err == doctest::Approx(std::sqrt((0.36 + 0.64) / 4.0)).epsilon(1e-12));
}

TEST_CASE("ood report ranks data above noise for a shaped energy") {
    // hand-build a bowl: E grows with |v|, data near origin, noise far out
    Models m(2, 2, 11);
    zero_params(m);
    Rng rng(11, 43);
    Tensor in_set({64, 2}), far_set({64, 2});
    for (std::size_t i = 0; i < in_set.size(); ++i) {
        in_set[i] = 0.05 * rng.normal();
        far_set[i] = 0.9 + 0.05 * rng.uniform();
    }
    // all-positive weights make the energy monotone in each coordinate, so
    // far-out positive points sit strictly above near-origin points
    for (auto& l : m.energy.layers) l.W.value = Tensor(l.W.value.shape(), 0.05);
    m.energy.power_iterate(50);
    const auto rep = ood_report(m, in_set, {{"far", far_set}});
    CHECK(rep.at("far") > 0.95);
}

TEST_CASE("energy grid") {
    Models m(2, 2, 13);
    zero_params(m);
    m.energy.layers.back().b.value = Tensor({1}, -0.25);
    const Tensor g = energy_grid(m, -1.0, 1.0, 2);
    CHECK(g.shape() == std::vector<std::size_t>{2, 2});
    for (std::size_t i = 0; i < 4; ++i) CHECK(g[i] == doctest::Approx(-0.25).epsilon(1e-12));

    // grid entries agree with direct evaluation at the grid points
    Models m2(2, 2, 13);
    const Tensor g3 = energy_grid(m2, -1.0, 1.0, 3);
    Tensor probe({1, 2});
    probe[0] = -1.0;  // row 1, col 0 -> y = 0.0, x = -1.0
    probe[1] = 0.0;
    CHECK(g3.at(1, 0) == doctest::Approx(energies_of(m2, probe)[0]).epsilon(1e-12));

    Models m1(1, 2, 13);
    CHECK_THROWS_AS(energy_grid(m1, -1.0, 1.0, 4), ContractError);
}

TEST_CASE("csv and pgm writers") {
    const std::string csv = tmp_path("bidvl_eval.csv");
    write_csv_matrix(csv, Tensor::matrix({{1.5, -2.0}, {0.25, 3.0}}));
    std::ifstream in(csv);
    std::string l1, l2;
    std::getline(in, l1);
    std::getline(in, l2);
    CHECK(l1 == "1.5,-2");
    CHECK(l2 == "0.25,3");
    std::filesystem::remove(csv);

    const std::string pgm = tmp_path("bidvl_eval.pgm");
    write_pgm(pgm, Tensor::matrix({{0.0, 1.0}, {0.5, 1.0}}));
    std::ifstream pin(pgm, std::ios::binary);
    std::string magic;
    pin >> magic;
    CHECK(magic == "P5");
    std::size_t w, h;
    int maxval;
    pin >> w >> h >> maxval;
    CHECK(w == 2);
    CHECK(h == 2);
    CHECK(maxval == 255);
    pin.get();  // single whitespace before the raster
    unsigned char px[4];
    pin.read(reinterpret_cast<char*>(px), 4);
    CHECK(px[0] == 0);
    CHECK(px[1] == 255);
    CHECK(px[2] == 128);  // mid-range rounds to nearest
    CHECK(px[3] == 255);
    std::filesystem::remove(pgm);

    // a flat field normalizes to black rather than dividing by zero
    const std::string flat = tmp_path("bidvl_flat.pgm");
    write_pgm(flat, Tensor({2, 2}, 7.0));
    std::ifstream fin(flat, std::ios::binary);
    fin >> magic >> w >> h >> maxval;
    fin.get();
    fin.read(reinterpret_cast<char*>(px), 4);
    for (int i = 0; i < 4; ++i) CHECK(px[i] == 0);
    std::filesystem::remove(flat);
}

TEST_CASE("uniform box noise stays in the box") {
    Rng rng(17, 43);
    const Tensor n = uniform_box_noise(500, 3, rng);
    CHECK(n.dim(0) == 500);
    CHECK(n.dim(1) == 3);
    double lo = 1e9, hi = -1e9;
    for (std::size_t i = 0; i < n.size(); ++i) {
        lo = std::min(lo, n[i]);
        hi = std::max(hi, n[i]);
        CHECK(std::abs(n[i]) <= 1.0);
    }
    CHECK(lo < -0.9);  // actually fills the box
    CHECK(hi > 0.9);
}
