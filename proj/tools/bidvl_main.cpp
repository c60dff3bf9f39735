// bidvl: command-line driver for training, verification and evaluation.
//
// Subcommands: train, sample, recon, ood, gradcheck, oracle, eval.
// Exit codes: 0 success, 1 config/usage error, 2 numeric error,
// 3 failed verification suite.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "bidvl/data.hpp"
#include "bidvl/eval.hpp"
#include "bidvl/oracle.hpp"
#include "bidvl/train.hpp"

namespace {

using namespace bidvl;

struct CommonArgs {
    std::string config_path;
    std::string outdir = "out";
    std::vector<std::string> overrides;
    std::string checkpoint;
    int seeds = 0;
    std::size_t n = 0;
};

void add_common(CLI::App* cmd, CommonArgs& args) {
    cmd->add_option("-c,--config", args.config_path, "config file (key = value lines)");
    cmd->add_option("-o,--outdir", args.outdir, "output directory");
    cmd->add_option("--set", args.overrides, "config override key=value (repeatable)");
    cmd->add_option("--checkpoint", args.checkpoint, "checkpoint file to load");
    cmd->add_option("--seeds", args.seeds, "number of random seeds for verification suites");
    cmd->add_option("--n", args.n, "sample / evaluation set size");
}

TrainConfig resolve_config(const CommonArgs& args) {
    TrainConfig cfg = args.config_path.empty() ? TrainConfig{} : load_config_file(args.config_path);
    for (const std::string& kv : args.overrides) apply_override(cfg, kv);
    if (const char* env = std::getenv("BIDVL_SEED")) {
        try {
            cfg.seed = std::stoull(env);
        } catch (const std::exception&) {
            throw ConfigError("BIDVL_SEED is not an integer: '" + std::string(env) + "'");
        }
    }
    cfg.validate();
    return cfg;
}

DatasetSpec dataset_spec(const TrainConfig& cfg, std::uint64_t seed) {
    DatasetSpec spec;
    spec.n = cfg.dataset_n;
    spec.seed = seed;
    static const char* kinds[] = {"eight_gaussians", "two_rings", "checkerboard",
                                  "two_moons", "swiss_roll"};
    for (const char* k : kinds) {
        if (cfg.dataset == k) {
            spec.kind = k;
            return spec;
        }
    }
    // anything else is taken as a path to an IDX raster file
    spec.kind = "idx_images";
    spec.path = cfg.dataset;
    return spec;
}

Models load_models(const TrainConfig& cfg, const std::string& checkpoint, std::size_t d_v) {
    if (checkpoint.empty()) throw ConfigError("this subcommand needs --checkpoint PATH");
    Models m(d_v, cfg.d_h, cfg.seed);
    load_checkpoint(checkpoint, m.all_params());
    // sigma estimates are not serialized; re-converge them for the loaded weights
    m.energy.power_iterate(50);
    return m;
}

void write_scores_csv(const std::string& path, const std::vector<std::pair<std::string, double>>& rows) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw FormatError("cannot write '" + path + "'");
    out.precision(12);
    out << "metric,value\n";
    for (const auto& [k, v] : rows) out << k << "," << v << "\n";
}

int cmd_train(const CommonArgs& args) {
    const TrainConfig cfg = resolve_config(args);
    const Tensor dataset = make_dataset(dataset_spec(cfg, cfg.seed));
    const TrainResult res = train(cfg, dataset, args.outdir);
    std::cout << "trained " << res.iterations_run << " iterations; metrics at "
              << res.metrics_path << "; " << res.checkpoint_paths.size()
              << " checkpoints\n";
    return 0;
}

int cmd_sample(const CommonArgs& args) {
    const TrainConfig cfg = resolve_config(args);
    const Tensor dataset = make_dataset(dataset_spec(cfg, cfg.seed));
    Models m = load_models(cfg, args.checkpoint, dataset.dim(1));
    const std::size_t n = args.n ? args.n : 4096;
    Rng rng(cfg.seed, 30);
    std::filesystem::create_directories(args.outdir);
    const std::string path = args.outdir + "/samples.csv";
    write_csv_matrix(path, sample_generator(m, n, rng));
    std::cout << "wrote " << n << " samples to " << path << "\n";
    return 0;
}

int cmd_recon(const CommonArgs& args) {
    const TrainConfig cfg = resolve_config(args);
    DatasetSpec spec = dataset_spec(cfg, cfg.seed + 1);  // held-out split
    spec.n = args.n ? args.n : 1024;
    const Tensor held_out = make_dataset(spec);
    Models m = load_models(cfg, args.checkpoint, held_out.dim(1));
    auto [recon, err] = recon_pass(m, held_out);
    std::filesystem::create_directories(args.outdir);
    write_csv_matrix(args.outdir + "/recon.csv", recon);
    std::cout << "rmse," << err << "\n";
    return 0;
}

int cmd_ood(const CommonArgs& args) {
    const TrainConfig cfg = resolve_config(args);
    DatasetSpec spec = dataset_spec(cfg, cfg.seed + 1);
    spec.n = args.n ? args.n : 1024;
    const Tensor held_out = make_dataset(spec);
    Models m = load_models(cfg, args.checkpoint, held_out.dim(1));
    Rng rng(cfg.seed, 31);
    const std::vector<std::pair<std::string, Tensor>> ood_sets{
        {"uniform_noise", uniform_box_noise(spec.n, held_out.dim(1), rng)}};
    const auto report = ood_report(m, held_out, ood_sets);
    std::vector<std::pair<std::string, double>> rows;
    for (const auto& [name, auc] : report) {
        std::cout << "auroc_" << name << "," << auc << "\n";
        rows.emplace_back("auroc_" + name, auc);
    }
    std::filesystem::create_directories(args.outdir);
    write_scores_csv(args.outdir + "/ood.csv", rows);
    return 0;
}

int cmd_eval(const CommonArgs& args) {
    const TrainConfig cfg = resolve_config(args);
    const std::size_t n = args.n ? args.n : 4096;
    DatasetSpec spec = dataset_spec(cfg, cfg.seed + 1);
    spec.n = n;
    const Tensor held_out = make_dataset(spec);
    const std::size_t d_v = held_out.dim(1);
    Models m = load_models(cfg, args.checkpoint, d_v);
    std::filesystem::create_directories(args.outdir);

    Rng sample_rng(cfg.seed, 30);
    const Tensor samples = sample_generator(m, n, sample_rng);
    write_csv_matrix(args.outdir + "/samples.csv", samples);

    EvalReport report;
    report.mmd2 = mmd2_rbf(samples, held_out, KernelSpec{});
    report.rmse = recon_pass(m, held_out).second;

    Rng noise_rng(cfg.seed, 31);
    report.auroc_per_ood_set = ood_report(
        m, held_out, {{"uniform_noise", uniform_box_noise(n, d_v, noise_rng)}});

    std::vector<std::pair<std::string, double>> rows{{"mmd2", report.mmd2},
                                                     {"rmse", report.rmse}};
    for (const auto& [name, auc] : report.auroc_per_ood_set) {
        rows.emplace_back("auroc_" + name, auc);
    }
    if (cfg.dataset == "eight_gaussians") {
        auto [covered, mass] = mode_coverage(samples, eight_gaussian_centers(), 0.15);
        report.modes_covered = covered;
        report.per_mode_mass = mass;
        rows.emplace_back("modes_covered", static_cast<double>(covered));
    }
    if (d_v == 2) {
        const Tensor grid = energy_grid(m, -1.2, 1.2, 128);
        write_csv_matrix(args.outdir + "/energy_grid.csv", grid);
        write_pgm(args.outdir + "/energy_grid.pgm", grid);
    }
    write_scores_csv(args.outdir + "/report.csv", rows);
    for (const auto& [k, v] : rows) std::cout << k << "," << v << "\n";
    return 0;
}

int cmd_gradcheck(const CommonArgs& args) {
    const int seeds = args.seeds ? args.seeds : 10;
    return gradcheck_suite(seeds, std::cout) ? 0 : 3;
}

int cmd_oracle(const CommonArgs& args) {
    const int seeds = args.seeds ? args.seeds : 50;
    return oracle::run_suite(seeds, std::cout) ? 0 : 3;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"bi-level doubly variational training for energy-based latent variable models"};
    app.require_subcommand(1);

    CommonArgs args;
    struct Entry {
        const char* name;
        const char* help;
        int (*fn)(const CommonArgs&);
    };
    const Entry entries[] = {
        {"train", "run the bi-level training loop", cmd_train},
        {"sample", "draw generator samples from a checkpoint", cmd_sample},
        {"recon", "reconstruct a held-out split and report rmse", cmd_recon},
        {"ood", "out-of-distribution AUROC of the negative energy", cmd_ood},
        {"gradcheck", "finite-difference gradient verification suite", cmd_gradcheck},
        {"oracle", "exact discrete-model identity verification suite", cmd_oracle},
        {"eval", "full evaluation report from a checkpoint", cmd_eval},
    };
    int (*selected)(const CommonArgs&) = nullptr;
    const char* selected_name = "";
    for (const Entry& e : entries) {
        CLI::App* cmd = app.add_subcommand(e.name, e.help);
        add_common(cmd, args);
        cmd->callback([&selected, &selected_name, &e] {
            selected = e.fn;
            selected_name = e.name;
        });
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    try {
        return selected(args);
    } catch (const ConfigError& e) {
        std::cerr << "bidvl " << selected_name << ": config error: " << e.what() << "\n";
        return 1;
    } catch (const FormatError& e) {
        std::cerr << "bidvl " << selected_name << ": format error: " << e.what() << "\n";
        return 1;
    } catch (const NumericError& e) {
        std::cerr << "bidvl " << selected_name << ": numeric error: " << e.what() << "\n";
        return 2;
    } catch (const DomainError& e) {
        std::cerr << "bidvl " << selected_name << ": numeric error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "bidvl " << selected_name << ": error: " << e.what() << "\n";
        return 1;
    }
}
