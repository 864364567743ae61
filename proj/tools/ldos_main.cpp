#include "ldos/errors.hpp"
#include "ldos/runner.hpp"
#include "ldos/stats.hpp"

#include "CLI11.hpp"
#include "json.hpp"

#include <omp.h>

#include <iostream>

namespace {

struct Options {
    std::string config;
    std::string profile;
    std::string first;
    std::string second;
    std::string family = "bw";
    double epsilon = 0.05;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> out_dir;
    int threads = 0;
};

int run(const Options& opt, bool oracle_only) {
    ldos::RunOptions ro;
    ro.oracle_only = oracle_only;
    ro.seed = opt.seed;
    if (opt.out_dir) {
        ro.out_dir = *opt.out_dir;
    }
    const ldos::ExperimentConfig cfg = ldos::load_config(opt.config);
    const ldos::RunManifest m = ldos::run_experiment(cfg, ro);
    for (const auto& w : m.warnings) {
        std::cerr << "warning: " << w << "\n";
    }
    std::cout << "wrote " << m.files.size() + 1 << " files to "
              << (opt.out_dir ? *opt.out_dir : cfg.output.directory.string()) << "\n"
              << "sigma*rho_E = " << m.sigma * m.level_density << ", b = " << m.bandwidth
              << ", predicted Gamma = " << m.predicted_gamma << " (" << ldos::to_string(m.regime) << ")\n";
    return 0;
}

int fit(const Options& opt) {
    const auto family = ldos::parse_family(opt.family);
    if (!family) {
        throw ldos::ConfigError("--family: expected bw or gauss");
    }
    const auto weights = ldos::read_profile_weights(opt.profile);
    const ldos::WidthFit f = ldos::fit_width(weights, *family);
    const nlohmann::json out{{"family", ldos::to_string(*family)},
                             {"width", f.width},
                             {"log_likelihood", f.log_likelihood},
                             {"degenerate", f.degenerate}};
    std::cout << out.dump(2) << "\n";
    return 0;
}

int chernoff(const Options& opt) {
    const auto p1 = ldos::read_profile_weights(opt.first);
    const auto p2 = ldos::read_profile_weights(opt.second);
    const ldos::ChernoffResult c = ldos::chernoff_lambda(p1, p2);
    const auto k = ldos::required_samples(c.lambda, opt.epsilon);
    const nlohmann::json out{{"lambda", c.lambda},
                             {"alpha_star", c.alpha},
                             {"bhattacharyya", ldos::bhattacharyya(p1, p2)},
                             {"epsilon", opt.epsilon},
                             {"k_required", k ? nlohmann::json(*k) : nlohmann::json(nullptr)}};
    std::cout << out.dump(2) << "\n";
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Two-stage phase-estimation LDOS laboratory"};
    app.require_subcommand(1);
    Options opt;
    app.add_option("--threads", opt.threads, "OpenMP threads (0 = runtime default)")->check(CLI::NonNegativeNumber);

    auto* run_cmd = app.add_subcommand("run", "Sample the circuit and run the oracles");
    auto* oracle_cmd = app.add_subcommand("oracle", "Oracle-only run (zero shots)");
    for (auto* cmd : {run_cmd, oracle_cmd}) {
        cmd->add_option("config", opt.config, "Experiment config (JSON)")->required()->check(CLI::ExistingFile);
        cmd->add_option("--seed", opt.seed, "Override circuit.seed");
        cmd->add_option("--out-dir", opt.out_dir, "Override output.directory");
    }

    auto* fit_cmd = app.add_subcommand("fit", "Maximum-likelihood width of a profile CSV");
    fit_cmd->add_option("profile", opt.profile, "Profile CSV (offset,phi,weight)")->required()->check(CLI::ExistingFile);
    fit_cmd->add_option("--family", opt.family, "bw or gauss")->check(CLI::IsMember({"bw", "gauss"}));

    auto* chernoff_cmd = app.add_subcommand("chernoff", "Chernoff coefficient and required sample size");
    chernoff_cmd->add_option("p1", opt.first, "Profile CSV")->required()->check(CLI::ExistingFile);
    chernoff_cmd->add_option("p2", opt.second, "Profile CSV")->required()->check(CLI::ExistingFile);
    chernoff_cmd->add_option("--epsilon", opt.epsilon, "Target error probability");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }
    if (opt.threads > 0) {
        omp_set_num_threads(opt.threads);
    }

    try {
        if (run_cmd->parsed()) {
            return run(opt, false);
        }
        if (oracle_cmd->parsed()) {
            return run(opt, true);
        }
        if (fit_cmd->parsed()) {
            return fit(opt);
        }
        return chernoff(opt);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return ldos::exit_code_for(e);
    }
}
