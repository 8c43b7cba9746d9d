// rbmlab: config-driven experiment runner for reflected particle systems
// and their mean-field limits. Every subcommand reads one JSON config and
// writes CSV artifacts plus manifest.json into the output directory.

#include <cstdio>
#include <string>

#include <CLI11.hpp>

#include "rbm/experiments.hpp"
#include "rbm/parallel.hpp"

namespace {

struct SubDesc {
    const char* name;
    const char* help;
};

constexpr SubDesc kSubs[] = {
    {"check-s", "completely-S test and spectral radius over an n grid"},
    {"simulate", "one constrained particle system run"},
    {"mv-solve", "mean-field boundary curve by damped fixed-point iteration"},
    {"penalty-sweep", "soft-boundary gap vs the exact solver over an epsilon grid"},
    {"chaos-sweep", "transport distance to the mean-field law over an n grid"},
    {"coupling-sweep", "random-coefficient coupling deltas, quenched and annealed"},
    {"bounds-audit", "pathwise boundary inequality audit over random scenarios"},
    {"jackson-map", "routing matrix to reflection coefficients and back"},
};

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"reflected particle systems lab"};
    app.set_version_flag("--version", rbm::kToolVersion);
    app.require_subcommand(1);

    std::string config_path;
    std::string out_dir;
    unsigned threads = 0;
    bool verbose = false;
    for (const SubDesc& d : kSubs) {
        CLI::App* sub = app.add_subcommand(d.name, d.help);
        sub->add_option("--config", config_path, "JSON config file")
            ->required()
            ->check(CLI::ExistingFile);
        sub->add_option("--out", out_dir, "output directory (overrides out_dir)");
        sub->add_option("--threads", threads, "worker threads, 0 = hardware count");
        sub->add_flag("--verbose", verbose, "progress notes on stderr");
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }
    const std::string sub = app.get_subcommands().front()->get_name();

    try {
        rbm::Config cfg = rbm::load_config_file(config_path);
        if (cfg.experiment.empty())
            cfg.experiment = sub;
        else if (cfg.experiment != sub)
            throw rbm::ConfigError("config: experiment '" + cfg.experiment +
                                   "' does not match subcommand '" + sub + "'");
        if (!out_dir.empty()) cfg.out_dir = out_dir;
        rbm::set_worker_threads(threads);
        return rbm::run_experiment(cfg, verbose);
    } catch (const rbm::ConfigError& e) {
        std::fprintf(stderr, "%s\n", e.what());
        return 2;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
}
