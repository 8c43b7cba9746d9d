#pragma once
// Config schema and the experiment runners behind the command-line tool.
// Every runner writes CSV artifacts plus a manifest.json into out_dir and
// is byte-deterministic for a fixed config, at any worker count.

#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace rbm {

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct RhoConfig {
    std::string family = "uniform";
    double half_width = 0.0;
    double eps_rho = 0.1;
    uint64_t env_seed = 1;
};

struct Config {
    std::string experiment;
    std::vector<std::size_t> n_list; // a scalar "n" folds into one entry
    double a = 0.0;
    bool has_a = false;
    RhoConfig rho;
    bool has_rho = false;
    double b = 0.0;
    double sigma = 1.0;
    double T = 1.0;
    std::size_t steps = 1000;
    std::size_t ensemble = 10000;
    std::size_t replications = 100;
    std::vector<double> epsilon_list; // scalar "epsilon" folds in
    double tol = 0.0;    // 0 picks the per-solver default
    double damping = 0.0; // 0 picks default_damping(a)
    uint64_t seed = 1;
    std::string out_dir = "out";
    uint64_t config_hash = 0; // canonical hash, out_dir excluded
};

// strict: unknown keys, wrong types, and out-of-range values all throw
Config parse_config(const std::string& json_text);
Config load_config_file(const std::string& path);

// runs cfg.experiment; 0 on success, 3 on solver failure (diagnostics are
// left in manifest.json); ConfigError propagates for the caller to map to 2
int run_experiment(const Config& cfg, bool verbose);

extern const char* const kToolVersion;

} // namespace rbm
