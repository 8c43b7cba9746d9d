#pragma once
// Random reflection coefficients and the coupled comparison between one
// random-environment system and its homogeneous counterpart on shared noise.

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "rbm/paths.hpp"
#include "rbm/srbm.hpp"

namespace rbm {

enum class EnvFamily { uniform, two_point, truncated_gaussian };

EnvFamily env_family_from_string(const std::string& s);
std::string to_string(EnvFamily f);

// One draw of the coefficient matrix. All off-diagonal entries are i.i.d.
// with mean exactly a and support inside [-1+eps_rho, 1-eps_rho].
struct EnvironmentDraw {
    std::size_t n = 0;
    double a = 0.0;
    double half_width = 0.0;
    double eps_rho = 0.1;
    EnvFamily family = EnvFamily::uniform;
    uint64_t env_seed = 0;
    std::vector<double> rho; // n x n row-major, zero diagonal

    double off(std::size_t i, std::size_t j) const { return rho[i * n + j]; }
    // explicit reflection matrix, off-diagonal rho_ij/(n-1)
    ReflectionSpec reflection() const;
    double max_abs_offdiag() const;
    double mean_offdiag() const;
};

EnvironmentDraw sample_environment(std::size_t n, double a, double half_width,
                                   double eps_rho, EnvFamily family,
                                   uint64_t env_seed);

// JSON round trip; the matrix is stored inline for n <= 64 and regenerated
// from env_seed otherwise
std::string environment_to_json(const EnvironmentDraw& env);
EnvironmentDraw environment_from_json(const std::string& text);

struct DeltaReport {
    std::vector<double> dX_sup; // per particle sup_t |hat X_i - X_i|
    std::vector<double> dL_sup;
    std::vector<double> dL_l1;  // per particle time integral of |hat L_i - L_i|
    double max_dX_sup = 0.0;
    double max_dL_sup = 0.0;
    double max_dL_l1 = 0.0;
};

struct CoupledRun {
    SrbmSolution hat; // random coefficients
    SrbmSolution det; // homogeneous a, identical driver
    DeltaReport delta;
};

// both systems are solved on the same X0 + W (same noise_seed and X0 draw)
CoupledRun coupled_run(const EnvironmentDraw& env, const TimeGrid& grid,
                       const InitialLaw& mu0, double b, double sigma,
                       uint64_t noise_seed, double tol = 1e-10);

// one fixed environment, r independent noise draws
std::vector<SrbmSolution> quenched_replicates(const EnvironmentDraw& env,
                                              std::size_t r, uint64_t noise_seed,
                                              const TimeGrid& grid,
                                              const InitialLaw& mu0, double b,
                                              double sigma, double tol = 1e-10);

// r independent (environment, noise) pairs
std::vector<SrbmSolution> annealed_replicates(std::size_t r, uint64_t env_seed,
                                              uint64_t noise_seed, std::size_t n,
                                              double a, double half_width,
                                              double eps_rho, EnvFamily family,
                                              const TimeGrid& grid,
                                              const InitialLaw& mu0, double b,
                                              double sigma, double tol = 1e-10);

// p_ji = -rho_ij/(n-1) and back; matrices are n x n row-major
std::vector<double> routing_to_reflection(const std::vector<double>& P, std::size_t n);
std::vector<double> reflection_to_routing(const std::vector<double>& rho, std::size_t n);

} // namespace rbm
