#pragma once
// Reflection matrices and the two path solvers for constrained systems in
// the orthant: the contraction fixed point (exact boundary behavior) and
// the penalty Euler scheme (soft boundary, order-epsilon undershoot).

#include <cstdint>
#include <stdexcept>
#include <vector>

#include "rbm/paths.hpp"

namespace rbm {

struct ReflectionSpec {
    enum class Kind { homogeneous, explicit_matrix };
    Kind kind = Kind::homogeneous;
    std::size_t n = 2;
    double a = 0.0;        // homogeneous off-diagonal total: R_ij = a/(n-1)
    std::vector<double> R; // row-major n x n, explicit kind only

    // off-diagonal entry of the expanded matrix
    double off(std::size_t i, std::size_t j) const {
        return kind == Kind::homogeneous ? a / double(n - 1) : R[i * n + j];
    }
};

ReflectionSpec homogeneous_matrix(std::size_t n, double a);
ReflectionSpec explicit_matrix(std::size_t n, std::vector<double> R);

// dense expansion (homogeneous kind included), row-major
std::vector<double> expand_matrix(const ReflectionSpec& spec);

// margin-LP test over every nonempty principal subset.  Homogeneous kind
// uses the closed criterion a > -1 (cross-checked against enumeration for
// n <= 6); explicit kind enumerates subsets, capped at n <= 20.
bool is_completely_s(const ReflectionSpec& spec);

// the LP enumeration itself, usable directly on any square matrix
bool is_completely_s_matrix(const std::vector<double>& R, std::size_t n);

// Perron value of |R - I|: |a| exactly for the homogeneous kind, shifted
// power iteration (relative tol 1e-10) otherwise
double spectral_radius_abs(const ReflectionSpec& spec);

struct SolverError : std::runtime_error {
    double residual;
    SolverError(const std::string& what, double res)
        : std::runtime_error(what), residual(res) {}
};

struct SrbmSolution {
    enum class Solver { contraction, penalty };
    TimeGrid grid;
    std::vector<Path> X;
    std::vector<Path> L;
    Solver solver = Solver::contraction;
    double epsilon = 0.0; // penalty only
    std::size_t iterations = 0;
    double fixed_point_residual = 0.0;
    double max_complementarity_residual = 0.0;
    double min_X = 0.0;
    bool approximate = false;
    std::vector<double> gap_history; // sup-norm change per sweep
    uint64_t seed = 0;
};

// Fixed point of L_i(t_k) = max_{j<=k} [-(z_i(t_j) + sum_{l!=i} A_il L_l(t_j))]^+
// from L = 0.  After the stopping sweep one extra reflection pass pairs X
// with the exact driver it was reflected from, which keeps min_X >= 0 and
// the complementarity residual at literal zero.
// max_iter 0 picks 10*ceil(log tol / log rho) clamped to [10, 10000].
SrbmSolution solve_srbm_contraction(const std::vector<Path>& z, const ReflectionSpec& spec,
                                    double tol = 1e-10, std::size_t max_iter = 0);

double penalty_fn(double x, double eps);

// explicit Euler for the soft-boundary system; L accumulates the penalty
SrbmSolution solve_srbm_penalty(const std::vector<double>& X0, const BrownianEnsemble& W,
                                const ReflectionSpec& spec, double eps);

// long-format CSV export, header "t,i,X,L", particles indexed from 1
void write_solution_csv(const SrbmSolution& sol, const std::string& file);

// one-line JSON summary: solver, iterations, residuals, min_X, seed, the
// caller's config hash
std::string solution_summary_json(const SrbmSolution& sol, uint64_t config_hash);

struct InitialLaw {
    enum class Kind { point, uniform, exponential };
    Kind kind = Kind::point;
    double param = 0.0; // point mass location / upper end / rate

    double sample(uint64_t seed, std::size_t i) const;
};

InitialLaw point_mass(double c);
InitialLaw uniform_law(double upper);
InitialLaw exponential_law(double rate);

enum class SolverChoice { automatic, contraction, penalty };

// z = X0 + W, then dispatch: contraction when the perron value is < 0.999,
// penalty (flagged approximate) otherwise
SrbmSolution simulate_particle_system(std::size_t n, const ReflectionSpec& spec,
                                      const InitialLaw& x0, const TimeGrid& grid,
                                      double b, double sigma, SolverChoice choice,
                                      double eps, uint64_t seed,
                                      double tol = 1e-10);

} // namespace rbm
