#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "rbm/paths.hpp"
#include "rbm/srbm.hpp"

namespace rbm {

// Nonlinear reflected Brownian motion: single-particle dynamics whose drift
// carries the deterministic mean boundary curve lambda(t) = E Lbar(t).
//
// The Monte Carlo ensemble is virtual. Members are regenerated on demand
// from the counter-based seed and the stored lambda curve, so the solution
// object stays small even for m = 1e5. Final-time samples are cached.
struct MvSolution {
    TimeGrid grid;
    std::vector<double> lambda;   // lambda(t_k), lambda[0] == 0
    std::size_t m = 0;
    double a = 0.0;
    double b = 0.0;
    double sigma = 1.0;
    InitialLaw mu0;
    uint64_t seed = 0;
    std::size_t picard_iterations = 0;
    double picard_residual = 0.0; // sup_t |Phi(lambda) - lambda| at return
    double damping = 1.0;         // theta actually in effect at the end
    bool converged = true;
    bool penalized = false;
    double epsilon = 0.0;
    // penalized runs replay members against the recorded per-step mean
    // penalty increments (bitwise match with the forward pass)
    std::vector<double> mean_dL;
    std::vector<double> X_T; // cached member samples at the final time
    std::vector<double> L_T;

    // regenerate member i on the stored curve; X and L get grid.M + 1 points
    void member(std::size_t i, std::vector<double>& X, std::vector<double>& L) const;
    double lambda_at(double t) const;
};

// spec'd default damping: full steps for a >= 0, half steps below
double default_damping(double a);

// Picard iteration on lambda over one frozen noise ensemble.
// theta in (0,1]; the step is halved (floor 1/64) whenever the undamped
// residual ||Phi(lambda) - lambda||_inf fails to decrease. Stops when that
// residual drops to tol. a == 0 needs a single pass and is special-cased.
// lambda0 optionally overrides the zero starting curve (grid.M + 1 points);
// used by the uniqueness diagnostics, which restart from lambda0(t) = t.
MvSolution solve_nlr(double a, double b, double sigma, const InitialLaw& mu0,
                     const TimeGrid& grid, std::size_t m, double tol,
                     double damping, uint64_t seed,
                     std::size_t max_iterations = 200,
                     const std::vector<double>* lambda0 = nullptr);

// Penalized variant: synchronous Euler over the ensemble, the mean-field
// term is the running ensemble mean of the accumulated penalty.
MvSolution solve_nlr_penalized(double a, double b, double sigma,
                               const InitialLaw& mu0, const TimeGrid& grid,
                               std::size_t m, double epsilon, uint64_t seed);

// CSV export of the boundary curve, header "t,lambda"
void write_lambda_csv(const MvSolution& sol, const std::string& file);

// one-line JSON summary: parameters, iterations, residual, seed
std::string mv_summary_json(const MvSolution& sol);

// Closed-form marginal for the decoupled zero-drift case: |N(0, sigma^2 t)|.
struct AnalyticRbmMarginal {
    double t = 0.0;
    double sigma = 1.0;

    double mean() const;             // sigma * sqrt(2 t / pi)
    double cdf(double x) const;
    double quantile(double q) const; // q in [0,1)
    double sample(uint64_t seed, std::size_t i) const;
};

AnalyticRbmMarginal analytic_rbm_marginal(double t, double sigma, double b = 0.0);

// inverse standard normal cdf (Acklam initializer + one Halley correction)
double inv_norm_cdf(double p);

// W1 between an empirical sample and the analytic marginal, by the
// quantile-matching integral evaluated at sample-count midpoints
double wasserstein1_vs_analytic(std::vector<double> samples,
                                const AnalyticRbmMarginal& law);

} // namespace rbm
