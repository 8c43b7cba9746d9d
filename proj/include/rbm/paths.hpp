#pragma once
// Uniform time grids, sampled trajectories, and the path functionals
// (running sup-norm, modulus of continuity, inclusive/exclusive means)
// that the solvers and the bound audit are written in terms of.

#include <cstdint>
#include <string>
#include <vector>

namespace rbm {

struct TimeGrid {
    double T = 1.0;   // horizon
    std::size_t M = 1; // number of steps; M+1 grid points
    double dt = 1.0;

    double t(std::size_t k) const { return T * (double(k) / double(M)); }
    std::size_t points() const { return M + 1; }
    bool operator==(const TimeGrid& o) const { return T == o.T && M == o.M; }

    // grid index of a time value; throws if t is not a grid point
    std::size_t index_of(double time) const;
};

TimeGrid make_grid(double T, std::size_t M);

struct Path {
    TimeGrid grid;
    std::vector<double> v; // length M+1

    double operator[](std::size_t k) const { return v[k]; }
    double& operator[](std::size_t k) { return v[k]; }
    std::size_t points() const { return v.size(); }
};

Path make_path(const TimeGrid& g, double fill = 0.0);

struct BrownianEnsemble {
    TimeGrid grid;
    std::size_t n = 0;
    double b = 0.0;     // drift
    double sigma = 1.0; // volatility
    uint64_t seed = 0;
    std::vector<Path> paths;
};

// W_i(t_k) = b t_k + sigma * sum of N(0,dt) increments, one independent
// stream per (seed, particle, step); bit-identical for identical inputs
BrownianEnsemble sample_brownian(const TimeGrid& grid, std::size_t n, double b,
                                 double sigma, uint64_t seed);

// increments for one particle without materializing the ensemble; used by
// the ensemble solvers to regenerate frozen noise on the fly
void brownian_increments(const TimeGrid& grid, uint64_t seed, std::size_t particle,
                         double b, double sigma, std::vector<double>& dw);

// max |f| over grid points <= t
double sup_norm(const Path& f, double t);

// max |f(t_j) - f(t_k)| over grid pairs with |t_j - t_k| <= delta, both <= t
double modulus(const Path& f, double t, double delta);

double mean_all(const std::vector<double>& v);
double mean_exclude(const std::vector<double>& v, std::size_t i);

// CSV export: header "t,value", 17 significant digits, LF endings
void write_path_csv(const Path& f, const std::string& file);

} // namespace rbm
