#include "rbm/srbm.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <string>

#include <json.hpp>

#include "rbm/io.hpp"
#include "rbm/rng.hpp"
#include "rbm/simplex.hpp"
#include "rbm/skorohod.hpp"

namespace rbm {

ReflectionSpec homogeneous_matrix(std::size_t n, double a) {
    if (n < 2) throw std::invalid_argument("homogeneous_matrix: need n >= 2");
    ReflectionSpec s;
    s.kind = ReflectionSpec::Kind::homogeneous;
    s.n = n;
    s.a = a;
    return s;
}

ReflectionSpec explicit_matrix(std::size_t n, std::vector<double> R) {
    if (n < 1 || R.size() != n * n)
        throw std::invalid_argument("explicit_matrix: matrix must be n x n");
    for (double v : R)
        if (!std::isfinite(v)) throw std::invalid_argument("explicit_matrix: entries must be finite");
    for (std::size_t i = 0; i < n; ++i) {
        if (std::abs(R[i * n + i] - 1.0) > 1e-12)
            throw std::invalid_argument("explicit_matrix: unit diagonal required");
        R[i * n + i] = 1.0;
    }
    ReflectionSpec s;
    s.kind = ReflectionSpec::Kind::explicit_matrix;
    s.n = n;
    s.R = std::move(R);
    return s;
}

std::vector<double> expand_matrix(const ReflectionSpec& spec) {
    if (spec.kind == ReflectionSpec::Kind::explicit_matrix) return spec.R;
    std::vector<double> R(spec.n * spec.n, spec.a / double(spec.n - 1));
    for (std::size_t i = 0; i < spec.n; ++i) R[i * spec.n + i] = 1.0;
    return R;
}

// margin LP for one index subset: max m s.t. (R_J x)_i >= m, 0 <= x <= 1
static double subset_margin(const std::vector<double>& R, std::size_t n,
                            const std::vector<std::size_t>& J) {
    const std::size_t s = J.size();
    // variables: x_1..x_s, u, v with m = u - v
    const std::size_t nv = s + 2;
    const std::size_t mrows = 2 * s;
    std::vector<double> A(mrows * nv, 0.0), b(mrows, 0.0), c(nv, 0.0);
    for (std::size_t r = 0; r < s; ++r) {
        for (std::size_t q = 0; q < s; ++q) A[r * nv + q] = -R[J[r] * n + J[q]];
        A[r * nv + s] = 1.0;
        A[r * nv + s + 1] = -1.0;
        b[r] = 0.0;
    }
    for (std::size_t q = 0; q < s; ++q) {
        A[(s + q) * nv + q] = 1.0;
        b[s + q] = 1.0;
    }
    c[s] = 1.0;
    c[s + 1] = -1.0;
    const LpResult res = simplex_max(A, b, c, mrows, nv);
    if (res.status != LpResult::Status::optimal)
        throw std::runtime_error("subset_margin: LP did not solve");
    return res.value;
}

bool is_completely_s_matrix(const std::vector<double>& R, std::size_t n) {
    if (n == 0 || R.size() != n * n)
        throw std::invalid_argument("is_completely_s_matrix: non-square input");
    if (n > 20) throw std::invalid_argument("is_completely_s_matrix: subset enumeration capped at n <= 20");
    std::vector<std::size_t> J;
    for (std::size_t mask = 1; mask < (std::size_t(1) << n); ++mask) {
        J.clear();
        for (std::size_t i = 0; i < n; ++i)
            if (mask & (std::size_t(1) << i)) J.push_back(i);
        if (subset_margin(R, n, J) <= 1e-9) return false;
    }
    return true;
}

bool is_completely_s(const ReflectionSpec& spec) {
    if (spec.kind == ReflectionSpec::Kind::homogeneous) {
        const bool closed = spec.a > -1.0;
        if (spec.n <= 6) {
            const bool enumerated = is_completely_s_matrix(expand_matrix(spec), spec.n);
            if (enumerated != closed)
                throw std::runtime_error("is_completely_s: closed criterion disagrees with enumeration");
        }
        return closed;
    }
    return is_completely_s_matrix(spec.R, spec.n);
}

double spectral_radius_abs(const ReflectionSpec& spec) {
    if (spec.kind == ReflectionSpec::Kind::homogeneous) return std::abs(spec.a);
    const std::size_t n = spec.n;
    std::vector<double> B(n * n); // |A| + I, the shift keeps iteration aperiodic
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j)
            B[i * n + j] = (i == j) ? 1.0 : std::abs(spec.R[i * n + j]);
    std::vector<double> v(n, 1.0), w(n);
    double est = 1.0;
    int stable = 0;
    for (std::size_t it = 0; it < 200000; ++it) {
        double mx = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            double s = 0.0;
            const double* row = &B[i * n];
            for (std::size_t j = 0; j < n; ++j) s += row[j] * v[j];
            w[i] = s;
            if (s > mx) mx = s;
        }
        if (mx == 0.0) return 0.0;
        for (std::size_t i = 0; i < n; ++i) v[i] = w[i] / mx;
        if (std::abs(mx - est) <= 1e-10 * std::max(1.0, mx)) {
            if (++stable >= 3) return mx - 1.0;
        } else {
            stable = 0;
        }
        est = mx;
    }
    return est - 1.0; // best available estimate
}

// ---- contraction solver ------------------------------------------------

SrbmSolution solve_srbm_contraction(const std::vector<Path>& z, const ReflectionSpec& spec,
                                    double tol, std::size_t max_iter) {
    const std::size_t n = z.size();
    if (n == 0) throw std::invalid_argument("solve_srbm_contraction: no driver paths");
    if (n != spec.n) throw std::invalid_argument("solve_srbm_contraction: dimension mismatch");
    const TimeGrid grid = z[0].grid;
    for (const Path& p : z) {
        if (!(p.grid == grid)) throw std::invalid_argument("solve_srbm_contraction: drivers on different grids");
        if (p.v[0] < 0.0) throw std::invalid_argument("solve_srbm_contraction: drivers must start nonnegative");
    }
    const double rho = spectral_radius_abs(spec);
    if (rho >= 1.0)
        throw std::invalid_argument(
            "solve_srbm_contraction: |R - I| has spectral radius >= 1; use the penalty solver");
    if (max_iter == 0) {
        const double r = std::max(rho, 1e-6);
        max_iter = (std::size_t)std::ceil(std::log(std::max(tol, 1e-300)) / std::log(r)) * 10;
        max_iter = std::clamp<std::size_t>(max_iter, 10, 10000);
    }

    const std::size_t K = grid.points();
    const bool homog = spec.kind == ReflectionSpec::Kind::homogeneous;
    const double coef = homog ? spec.a / double(n - 1) : 0.0;

    std::vector<std::vector<double>> L(n, std::vector<double>(K, 0.0));
    std::vector<std::vector<double>> Lnew(n, std::vector<double>(K, 0.0));
    std::vector<std::vector<double>> drive(n, std::vector<double>(K, 0.0));
    std::vector<double> S(K);

    SrbmSolution sol;
    sol.grid = grid;
    sol.solver = SrbmSolution::Solver::contraction;

    double gap = 0.0;
    bool converged = false;
    std::size_t iters = 0;
    while (iters < max_iter) {
        ++iters;
        if (homog) {
            std::fill(S.begin(), S.end(), 0.0);
            for (std::size_t i = 0; i < n; ++i)
                for (std::size_t k = 0; k < K; ++k) S[k] += L[i][k];
            for (std::size_t i = 0; i < n; ++i)
                for (std::size_t k = 0; k < K; ++k)
                    drive[i][k] = z[i].v[k] + coef * (S[k] - L[i][k]);
        } else {
            for (std::size_t i = 0; i < n; ++i) {
                std::fill(drive[i].begin(), drive[i].end(), 0.0);
                for (std::size_t l = 0; l < n; ++l) {
                    if (l == i) continue;
                    const double a_il = spec.R[i * n + l];
                    if (a_il == 0.0) continue;
                    const double* Ll = L[l].data();
                    double* d = drive[i].data();
                    for (std::size_t k = 0; k < K; ++k) d[k] += a_il * Ll[k];
                }
                for (std::size_t k = 0; k < K; ++k) drive[i][k] += z[i].v[k];
            }
        }
        gap = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            double run = 0.0;
            const double* d = drive[i].data();
            double* ln = Lnew[i].data();
            const double* lo = L[i].data();
            for (std::size_t k = 0; k < K; ++k) {
                const double neg = -d[k];
                if (neg > run) run = neg;
                ln[k] = run;
                const double diff = std::abs(run - lo[k]);
                if (diff > gap) gap = diff;
            }
        }
        sol.gap_history.push_back(gap);
        std::swap(L, Lnew);
        if (gap <= tol) { converged = true; break; }
    }
    if (!converged)
        throw SolverError("solve_srbm_contraction: no convergence after " +
                              std::to_string(iters) + " sweeps (residual " +
                              std::to_string(gap) + ")",
                          gap);

    // final pass: rebuild the drivers from the converged L and reflect once
    // more, so each (X_i, L_i) is literally a 1D Skorohod pair of its driver
    if (homog) {
        std::fill(S.begin(), S.end(), 0.0);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t k = 0; k < K; ++k) S[k] += L[i][k];
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t k = 0; k < K; ++k)
                drive[i][k] = z[i].v[k] + coef * (S[k] - L[i][k]);
    } else {
        for (std::size_t i = 0; i < n; ++i) {
            std::fill(drive[i].begin(), drive[i].end(), 0.0);
            for (std::size_t l = 0; l < n; ++l) {
                if (l == i) continue;
                const double a_il = spec.R[i * n + l];
                if (a_il == 0.0) continue;
                for (std::size_t k = 0; k < K; ++k) drive[i][k] += a_il * L[l][k];
            }
            for (std::size_t k = 0; k < K; ++k) drive[i][k] += z[i].v[k];
        }
    }

    sol.X.reserve(n);
    sol.L.reserve(n);
    double minx = 0.0, maxres = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        Path xi = make_path(grid), li = make_path(grid);
        reflect_values(drive[i], xi.v, li.v);
        for (double x : xi.v)
            if (x < minx) minx = x;
        double res = 0.0;
        for (std::size_t k = 1; k < K; ++k) res += xi.v[k] * (li.v[k] - li.v[k - 1]);
        if (std::abs(res) > maxres) maxres = std::abs(res);
        sol.X.push_back(std::move(xi));
        sol.L.push_back(std::move(li));
    }
    sol.iterations = iters;
    sol.fixed_point_residual = gap;
    sol.min_X = minx;
    sol.max_complementarity_residual = maxres;
    sol.approximate = false;
    return sol;
}

// ---- penalty solver ----------------------------------------------------

double penalty_fn(double x, double eps) {
    if (!(eps > 0.0)) throw std::invalid_argument("penalty_fn: eps must be positive");
    if (x <= -eps) return 1.0 / eps;
    if (x < 0.0) return -x / (eps * eps);
    return 0.0;
}

SrbmSolution solve_srbm_penalty(const std::vector<double>& X0, const BrownianEnsemble& W,
                                const ReflectionSpec& spec, double eps) {
    const std::size_t n = W.n;
    if (X0.size() != n) throw std::invalid_argument("solve_srbm_penalty: X0 size mismatch");
    if (n != spec.n) throw std::invalid_argument("solve_srbm_penalty: dimension mismatch");
    if (!(eps > 0.0)) throw std::invalid_argument("solve_srbm_penalty: eps must be positive");
    for (double x : X0)
        if (x < 0.0) throw std::invalid_argument("solve_srbm_penalty: X0 must be nonnegative");
    const TimeGrid grid = W.grid;
    const double dt = grid.dt;
    if (dt > eps * eps / 10.0) {
        const double need = std::ceil(10.0 * grid.T / (eps * eps));
        char msg[160];
        std::snprintf(msg, sizeof msg,
                      "solve_srbm_penalty: dt=%.3g violates dt <= eps^2/10; need at least %.0f steps",
                      dt, need);
        throw std::invalid_argument(msg);
    }

    const std::size_t K = grid.points();
    const bool homog = spec.kind == ReflectionSpec::Kind::homogeneous;

    SrbmSolution sol;
    sol.grid = grid;
    sol.solver = SrbmSolution::Solver::penalty;
    sol.epsilon = eps;
    sol.approximate = true;
    sol.X.reserve(n);
    sol.L.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        Path y = make_path(grid);
        y.v[0] = X0[i];
        sol.X.push_back(std::move(y));
        sol.L.push_back(make_path(grid));
    }

    std::vector<double> p(n);
    double minx = 0.0;
    for (double x : X0)
        if (x < minx) minx = x;
    for (std::size_t k = 0; k + 1 < K; ++k) {
        double psum = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            p[i] = penalty_fn(sol.X[i].v[k], eps);
            psum += p[i];
        }
        for (std::size_t i = 0; i < n; ++i) {
            double inter;
            if (homog) {
                inter = (spec.a / double(n - 1)) * (psum - p[i]);
            } else {
                inter = 0.0;
                for (std::size_t l = 0; l < n; ++l)
                    if (l != i) inter += spec.R[i * n + l] * p[l];
            }
            const double dW = W.paths[i].v[k + 1] - W.paths[i].v[k];
            const double y = sol.X[i].v[k] + dW + dt * (p[i] + inter);
            sol.X[i].v[k + 1] = y;
            sol.L[i].v[k + 1] = sol.L[i].v[k] + dt * p[i];
            if (y < minx) minx = y;
        }
    }
    sol.min_X = minx;
    sol.iterations = grid.M;
    sol.fixed_point_residual = 0.0;
    double maxres = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        double res = 0.0;
        for (std::size_t k = 1; k < K; ++k)
            res += sol.X[i].v[k] * (sol.L[i].v[k] - sol.L[i].v[k - 1]);
        if (std::abs(res) > maxres) maxres = std::abs(res);
    }
    sol.max_complementarity_residual = maxres;
    return sol;
}

// ---- front door ---------------------------------------------------------

double InitialLaw::sample(uint64_t seed, std::size_t i) const {
    switch (kind) {
        case Kind::point:
            return param;
        case Kind::uniform:
            return param * uniform01(derive_stream(seed, STREAM_X0), i, 0);
        case Kind::exponential:
            return -std::log(uniform01(derive_stream(seed, STREAM_X0), i, 0)) / param;
    }
    return 0.0;
}

InitialLaw point_mass(double c) {
    if (c < 0.0) throw std::invalid_argument("point_mass: location must be nonnegative");
    return {InitialLaw::Kind::point, c};
}

InitialLaw uniform_law(double upper) {
    if (!(upper > 0.0)) throw std::invalid_argument("uniform_law: upper end must be positive");
    return {InitialLaw::Kind::uniform, upper};
}

InitialLaw exponential_law(double rate) {
    if (!(rate > 0.0)) throw std::invalid_argument("exponential_law: rate must be positive");
    return {InitialLaw::Kind::exponential, rate};
}

SrbmSolution simulate_particle_system(std::size_t n, const ReflectionSpec& spec,
                                      const InitialLaw& x0, const TimeGrid& grid,
                                      double b, double sigma, SolverChoice choice,
                                      double eps, uint64_t seed, double tol) {
    if (n != spec.n && !(n == 1 && spec.n == 2))
        throw std::invalid_argument("simulate_particle_system: n must match the reflection spec");
    BrownianEnsemble W = sample_brownian(grid, n, b, sigma, seed);
    std::vector<double> X0(n);
    for (std::size_t i = 0; i < n; ++i) X0[i] = x0.sample(seed, i);

    SolverChoice pick = choice;
    if (pick == SolverChoice::automatic)
        pick = (n == 1 || spectral_radius_abs(spec) < 0.999) ? SolverChoice::contraction
                                                             : SolverChoice::penalty;

    if (pick == SolverChoice::contraction) {
        std::vector<Path> z;
        z.reserve(n);
        for (std::size_t i = 0; i < n; ++i) {
            Path zi = W.paths[i];
            for (double& v : zi.v) v += X0[i];
            z.push_back(std::move(zi));
        }
        SrbmSolution sol;
        if (n == 1) {
            // degenerate system: plain 1D reflection of the driver
            sol.grid = grid;
            sol.solver = SrbmSolution::Solver::contraction;
            auto [x, l] = reflect_1d(z[0]);
            sol.min_X = 0.0;
            for (double v : x.v)
                if (v < sol.min_X) sol.min_X = v;
            sol.X.push_back(std::move(x));
            sol.L.push_back(std::move(l));
            sol.iterations = 1;
        } else {
            sol = solve_srbm_contraction(z, spec, tol);
        }
        sol.seed = seed;
        return sol;
    }
    SrbmSolution sol = solve_srbm_penalty(X0, W, spec, eps);
    sol.seed = seed;
    return sol;
}

void write_solution_csv(const SrbmSolution& sol, const std::string& file) {
    const std::size_t n = sol.X.size();
    std::string out = "t,i,X,L\n";
    out.reserve(16 + sol.grid.points() * n * 48);
    for (std::size_t k = 0; k < sol.grid.points(); ++k) {
        const std::string ts = fmt17(sol.grid.t(k));
        for (std::size_t i = 0; i < n; ++i) {
            out += ts;
            out += ',';
            out += std::to_string(i + 1);
            out += ',';
            out += fmt17(sol.X[i][k]);
            out += ',';
            out += fmt17(sol.L[i][k]);
            out += '\n';
        }
    }
    write_text_file(file, out);
}

std::string solution_summary_json(const SrbmSolution& sol, uint64_t config_hash) {
    nlohmann::json j;
    j["solver"] = sol.solver == SrbmSolution::Solver::contraction ? "contraction" : "penalty";
    j["iterations"] = sol.iterations;
    j["fixed_point_residual"] = sol.fixed_point_residual;
    j["max_complementarity_residual"] = sol.max_complementarity_residual;
    j["min_X"] = sol.min_X;
    j["approximate"] = sol.approximate;
    j["epsilon"] = sol.epsilon;
    j["seed"] = sol.seed;
    j["config_hash"] = hex64(config_hash);
    return j.dump();
}

} // namespace rbm
