#include "rbm/environment.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include <json.hpp>

#include "rbm/parallel.hpp"
#include "rbm/rng.hpp"

namespace rbm {

EnvFamily env_family_from_string(const std::string& s) {
    if (s == "uniform") return EnvFamily::uniform;
    if (s == "two-point" || s == "two_point") return EnvFamily::two_point;
    if (s == "truncated-gaussian" || s == "truncated_gaussian")
        return EnvFamily::truncated_gaussian;
    throw std::invalid_argument("unknown coefficient family: " + s);
}

std::string to_string(EnvFamily f) {
    switch (f) {
        case EnvFamily::uniform: return "uniform";
        case EnvFamily::two_point: return "two-point";
        case EnvFamily::truncated_gaussian: return "truncated-gaussian";
    }
    return "uniform";
}

ReflectionSpec EnvironmentDraw::reflection() const {
    // a constant draw is the homogeneous matrix; returning it in that form
    // keeps the degenerate coupled comparison exactly tight
    bool constant = true;
    for (std::size_t i = 0; i < n && constant; ++i)
        for (std::size_t j = 0; j < n; ++j)
            if (i != j && rho[i * n + j] != a) {
                constant = false;
                break;
            }
    if (constant) return homogeneous_matrix(n, a);

    std::vector<double> R(n * n, 0.0);
    const double inv = 1.0 / double(n - 1);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j)
            R[i * n + j] = (i == j) ? 1.0 : rho[i * n + j] * inv;
    }
    return explicit_matrix(n, std::move(R));
}

double EnvironmentDraw::max_abs_offdiag() const {
    double mx = 0.0;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j)
            if (i != j) mx = std::max(mx, std::abs(rho[i * n + j]));
    return mx;
}

double EnvironmentDraw::mean_offdiag() const {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j)
            if (i != j) s += rho[i * n + j];
    return s / double(n * (n - 1));
}

EnvironmentDraw sample_environment(std::size_t n, double a, double half_width,
                                   double eps_rho, EnvFamily family,
                                   uint64_t env_seed) {
    if (n < 2) throw std::invalid_argument("sample_environment: need n >= 2");
    if (!(eps_rho > 0.0)) throw std::invalid_argument("sample_environment: eps_rho must be positive");
    if (!(half_width >= 0.0))
        throw std::invalid_argument("sample_environment: half_width must be nonnegative");
    const double lo = -1.0 + eps_rho;
    const double hi = 1.0 - eps_rho;
    if (a - half_width < lo || a + half_width > hi)
        throw std::invalid_argument(
            "sample_environment: coefficient support leaves [-1+eps_rho, 1-eps_rho]");

    EnvironmentDraw env;
    env.n = n;
    env.a = a;
    env.half_width = half_width;
    env.eps_rho = eps_rho;
    env.family = family;
    env.env_seed = env_seed;
    env.rho.assign(n * n, 0.0);

    const uint64_t key = derive_stream(env_seed, STREAM_ENV);
    const double h = half_width;
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            if (i == j) continue;
            const uint64_t id = uint64_t(i) * n + j;
            double v = a;
            if (h > 0.0) {
                switch (family) {
                    case EnvFamily::uniform: {
                        const double u = uniform01(key, id, 0);
                        v = a + h * (2.0 * u - 1.0);
                        break;
                    }
                    case EnvFamily::two_point: {
                        const double u = uniform01(key, id, 0);
                        v = (u <= 0.5) ? a - h : a + h;
                        break;
                    }
                    case EnvFamily::truncated_gaussian: {
                        // symmetric truncation keeps the mean at a exactly
                        const double sd = 0.5 * h;
                        for (uint64_t attempt = 0;; ++attempt) {
                            const double d = sd * normal(key, id, attempt);
                            if (std::abs(d) <= h) {
                                v = a + d;
                                break;
                            }
                        }
                        break;
                    }
                }
            }
            env.rho[i * n + j] = v;
        }
    }
    return env;
}

std::string environment_to_json(const EnvironmentDraw& env) {
    nlohmann::json j;
    j["n"] = env.n;
    j["family"] = to_string(env.family);
    j["a"] = env.a;
    j["half_width"] = env.half_width;
    j["eps_rho"] = env.eps_rho;
    j["env_seed"] = env.env_seed;
    if (env.n <= 64) {
        nlohmann::json rows = nlohmann::json::array();
        for (std::size_t i = 0; i < env.n; ++i) {
            nlohmann::json row = nlohmann::json::array();
            for (std::size_t jj = 0; jj < env.n; ++jj) row.push_back(env.rho[i * env.n + jj]);
            rows.push_back(std::move(row));
        }
        j["rho"] = std::move(rows);
    }
    return j.dump(2);
}

EnvironmentDraw environment_from_json(const std::string& text) {
    const nlohmann::json j = nlohmann::json::parse(text);
    const std::size_t n = j.at("n").get<std::size_t>();
    const EnvFamily family = env_family_from_string(j.at("family").get<std::string>());
    const double a = j.at("a").get<double>();
    const double h = j.at("half_width").get<double>();
    const double eps = j.at("eps_rho").get<double>();
    const uint64_t seed = j.at("env_seed").get<uint64_t>();
    EnvironmentDraw env = sample_environment(n, a, h, eps, family, seed);
    if (j.contains("rho")) {
        const auto& rows = j.at("rho");
        if (rows.size() != n) throw std::invalid_argument("environment_from_json: rho shape mismatch");
        for (std::size_t i = 0; i < n; ++i) {
            const auto& row = rows[i];
            if (row.size() != n) throw std::invalid_argument("environment_from_json: rho shape mismatch");
            for (std::size_t jj = 0; jj < n; ++jj) env.rho[i * n + jj] = row[jj].get<double>();
        }
    }
    return env;
}

namespace {

std::vector<Path> shared_driver(const TimeGrid& grid, std::size_t n,
                                const InitialLaw& mu0, double b, double sigma,
                                uint64_t noise_seed) {
    std::vector<Path> z(n);
    std::vector<double> dw;
    for (std::size_t i = 0; i < n; ++i) {
        const double x0 = mu0.sample(noise_seed, i);
        brownian_increments(grid, noise_seed, i, b, sigma, dw);
        Path p = make_path(grid);
        p.v[0] = x0;
        double w = x0;
        for (std::size_t k = 1; k <= grid.M; ++k) {
            w += dw[k - 1];
            p.v[k] = w;
        }
        z[i] = std::move(p);
    }
    return z;
}

} // namespace

CoupledRun coupled_run(const EnvironmentDraw& env, const TimeGrid& grid,
                       const InitialLaw& mu0, double b, double sigma,
                       uint64_t noise_seed, double tol) {
    const std::size_t n = env.n;
    const std::vector<Path> z = shared_driver(grid, n, mu0, b, sigma, noise_seed);

    CoupledRun run;
    run.hat = solve_srbm_contraction(z, env.reflection(), tol);
    run.det = solve_srbm_contraction(z, homogeneous_matrix(n, env.a), tol);
    run.hat.seed = noise_seed;
    run.det.seed = noise_seed;

    DeltaReport& d = run.delta;
    d.dX_sup.assign(n, 0.0);
    d.dL_sup.assign(n, 0.0);
    d.dL_l1.assign(n, 0.0);
    const std::size_t M = grid.M;
    for (std::size_t i = 0; i < n; ++i) {
        double sx = 0.0, sl = 0.0, l1 = 0.0;
        for (std::size_t k = 0; k <= M; ++k) {
            const double ex = std::abs(run.hat.X[i].v[k] - run.det.X[i].v[k]);
            const double el = std::abs(run.hat.L[i].v[k] - run.det.L[i].v[k]);
            sx = std::max(sx, ex);
            sl = std::max(sl, el);
            // trapezoid weights: half at the two ends
            l1 += (k == 0 || k == M) ? 0.5 * el : el;
        }
        d.dX_sup[i] = sx;
        d.dL_sup[i] = sl;
        d.dL_l1[i] = l1 * grid.dt;
        d.max_dX_sup = std::max(d.max_dX_sup, sx);
        d.max_dL_sup = std::max(d.max_dL_sup, sl);
        d.max_dL_l1 = std::max(d.max_dL_l1, d.dL_l1[i]);
    }
    return run;
}

std::vector<SrbmSolution> quenched_replicates(const EnvironmentDraw& env,
                                              std::size_t r, uint64_t noise_seed,
                                              const TimeGrid& grid,
                                              const InitialLaw& mu0, double b,
                                              double sigma, double tol) {
    if (r < 1) throw std::invalid_argument("quenched_replicates: need r >= 1");
    const ReflectionSpec spec = env.reflection();
    std::vector<SrbmSolution> out(r);
    parallel_for(r, worker_threads(), [&](std::size_t k) {
        const uint64_t sk = derive_replication_seed(noise_seed, k);
        const std::vector<Path> z = shared_driver(grid, env.n, mu0, b, sigma, sk);
        out[k] = solve_srbm_contraction(z, spec, tol);
        out[k].seed = sk;
    });
    return out;
}

std::vector<SrbmSolution> annealed_replicates(std::size_t r, uint64_t env_seed,
                                              uint64_t noise_seed, std::size_t n,
                                              double a, double half_width,
                                              double eps_rho, EnvFamily family,
                                              const TimeGrid& grid,
                                              const InitialLaw& mu0, double b,
                                              double sigma, double tol) {
    if (r < 1) throw std::invalid_argument("annealed_replicates: need r >= 1");
    std::vector<SrbmSolution> out(r);
    parallel_for(r, worker_threads(), [&](std::size_t k) {
        const EnvironmentDraw env = sample_environment(
            n, a, half_width, eps_rho, family, derive_replication_seed(env_seed, k));
        const uint64_t sk = derive_replication_seed(noise_seed, k);
        const std::vector<Path> z = shared_driver(grid, n, mu0, b, sigma, sk);
        out[k] = solve_srbm_contraction(z, env.reflection(), tol);
        out[k].seed = sk;
    });
    return out;
}

std::vector<double> routing_to_reflection(const std::vector<double>& P, std::size_t n) {
    if (n < 2 || P.size() != n * n)
        throw std::invalid_argument("routing_to_reflection: matrix must be n x n");
    for (std::size_t i = 0; i < n; ++i) {
        if (P[i * n + i] != 0.0)
            throw std::invalid_argument("routing_to_reflection: diagonal must be zero");
        double row = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
            const double p = P[i * n + j];
            if (!(p >= 0.0))
                throw std::invalid_argument("routing_to_reflection: entries must be nonnegative");
            row += p;
        }
        if (row > 1.0 + 1e-12)
            throw std::invalid_argument("routing_to_reflection: row sums must not exceed 1");
    }
    std::vector<double> rho(n * n, 0.0);
    const double scale = double(n - 1);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j)
            if (i != j) rho[i * n + j] = -scale * P[j * n + i];
    return rho;
}

std::vector<double> reflection_to_routing(const std::vector<double>& rho, std::size_t n) {
    if (n < 2 || rho.size() != n * n)
        throw std::invalid_argument("reflection_to_routing: matrix must be n x n");
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j)
            if (i != j && rho[i * n + j] > 0.0)
                throw std::invalid_argument(
                    "reflection_to_routing: positive coefficients have no routing interpretation");
    std::vector<double> P(n * n, 0.0);
    // divide rather than multiply by a precomputed reciprocal: the division
    // undoes routing_to_reflection exactly, so the round trip is the identity
    const double scale = double(n - 1);
    for (std::size_t j = 0; j < n; ++j) {
        double row = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            if (i == j) continue;
            const double p = -rho[i * n + j] / scale;
            P[j * n + i] = p;
            row += p;
        }
        if (row > 1.0 + 1e-12)
            throw std::invalid_argument("reflection_to_routing: routing rows would exceed 1");
    }
    return P;
}

} // namespace rbm
