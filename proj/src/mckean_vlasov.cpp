#include "rbm/mckean_vlasov.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <stdexcept>

#include <json.hpp>

#include "rbm/io.hpp"
#include "rbm/parallel.hpp"
#include "rbm/rng.hpp"

namespace rbm {

namespace {

constexpr std::size_t kMemberBlock = 128;

// One Picard sweep: phi(t_k) = mean over the frozen ensemble of the running
// sup of (-(X0 + W + a*lam))^+.  Members are regenerated from the seed, never
// stored.  Accumulation runs over fixed 128-member blocks in index order and
// the block sums are merged by a fixed halving tree, so phi is independent of
// the worker count.
void compute_phi(const TimeGrid& grid, uint64_t seed, std::size_t m, double a,
                 double b, double sigma, const InitialLaw& mu0,
                 const std::vector<double>& lam, std::vector<double>& phi) {
    const std::size_t M = grid.M;
    const std::size_t nb = (m + kMemberBlock - 1) / kMemberBlock;
    std::vector<std::vector<double>> blocks(nb);
    parallel_for(nb, worker_threads(), [&](std::size_t bi) {
        std::vector<double> acc(M + 1, 0.0);
        std::vector<double> dw;
        const std::size_t lo = bi * kMemberBlock;
        const std::size_t hi = std::min(m, lo + kMemberBlock);
        for (std::size_t i = lo; i < hi; ++i) {
            const double x0 = mu0.sample(seed, i);
            brownian_increments(grid, seed, i, b, sigma, dw);
            double w = x0;
            double run = 0.0;
            {
                const double neg = -(x0 + a * lam[0]);
                if (neg > run) run = neg;
            }
            acc[0] += run;
            for (std::size_t k = 1; k <= M; ++k) {
                w += dw[k - 1];
                const double neg = -(w + a * lam[k]);
                if (neg > run) run = neg;
                acc[k] += run;
            }
        }
        blocks[bi] = std::move(acc);
    });
    std::size_t live = nb;
    while (live > 1) {
        const std::size_t half = (live + 1) / 2;
        for (std::size_t p = 0; p + half < live; ++p) {
            auto& d = blocks[p];
            const auto& s = blocks[p + half];
            for (std::size_t k = 0; k <= M; ++k) d[k] += s[k];
        }
        live = half;
    }
    phi.assign(M + 1, 0.0);
    const double inv = 1.0 / double(m);
    for (std::size_t k = 0; k <= M; ++k) phi[k] = blocks[0][k] * inv;
}

double sup_diff(const std::vector<double>& u, const std::vector<double>& v) {
    double r = 0.0;
    for (std::size_t k = 0; k < u.size(); ++k) r = std::max(r, std::abs(u[k] - v[k]));
    return r;
}

void cache_final_samples(MvSolution& sol) {
    sol.X_T.assign(sol.m, 0.0);
    sol.L_T.assign(sol.m, 0.0);
    const std::size_t nb = (sol.m + kMemberBlock - 1) / kMemberBlock;
    parallel_for(nb, worker_threads(), [&](std::size_t bi) {
        std::vector<double> X, L;
        const std::size_t lo = bi * kMemberBlock;
        const std::size_t hi = std::min(sol.m, lo + kMemberBlock);
        for (std::size_t i = lo; i < hi; ++i) {
            sol.member(i, X, L);
            sol.X_T[i] = X.back();
            sol.L_T[i] = L.back();
        }
    });
}

} // namespace

double default_damping(double a) { return a >= 0.0 ? 1.0 : 0.5; }

void MvSolution::member(std::size_t i, std::vector<double>& X,
                        std::vector<double>& L) const {
    if (i >= m) throw std::out_of_range("MvSolution::member: index out of range");
    const std::size_t M = grid.M;
    X.assign(M + 1, 0.0);
    L.assign(M + 1, 0.0);
    if (!penalized) {
        std::vector<double> dw;
        const double x0 = mu0.sample(seed, i);
        brownian_increments(grid, seed, i, b, sigma, dw);
        double w = x0;
        double run = 0.0;
        double drive = x0 + a * lambda[0];
        {
            const double neg = -drive;
            if (neg > run) run = neg;
        }
        L[0] = run;
        X[0] = drive + run;
        for (std::size_t k = 1; k <= M; ++k) {
            w += dw[k - 1];
            drive = w + a * lambda[k];
            const double neg = -drive;
            if (neg > run) run = neg;
            L[k] = run;
            X[k] = drive + run;
        }
        return;
    }
    // penalized replay: same Euler arithmetic as the forward pass, with the
    // recorded mean increments standing in for the ensemble coupling
    const uint64_t key = derive_stream(seed, STREAM_BROWNIAN);
    const double dt = grid.dt;
    const double sdt = std::sqrt(dt);
    const double bdt = b * dt;
    double y = mu0.sample(seed, i);
    double acc = 0.0;
    double z0 = 0.0, z1 = 0.0;
    X[0] = y;
    for (std::size_t k = 0; k < M; ++k) {
        double z;
        if ((k & 1) == 0) {
            normal_pair(key, i, k >> 1, z0, z1);
            z = z0;
        } else {
            z = z1;
        }
        const double g = penalty_fn(y, epsilon);
        y += (bdt + sigma * sdt * z) + g * dt + a * mean_dL[k];
        acc += g * dt;
        X[k + 1] = y;
        L[k + 1] = acc;
    }
}

double MvSolution::lambda_at(double t) const { return lambda[grid.index_of(t)]; }

MvSolution solve_nlr(double a, double b, double sigma, const InitialLaw& mu0,
                     const TimeGrid& grid, std::size_t m, double tol,
                     double damping, uint64_t seed, std::size_t max_iterations,
                     const std::vector<double>* lambda0) {
    if (!(a > -1.0))
        throw std::invalid_argument("solve_nlr: a <= -1 is the breakdown regime and is not supported");
    if (m < 1) throw std::invalid_argument("solve_nlr: need at least one ensemble member");
    if (!(tol > 0.0)) throw std::invalid_argument("solve_nlr: tol must be positive");
    if (!(damping > 0.0) || damping > 1.0)
        throw std::invalid_argument("solve_nlr: damping must lie in (0,1]");
    if (!(sigma >= 0.0)) throw std::invalid_argument("solve_nlr: sigma must be nonnegative");
    if (max_iterations < 1) max_iterations = 1;

    const std::size_t M = grid.M;
    MvSolution sol;
    sol.grid = grid;
    sol.m = m;
    sol.a = a;
    sol.b = b;
    sol.sigma = sigma;
    sol.mu0 = mu0;
    sol.seed = seed;
    sol.damping = damping;

    std::vector<double> lam(M + 1, 0.0);
    if (lambda0) {
        if (lambda0->size() != M + 1)
            throw std::invalid_argument("solve_nlr: lambda0 must have grid.M + 1 points");
        for (double v : *lambda0)
            if (!std::isfinite(v)) throw std::invalid_argument("solve_nlr: lambda0 must be finite");
        lam = *lambda0;
    }

    std::vector<double> phi;
    if (a == 0.0) {
        // the sweep does not depend on lam, so one pass lands the fixed point
        compute_phi(grid, seed, m, a, b, sigma, mu0, lam, phi);
        sol.lambda = std::move(phi);
        sol.picard_iterations = 1;
        sol.picard_residual = 0.0;
        sol.converged = true;
        cache_final_samples(sol);
        return sol;
    }

    double theta = damping;
    double res_prev = std::numeric_limits<double>::infinity();
    double res = res_prev;
    bool done = false;
    std::size_t it = 0;
    while (it < max_iterations) {
        compute_phi(grid, seed, m, a, b, sigma, mu0, lam, phi);
        ++it;
        res = sup_diff(phi, lam);
        if (res <= tol) {
            done = true;
            break;
        }
        if (res > res_prev) theta = std::max(theta * 0.5, 1.0 / 64.0);
        res_prev = res;
        for (std::size_t k = 0; k <= M; ++k)
            lam[k] = (1.0 - theta) * lam[k] + theta * phi[k];
    }
    sol.lambda = std::move(lam);
    sol.picard_iterations = it;
    sol.picard_residual = res;
    sol.damping = theta;
    sol.converged = done;
    cache_final_samples(sol);
    return sol;
}

MvSolution solve_nlr_penalized(double a, double b, double sigma,
                               const InitialLaw& mu0, const TimeGrid& grid,
                               std::size_t m, double epsilon, uint64_t seed) {
    if (!(a > -1.0))
        throw std::invalid_argument("solve_nlr_penalized: a <= -1 is the breakdown regime and is not supported");
    if (m < 1) throw std::invalid_argument("solve_nlr_penalized: need at least one ensemble member");
    if (!(sigma >= 0.0))
        throw std::invalid_argument("solve_nlr_penalized: sigma must be nonnegative");
    if (!(epsilon > 0.0))
        throw std::invalid_argument("solve_nlr_penalized: eps must be positive");
    const double dt = grid.dt;
    if (dt > epsilon * epsilon / 10.0) {
        const double need = std::ceil(10.0 * grid.T / (epsilon * epsilon));
        char msg[160];
        std::snprintf(msg, sizeof msg,
                      "solve_nlr_penalized: dt=%.3g violates dt <= eps^2/10; need at least %.0f steps",
                      dt, need);
        throw std::invalid_argument(msg);
    }

    const std::size_t M = grid.M;
    MvSolution sol;
    sol.grid = grid;
    sol.m = m;
    sol.a = a;
    sol.b = b;
    sol.sigma = sigma;
    sol.mu0 = mu0;
    sol.seed = seed;
    sol.penalized = true;
    sol.epsilon = epsilon;
    sol.picard_iterations = 0;
    sol.picard_residual = 0.0;

    const uint64_t key = derive_stream(seed, STREAM_BROWNIAN);
    const double sdt = std::sqrt(dt);
    const double bdt = b * dt;
    std::vector<double> Y(m), Lam(m, 0.0), pend(m, 0.0), g(m, 0.0);
    for (std::size_t i = 0; i < m; ++i) Y[i] = mu0.sample(seed, i);

    std::vector<double> lam(M + 1, 0.0);
    std::vector<double> mean_dL(M, 0.0);
    for (std::size_t k = 0; k < M; ++k) {
        for (std::size_t i = 0; i < m; ++i) g[i] = penalty_fn(Y[i], epsilon);
        const double dlam = (ordered_sum(g) / double(m)) * dt;
        const double dmean = a * dlam;
        if ((k & 1) == 0) {
            for (std::size_t i = 0; i < m; ++i) {
                double z0, z1;
                normal_pair(key, i, k >> 1, z0, z1);
                pend[i] = z1;
                Y[i] += (bdt + sigma * sdt * z0) + g[i] * dt + dmean;
            }
        } else {
            for (std::size_t i = 0; i < m; ++i)
                Y[i] += (bdt + sigma * sdt * pend[i]) + g[i] * dt + dmean;
        }
        for (std::size_t i = 0; i < m; ++i) Lam[i] += g[i] * dt;
        lam[k + 1] = lam[k] + dlam;
        mean_dL[k] = dlam;
    }
    sol.lambda = std::move(lam);
    sol.mean_dL = std::move(mean_dL);
    sol.X_T = std::move(Y);
    sol.L_T = std::move(Lam);
    return sol;
}

// ---- closed-form marginal ------------------------------------------------

double inv_norm_cdf(double p) {
    if (!(p > 0.0) || !(p < 1.0))
        throw std::invalid_argument("inv_norm_cdf: p must lie in (0,1)");
    // Acklam's rational initializer
    static const double pa[6] = {-3.969683028665376e+01, 2.209460984245205e+02,
                                 -2.759285104469687e+02, 1.383577518672690e+02,
                                 -3.066479806614716e+01, 2.506628277459239e+00};
    static const double pb[5] = {-5.447609879822406e+01, 1.615858368580409e+02,
                                 -1.556989798598866e+02, 6.680131188771972e+01,
                                 -1.328068155288572e+01};
    static const double pc[6] = {-7.784894002430293e-03, -3.223964580411365e-01,
                                 -2.400758277161838e+00, -2.549732539343734e+00,
                                 4.374664141464968e+00,  2.938163982698783e+00};
    static const double pd[4] = {7.784695709041462e-03, 3.224671290700398e-01,
                                 2.445134137142996e+00, 3.754408661907416e+00};
    const double plow = 0.02425;
    double x;
    if (p < plow) {
        const double q = std::sqrt(-2.0 * std::log(p));
        x = (((((pc[0] * q + pc[1]) * q + pc[2]) * q + pc[3]) * q + pc[4]) * q + pc[5]) /
            ((((pd[0] * q + pd[1]) * q + pd[2]) * q + pd[3]) * q + 1.0);
    } else if (p <= 1.0 - plow) {
        const double q = p - 0.5;
        const double r = q * q;
        x = (((((pa[0] * r + pa[1]) * r + pa[2]) * r + pa[3]) * r + pa[4]) * r + pa[5]) * q /
            (((((pb[0] * r + pb[1]) * r + pb[2]) * r + pb[3]) * r + pb[4]) * r + 1.0);
    } else {
        const double q = std::sqrt(-2.0 * std::log(1.0 - p));
        x = -(((((pc[0] * q + pc[1]) * q + pc[2]) * q + pc[3]) * q + pc[4]) * q + pc[5]) /
            ((((pd[0] * q + pd[1]) * q + pd[2]) * q + pd[3]) * q + 1.0);
    }
    // one Halley step against erfc brings this to near machine accuracy
    static const double sqrt2pi = 2.5066282746310005;
    const double e = 0.5 * std::erfc(-x / std::sqrt(2.0)) - p;
    const double u = e * sqrt2pi * std::exp(0.5 * x * x);
    x -= u / (1.0 + 0.5 * x * u);
    return x;
}

double AnalyticRbmMarginal::mean() const {
    constexpr double pi = 3.14159265358979323846;
    return sigma * std::sqrt(2.0 * t / pi);
}

double AnalyticRbmMarginal::cdf(double x) const {
    if (x < 0.0) return 0.0;
    if (t == 0.0) return 1.0;
    return std::erf(x / (sigma * std::sqrt(2.0 * t)));
}

double AnalyticRbmMarginal::quantile(double q) const {
    if (!(q >= 0.0) || !(q < 1.0))
        throw std::invalid_argument("AnalyticRbmMarginal::quantile: q must lie in [0,1)");
    if (t == 0.0 || q == 0.0) return 0.0;
    return sigma * std::sqrt(t) * inv_norm_cdf(0.5 * (1.0 + q));
}

double AnalyticRbmMarginal::sample(uint64_t seed, std::size_t i) const {
    if (t == 0.0) return 0.0;
    const double z = normal(derive_stream(seed, STREAM_ORACLE), i, 0);
    return sigma * std::sqrt(t) * std::abs(z);
}

AnalyticRbmMarginal analytic_rbm_marginal(double t, double sigma, double b) {
    if (b != 0.0)
        throw std::invalid_argument("analytic_rbm_marginal: closed form only covers b = 0");
    if (!(sigma > 0.0))
        throw std::invalid_argument("analytic_rbm_marginal: sigma must be positive");
    if (!(t >= 0.0)) throw std::invalid_argument("analytic_rbm_marginal: t must be nonnegative");
    AnalyticRbmMarginal law;
    law.t = t;
    law.sigma = sigma;
    return law;
}

double wasserstein1_vs_analytic(std::vector<double> samples,
                                const AnalyticRbmMarginal& law) {
    if (samples.empty())
        throw std::invalid_argument("wasserstein1_vs_analytic: empty sample");
    std::sort(samples.begin(), samples.end());
    const std::size_t mm = samples.size();
    double s = 0.0;
    for (std::size_t k = 0; k < mm; ++k) {
        const double q = (double(k) + 0.5) / double(mm);
        s += std::abs(samples[k] - law.quantile(q));
    }
    return s / double(mm);
}

void write_lambda_csv(const MvSolution& sol, const std::string& file) {
    std::string out = "t,lambda\n";
    out.reserve(16 + sol.grid.points() * 48);
    for (std::size_t k = 0; k < sol.grid.points(); ++k) {
        out += fmt17(sol.grid.t(k));
        out += ',';
        out += fmt17(sol.lambda[k]);
        out += '\n';
    }
    write_text_file(file, out);
}

std::string mv_summary_json(const MvSolution& sol) {
    nlohmann::json j;
    j["a"] = sol.a;
    j["b"] = sol.b;
    j["sigma"] = sol.sigma;
    j["m"] = sol.m;
    j["T"] = sol.grid.T;
    j["steps"] = sol.grid.M;
    j["iterations"] = sol.picard_iterations;
    j["residual"] = sol.picard_residual;
    j["damping"] = sol.damping;
    j["converged"] = sol.converged;
    j["penalized"] = sol.penalized;
    j["epsilon"] = sol.epsilon;
    j["seed"] = sol.seed;
    j["lambda_T"] = sol.lambda.back();
    return j.dump();
}

} // namespace rbm
