#include "rbm/stats.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include <json.hpp>

#include "rbm/io.hpp"
#include "rbm/parallel.hpp"
#include "rbm/rng.hpp"

namespace rbm {

EmpiricalMeasure empirical_measure(const SrbmSolution& sol, double t) {
    const std::size_t idx = sol.grid.index_of(t);
    const std::size_t n = sol.X.size();
    EmpiricalMeasure em;
    em.t = sol.grid.t(idx);
    em.x.resize(n);
    em.l.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        em.x[i] = sol.X[i].v[idx];
        em.l[i] = sol.L[i].v[idx];
    }
    return em;
}

EmpiricalMeasure empirical_measure(const MvSolution& sol, double t) {
    const std::size_t idx = sol.grid.index_of(t);
    EmpiricalMeasure em;
    em.t = sol.grid.t(idx);
    if (idx == sol.grid.M && sol.X_T.size() == sol.m) {
        em.x = sol.X_T;
        em.l = sol.L_T;
        return em;
    }
    em.x.assign(sol.m, 0.0);
    em.l.assign(sol.m, 0.0);
    constexpr std::size_t kBlock = 128;
    const std::size_t nb = (sol.m + kBlock - 1) / kBlock;
    parallel_for(nb, worker_threads(), [&](std::size_t bi) {
        std::vector<double> X, L;
        const std::size_t lo = bi * kBlock;
        const std::size_t hi = std::min(sol.m, lo + kBlock);
        for (std::size_t i = lo; i < hi; ++i) {
            sol.member(i, X, L);
            em.x[i] = X[idx];
            em.l[i] = L[idx];
        }
    });
    return em;
}

double mean_boundary(const SrbmSolution& sol, double t) {
    const std::size_t idx = sol.grid.index_of(t);
    std::vector<double> l(sol.L.size());
    for (std::size_t i = 0; i < l.size(); ++i) l[i] = sol.L[i].v[idx];
    return ordered_sum(l) / double(l.size());
}

double mean_boundary(const MvSolution& sol, double t) { return sol.lambda_at(t); }

std::vector<double> quantile_subsample(std::vector<double> samples, std::size_t m) {
    if (samples.empty()) throw std::invalid_argument("quantile_subsample: empty sample");
    if (m < 1 || m > samples.size())
        throw std::invalid_argument("quantile_subsample: target count out of range");
    std::sort(samples.begin(), samples.end());
    if (m == samples.size()) return samples;
    std::vector<double> out(m);
    const double scale = double(samples.size()) / double(m);
    for (std::size_t k = 0; k < m; ++k) {
        std::size_t idx = std::size_t((double(k) + 0.5) * scale);
        if (idx >= samples.size()) idx = samples.size() - 1;
        out[k] = samples[idx];
    }
    return out;
}

double wasserstein1_1d(std::vector<double> u, std::vector<double> v) {
    if (u.empty() || v.empty()) throw std::invalid_argument("wasserstein1_1d: empty sample");
    const std::size_t m = std::min(u.size(), v.size());
    u = quantile_subsample(std::move(u), m);
    v = quantile_subsample(std::move(v), m);
    double s = 0.0;
    for (std::size_t k = 0; k < m; ++k) s += std::abs(u[k] - v[k]);
    return s / double(m);
}

namespace {

// shortest augmenting path assignment on a dense square cost matrix
double assignment_cost(const std::vector<double>& c, std::size_t n) {
    const double inf = std::numeric_limits<double>::infinity();
    std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0);
    std::vector<std::size_t> p(n + 1, 0), way(n + 1, 0);
    for (std::size_t i = 1; i <= n; ++i) {
        p[0] = i;
        std::size_t j0 = 0;
        std::vector<double> minv(n + 1, inf);
        std::vector<char> used(n + 1, 0);
        do {
            used[j0] = 1;
            const std::size_t i0 = p[j0];
            double delta = inf;
            std::size_t j1 = 0;
            for (std::size_t j = 1; j <= n; ++j) {
                if (used[j]) continue;
                const double cur = c[(i0 - 1) * n + (j - 1)] - u[i0] - v[j];
                if (cur < minv[j]) {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if (minv[j] < delta) {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for (std::size_t j = 0; j <= n; ++j) {
                if (used[j]) {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
        } while (p[j0] != 0);
        do {
            const std::size_t j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
        } while (j0 != 0);
    }
    double total = 0.0;
    for (std::size_t j = 1; j <= n; ++j) total += c[(p[j] - 1) * n + (j - 1)];
    return total;
}

} // namespace

double wasserstein1_2d_exact(const EmpiricalMeasure& u, const EmpiricalMeasure& v) {
    const std::size_t n = u.size();
    if (n == 0 || v.size() != n)
        throw std::invalid_argument("wasserstein1_2d_exact: need equal nonzero atom counts");
    if (n > 64) throw std::invalid_argument("wasserstein1_2d_exact: capped at 64 atoms");
    std::vector<double> c(n * n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j)
            c[i * n + j] = std::abs(u.x[i] - v.x[j]) + std::abs(u.l[i] - v.l[j]);
    return assignment_cost(c, n) / double(n);
}

double pearson(const std::vector<double>& u, const std::vector<double>& v) {
    const std::size_t n = u.size();
    if (n < 2 || v.size() != n)
        throw std::invalid_argument("pearson: need two samples of equal size >= 2");
    const double mu = ordered_sum(u) / double(n);
    const double mv = ordered_sum(v) / double(n);
    double suu = 0.0, svv = 0.0, suv = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
        const double du = u[k] - mu;
        const double dv = v[k] - mv;
        suu += du * du;
        svv += dv * dv;
        suv += du * dv;
    }
    if (suu == 0.0 || svv == 0.0) return 0.0;
    return suv / std::sqrt(suu * svv);
}

ChaosReport chaos_gap(const SrbmSolution& sol, const MvSolution& mv, double t,
                      std::size_t pair_budget) {
    if (sol.grid.M != mv.grid.M || sol.grid.T != mv.grid.T)
        throw std::invalid_argument("chaos_gap: solutions live on different grids");
    const EmpiricalMeasure en = empirical_measure(sol, t);
    const EmpiricalMeasure em = empirical_measure(mv, t);

    ChaosReport rep;
    rep.w1_x = wasserstein1_1d(en.x, em.x);
    rep.w1_l = wasserstein1_1d(en.l, em.l);

    const std::size_t n = en.size();
    if (pair_budget > 0 && n >= 2) {
        const uint64_t key = derive_stream(sol.seed, STREAM_PAIRS);
        std::vector<double> us(pair_budget), vs(pair_budget);
        for (std::size_t k = 0; k < pair_budget; ++k) {
            std::size_t i = std::size_t(uniform01(key, k, 0) * double(n));
            if (i >= n) i = n - 1;
            std::size_t j = std::size_t(uniform01(key, k, 1) * double(n - 1));
            if (j >= n - 1) j = n - 2;
            if (j >= i) ++j;
            us[k] = en.x[i];
            vs[k] = en.x[j];
        }
        rep.max_abs_corr = std::abs(pearson(us, vs));
        rep.pairs_used = pair_budget;
    }
    return rep;
}

BoundReport pathwise_bound_check(const SrbmSolution& sol, double a,
                                 const BrownianEnsemble& W) {
    const std::size_t n = sol.X.size();
    if (n == 0 || W.paths.size() != n)
        throw std::invalid_argument("pathwise_bound_check: dimension mismatch");
    if (W.grid.M != sol.grid.M || W.grid.T != sol.grid.T)
        throw std::invalid_argument("pathwise_bound_check: grid mismatch");

    const TimeGrid& g = sol.grid;
    const double T = g.T;
    const std::size_t M = g.M;

    BoundReport rep;
    rep.approximate = sol.approximate;
    rep.r_applicable = a >= 0.0;
    rep.x_applicable = std::abs(a) < 1.0;

    std::vector<double> deltas{g.dt};
    if (M >= 10) deltas.push_back(10.0 * g.dt);

    std::vector<double> LT(n), supWneg(n), supAbsW(n);
    for (std::size_t i = 0; i < n; ++i) {
        LT[i] = sol.L[i].v[M];
        double neg = 0.0, amax = 0.0;
        for (std::size_t k = 0; k <= M; ++k) {
            const double w = W.paths[i].v[k];
            if (-w > neg) neg = -w;
            if (std::abs(w) > amax) amax = std::abs(w);
        }
        supWneg[i] = neg;
        supAbsW[i] = amax;
    }
    const double meanL = ordered_sum(LT) / double(n);
    const double meanAbsW = ordered_sum(supAbsW) / double(n);

    const double ninf = -std::numeric_limits<double>::infinity();
    double worst = ninf;

    if (rep.r_applicable) {
        double v1 = ninf;
        for (std::size_t i = 0; i < n; ++i) v1 = std::max(v1, LT[i] - supWneg[i]);
        rep.viol_r1 = v1;
        double v2 = ninf;
        for (double d : deltas)
            for (std::size_t i = 0; i < n; ++i)
                v2 = std::max(v2, modulus(sol.L[i], T, d) - modulus(W.paths[i], T, d));
        rep.viol_r02 = v2;
        worst = std::max({worst, v1, v2});
    }
    if (rep.x_applicable) {
        const double ca = 1.0 / (1.0 - std::abs(a));
        rep.viol_r2 = meanL - ca * meanAbsW;
        double v1 = ninf;
        const double slack = 2.0 * std::abs(a) * ca * meanAbsW;
        for (std::size_t i = 0; i < n; ++i)
            v1 = std::max(v1, LT[i] - (supAbsW[i] + slack));
        rep.viol_x1 = v1;
        double v2 = ninf;
        std::vector<double> wmod(n);
        for (double d : deltas) {
            for (std::size_t i = 0; i < n; ++i) wmod[i] = modulus(W.paths[i], T, d);
            const double meanWmod = ordered_sum(wmod) / double(n);
            const double s = 2.0 * std::abs(a) * ca * meanWmod;
            for (std::size_t i = 0; i < n; ++i)
                v2 = std::max(v2, modulus(sol.L[i], T, d) - (wmod[i] + s));
        }
        rep.viol_x2 = v2;
        worst = std::max({worst, rep.viol_r2, v1, v2});
    }
    rep.max_violation = worst;
    return rep;
}

std::string report_csv(const std::vector<ReportRow>& rows) {
    std::string out = "metric,n,a,t,value,stderr\n";
    for (const ReportRow& r : rows) {
        out += r.metric;
        out += ',';
        out += std::to_string(r.n);
        out += ',';
        out += fmt17(r.a);
        out += ',';
        out += fmt17(r.t);
        out += ',';
        out += fmt17(r.value);
        out += ',';
        out += fmt17(r.se);
        out += '\n';
    }
    return out;
}

std::string report_json(const std::vector<ReportRow>& rows) {
    nlohmann::json arr = nlohmann::json::array();
    for (const ReportRow& r : rows) {
        nlohmann::json j;
        j["metric"] = r.metric;
        j["n"] = r.n;
        j["a"] = r.a;
        j["t"] = r.t;
        j["value"] = r.value;
        j["stderr"] = r.se;
        arr.push_back(j);
    }
    return arr.dump();
}

} // namespace rbm
