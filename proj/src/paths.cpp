#include "rbm/paths.hpp"

#include <cmath>
#include <cstdio>
#include <deque>
#include <stdexcept>
#include <string>

#include "rbm/io.hpp"
#include "rbm/rng.hpp"

namespace rbm {

TimeGrid make_grid(double T, std::size_t M) {
    if (!(T > 0.0) || !std::isfinite(T)) throw std::invalid_argument("make_grid: horizon must be positive");
    if (M < 1) throw std::invalid_argument("make_grid: need at least one step");
    TimeGrid g;
    g.T = T;
    g.M = M;
    g.dt = T / double(M);
    return g;
}

std::size_t TimeGrid::index_of(double time) const {
    const double k = time / dt;
    const auto ki = (long long)std::llround(k);
    if (ki < 0 || (std::size_t)ki > M || std::abs(time - t((std::size_t)ki)) > 1e-9 * (T > 1 ? T : 1.0))
        throw std::invalid_argument("time " + std::to_string(time) + " is not a grid point");
    return (std::size_t)ki;
}

Path make_path(const TimeGrid& g, double fill) {
    Path p;
    p.grid = g;
    p.v.assign(g.points(), fill);
    return p;
}

void brownian_increments(const TimeGrid& grid, uint64_t seed, std::size_t particle,
                         double b, double sigma, std::vector<double>& dw) {
    const uint64_t key = derive_stream(seed, STREAM_BROWNIAN);
    const double sdt = std::sqrt(grid.dt);
    const double bdt = b * grid.dt;
    const std::size_t M = grid.M;
    dw.resize(M);
    std::size_t j = 0;
    for (; j + 1 < M; j += 2) {
        double z0, z1;
        normal_pair(key, particle, j >> 1, z0, z1);
        dw[j] = bdt + sigma * sdt * z0;
        dw[j + 1] = bdt + sigma * sdt * z1;
    }
    if (j < M) dw[j] = bdt + sigma * sdt * normal(key, particle, j);
}

BrownianEnsemble sample_brownian(const TimeGrid& grid, std::size_t n, double b,
                                 double sigma, uint64_t seed) {
    if (!(sigma > 0.0)) throw std::invalid_argument("sample_brownian: sigma must be positive");
    BrownianEnsemble e;
    e.grid = grid;
    e.n = n;
    e.b = b;
    e.sigma = sigma;
    e.seed = seed;
    e.paths.reserve(n);
    std::vector<double> dw;
    for (std::size_t i = 0; i < n; ++i) {
        brownian_increments(grid, seed, i, b, sigma, dw);
        Path p = make_path(grid);
        double w = 0.0;
        for (std::size_t k = 0; k < grid.M; ++k) {
            w += dw[k];
            p.v[k + 1] = w;
        }
        e.paths.push_back(std::move(p));
    }
    return e;
}

double sup_norm(const Path& f, double t) {
    const std::size_t k = f.grid.index_of(t);
    double m = 0.0;
    for (std::size_t j = 0; j <= k; ++j) {
        const double a = std::abs(f.v[j]);
        if (a > m) m = a;
    }
    return m;
}

double modulus(const Path& f, double t, double delta) {
    if (!(delta > 0.0)) throw std::invalid_argument("modulus: delta must be positive");
    if (delta > t) throw std::invalid_argument("modulus: delta exceeds t");
    const std::size_t kt = f.grid.index_of(t);
    const double dsteps = delta / f.grid.dt;
    const auto d = (long long)std::llround(dsteps);
    if (d < 1 || std::abs(dsteps - (double)d) > 1e-9)
        throw std::invalid_argument("modulus: delta is not a multiple of dt");

    // sliding max-min over windows of d+1 points covers exactly the pairs
    // with index distance <= d
    std::deque<std::size_t> qmax, qmin;
    double best = 0.0;
    for (std::size_t j = 0; j <= kt; ++j) {
        while (!qmax.empty() && f.v[qmax.back()] <= f.v[j]) qmax.pop_back();
        qmax.push_back(j);
        while (!qmin.empty() && f.v[qmin.back()] >= f.v[j]) qmin.pop_back();
        qmin.push_back(j);
        if (j >= (std::size_t)d) {
            const std::size_t lo = j - (std::size_t)d;
            while (qmax.front() < lo) qmax.pop_front();
            while (qmin.front() < lo) qmin.pop_front();
        }
        const double spread = f.v[qmax.front()] - f.v[qmin.front()];
        if (spread > best) best = spread;
    }
    return best;
}

double mean_all(const std::vector<double>& v) {
    if (v.empty()) throw std::invalid_argument("mean_all: empty vector");
    double s = 0.0;
    for (double x : v) s += x;
    return s / double(v.size());
}

double mean_exclude(const std::vector<double>& v, std::size_t i) {
    if (v.size() < 2) throw std::invalid_argument("mean_exclude: need at least two entries");
    if (i >= v.size()) throw std::invalid_argument("mean_exclude: index out of range");
    double s = 0.0;
    for (std::size_t j = 0; j < v.size(); ++j)
        if (j != i) s += v[j];
    return s / double(v.size() - 1);
}

void write_path_csv(const Path& f, const std::string& file) {
    std::string out = "t,value\n";
    for (std::size_t k = 0; k < f.points(); ++k) {
        out += fmt17(f.grid.t(k));
        out += ',';
        out += fmt17(f.v[k]);
        out += '\n';
    }
    write_text_file(file, out);
}

} // namespace rbm
