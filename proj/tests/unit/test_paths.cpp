#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <stdexcept>
#include <vector>

#include "rbm/io.hpp"
#include "rbm/paths.hpp"
#include "rbm/rng.hpp"

using namespace rbm;

TEST_CASE("uniform grid layout") {
    const TimeGrid g = make_grid(1.0, 4);
    CHECK(g.M == 4);
    CHECK(g.dt == 0.25);
    CHECK(g.points() == 5);
    const double expect[5] = {0.0, 0.25, 0.5, 0.75, 1.0};
    for (std::size_t k = 0; k < 5; ++k) CHECK(g.t(k) == expect[k]);

    const TimeGrid g1 = make_grid(2.0, 1);
    CHECK(g1.t(0) == 0.0);
    CHECK(g1.t(1) == 2.0);

    CHECK_THROWS_AS(make_grid(1.0, 0), std::invalid_argument);
    CHECK_THROWS_AS(make_grid(0.0, 4), std::invalid_argument);
    CHECK_THROWS_AS(make_grid(-3.0, 4), std::invalid_argument);
}

TEST_CASE("grid point lookup") {
    const TimeGrid g = make_grid(1.0, 4);
    CHECK(g.index_of(0.0) == 0);
    CHECK(g.index_of(0.25) == 1);
    CHECK(g.index_of(1.0) == 4);
    CHECK_THROWS_AS(g.index_of(0.3), std::invalid_argument);
    CHECK_THROWS_AS(g.index_of(1.25), std::invalid_argument);
    CHECK_THROWS_AS(g.index_of(-0.25), std::invalid_argument);
}

TEST_CASE("brownian ensemble with dominant drift tracks b*t") {
    const TimeGrid g = make_grid(1.0, 16);
    const BrownianEnsemble e = sample_brownian(g, 2, 1.0, 1e-12, 7);
    for (const Path& p : e.paths) {
        CHECK(p.v[0] == 0.0);
        for (std::size_t k = 0; k <= g.M; ++k)
            CHECK(std::abs(p.v[k] - g.t(k)) < 1e-6);
    }
}

TEST_CASE("brownian terminal mean and variance match the closed form") {
    const TimeGrid g = make_grid(1.0, 16);
    const std::size_t n = 100000;

    const BrownianEnsemble e0 = sample_brownian(g, n, 0.0, 1.0, 11);
    double s = 0.0;
    for (const Path& p : e0.paths) s += p.v[g.M];
    const double mean = s / double(n);
    CHECK(std::abs(mean) <= 3.0 / std::sqrt(double(n)));

    const BrownianEnsemble e2 = sample_brownian(g, n, 0.0, 2.0, 12);
    double s1 = 0.0, s2 = 0.0;
    for (const Path& p : e2.paths) {
        s1 += p.v[g.M];
        s2 += p.v[g.M] * p.v[g.M];
    }
    const double var = s2 / double(n) - (s1 / double(n)) * (s1 / double(n));
    CHECK(std::abs(var - 4.0) <= 0.05 * 4.0);
}

TEST_CASE("brownian sampler rejects nonpositive volatility") {
    const TimeGrid g = make_grid(1.0, 4);
    CHECK_THROWS_AS(sample_brownian(g, 1, 0.0, 0.0, 1), std::invalid_argument);
    CHECK_THROWS_AS(sample_brownian(g, 1, 0.0, -1.0, 1), std::invalid_argument);
}

TEST_CASE("brownian ensembles are reproducible and extendable in n") {
    const TimeGrid g = make_grid(2.0, 37);
    const BrownianEnsemble a = sample_brownian(g, 3, 0.5, 1.3, 99);
    const BrownianEnsemble b = sample_brownian(g, 3, 0.5, 1.3, 99);
    for (std::size_t i = 0; i < 3; ++i)
        for (std::size_t k = 0; k <= g.M; ++k)
            CHECK(a.paths[i].v[k] == b.paths[i].v[k]);

    // growing the ensemble must not perturb existing particles
    const BrownianEnsemble c = sample_brownian(g, 5, 0.5, 1.3, 99);
    for (std::size_t i = 0; i < 3; ++i)
        for (std::size_t k = 0; k <= g.M; ++k)
            CHECK(a.paths[i].v[k] == c.paths[i].v[k]);

    const BrownianEnsemble d = sample_brownian(g, 3, 0.5, 1.3, 100);
    bool differs = false;
    for (std::size_t k = 0; k <= g.M && !differs; ++k)
        differs = a.paths[0].v[k] != d.paths[0].v[k];
    CHECK(differs);
}

TEST_CASE("running sup norm") {
    const TimeGrid g2 = make_grid(1.0, 2);
    Path f = make_path(g2);
    f.v = {0.0, -1.0, 0.5};
    CHECK(sup_norm(f, g2.t(2)) == 1.0);
    CHECK(sup_norm(f, g2.t(1)) == 1.0);
    CHECK(sup_norm(f, 0.0) == 0.0);

    Path z = make_path(g2, 0.0);
    CHECK(sup_norm(z, 1.0) == 0.0);

    const TimeGrid g3 = make_grid(3.0, 3);
    Path h = make_path(g3);
    h.v = {0.0, 2.0, -3.0, 1.0};
    CHECK(sup_norm(h, g3.t(3)) == 3.0);

    CHECK_THROWS_AS(sup_norm(h, 1.5), std::invalid_argument);
}

TEST_CASE("sup norm is nondecreasing in t") {
    const TimeGrid g = make_grid(1.0, 50);
    const BrownianEnsemble e = sample_brownian(g, 4, -0.3, 1.0, 5);
    for (const Path& p : e.paths) {
        double prev = 0.0;
        for (std::size_t k = 0; k <= g.M; ++k) {
            const double cur = sup_norm(p, g.t(k));
            CHECK(cur >= prev);
            prev = cur;
        }
    }
}

TEST_CASE("modulus of continuity on hand paths") {
    const TimeGrid g = make_grid(1.0, 4);
    Path lin = make_path(g);
    for (std::size_t k = 0; k <= 4; ++k) lin.v[k] = 2.0 * g.t(k);
    CHECK(modulus(lin, 1.0, 0.5) == 1.0);

    Path cst = make_path(g, 3.7);
    CHECK(modulus(cst, 1.0, 0.25) == 0.0);

    const TimeGrid g3 = make_grid(3.0, 3);
    Path f = make_path(g3);
    f.v = {0.0, 1.0, 0.0, 4.0};
    CHECK(modulus(f, 3.0, 1.0) == 4.0);

    CHECK_THROWS_AS(modulus(f, 1.0, 2.0), std::invalid_argument);
    CHECK_THROWS_AS(modulus(f, 3.0, 0.0), std::invalid_argument);
    CHECK_THROWS_AS(modulus(f, 3.0, 0.4), std::invalid_argument);
}

// brute-force pair scan; quadratic, used only as an oracle
static double modulus_scan(const Path& f, std::size_t kt, std::size_t d) {
    double best = 0.0;
    for (std::size_t i = 0; i <= kt; ++i)
        for (std::size_t j = i; j <= kt && j - i <= d; ++j)
            best = std::max(best, std::abs(f.v[i] - f.v[j]));
    return best;
}

TEST_CASE("modulus agrees with exhaustive pair scan") {
    const TimeGrid g = make_grid(1.0, 20);
    const BrownianEnsemble e = sample_brownian(g, 10, 0.0, 1.0, 21);
    for (const Path& p : e.paths) {
        CHECK(modulus(p, 1.0, g.dt) == modulus_scan(p, 20, 1));
        CHECK(modulus(p, 1.0, 3 * g.dt) == modulus_scan(p, 20, 3));
        CHECK(modulus(p, 1.0, 1.0) == modulus_scan(p, 20, 20));
        CHECK(modulus(p, 0.5, 5 * g.dt) == modulus_scan(p, 10, 5));
    }
}

TEST_CASE("modulus is nondecreasing in t and delta") {
    const TimeGrid g = make_grid(1.0, 32);
    const BrownianEnsemble e = sample_brownian(g, 3, 0.0, 1.0, 33);
    for (const Path& p : e.paths) {
        double prev = 0.0;
        for (std::size_t d = 1; d <= 32; ++d) {
            const double cur = modulus(p, 1.0, double(d) * g.dt);
            CHECK(cur >= prev);
            prev = cur;
        }
        prev = 0.0;
        for (std::size_t k = 8; k <= 32; k += 4) {
            const double cur = modulus(p, g.t(k), 8 * g.dt);
            CHECK(cur >= prev);
            prev = cur;
        }
    }
}

TEST_CASE("mean helpers") {
    const std::vector<double> v{1.0, 2.0, 3.0};
    CHECK(mean_exclude(v, 0) == 2.5);
    CHECK(mean_all(v) == 2.0);

    const std::vector<double> c{0.5, 0.5, 0.5, 0.5};
    for (std::size_t i = 0; i < c.size(); ++i) CHECK(mean_exclude(c, i) == 0.5);

    CHECK_THROWS_AS(mean_all(std::vector<double>{}), std::invalid_argument);
    CHECK_THROWS_AS(mean_exclude(std::vector<double>{1.0}, 0), std::invalid_argument);
    CHECK_THROWS_AS(mean_exclude(v, 3), std::invalid_argument);
}

TEST_CASE("excluded mean identity") {
    const uint64_t key = derive_stream(123, STREAM_ORACLE);
    std::vector<double> v(9);
    for (std::size_t trial = 0; trial < 20; ++trial) {
        for (std::size_t j = 0; j < v.size(); ++j)
            v[j] = 10.0 * (uniform01(key, trial, j) - 0.5);
        const double all = mean_all(v);
        const double n = double(v.size());
        for (std::size_t i = 0; i < v.size(); ++i) {
            const double rebuilt = ((n - 1.0) * mean_exclude(v, i) + v[i]) / n;
            CHECK(rebuilt == doctest::Approx(all).epsilon(1e-13));
        }
    }
}

TEST_CASE("path csv export") {
    const TimeGrid g = make_grid(1.0, 2);
    Path f = make_path(g);
    f.v = {0.0, 0.5, -1.0};
    std::filesystem::create_directories("unit_scratch");
    write_path_csv(f, "unit_scratch/path.csv");
    const std::string got = read_text_file("unit_scratch/path.csv");
    CHECK(got == "t,value\n0,0\n0.5,0.5\n1,-1\n");
}

TEST_CASE("counter rng basics") {
    const uint64_t key = derive_stream(1, STREAM_BROWNIAN);
    // uniforms live in the half-open unit interval, never return 0
    double lo = 1.0, hi = 0.0, s = 0.0;
    const std::size_t N = 20000;
    for (std::size_t k = 0; k < N; ++k) {
        const double u = uniform01(key, k, 0);
        lo = std::min(lo, u);
        hi = std::max(hi, u);
        s += u;
    }
    CHECK(lo > 0.0);
    CHECK(hi <= 1.0);
    CHECK(std::abs(s / double(N) - 0.5) < 0.01);

    // streams with different tags decouple
    CHECK(derive_stream(1, STREAM_BROWNIAN) != derive_stream(1, STREAM_X0));
    CHECK(derive_replication_seed(1, 0) != derive_replication_seed(1, 1));

    double m1 = 0.0, m2 = 0.0;
    for (std::size_t k = 0; k < N; ++k) {
        const double z = normal(key, k, 7);
        m1 += z;
        m2 += z * z;
    }
    m1 /= double(N);
    m2 /= double(N);
    CHECK(std::abs(m1) < 0.03);
    CHECK(std::abs(m2 - 1.0) < 0.05);
}
