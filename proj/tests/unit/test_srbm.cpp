#include <doctest.h>

#include <cmath>
#include <cstring>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include <boost/multiprecision/cpp_bin_float.hpp>
#include <json.hpp>
#ifdef RBM_HAVE_EIGEN
#include <Eigen/Eigenvalues>
#endif

#include "rbm/io.hpp"
#include "rbm/paths.hpp"
#include "rbm/rng.hpp"
#include "rbm/skorohod.hpp"
#include "rbm/srbm.hpp"

using namespace rbm;

TEST_CASE("homogeneous matrix expansion") {
    const std::vector<double> R0 = expand_matrix(homogeneous_matrix(3, 0.0));
    for (std::size_t i = 0; i < 3; ++i)
        for (std::size_t j = 0; j < 3; ++j)
            CHECK(R0[i * 3 + j] == (i == j ? 1.0 : 0.0));

    const std::vector<double> R1 = expand_matrix(homogeneous_matrix(3, 1.0));
    for (std::size_t i = 0; i < 3; ++i)
        for (std::size_t j = 0; j < 3; ++j)
            CHECK(R1[i * 3 + j] == (i == j ? 1.0 : 0.5));

    const std::vector<double> R2 = expand_matrix(homogeneous_matrix(2, -0.5));
    CHECK(R2 == std::vector<double>{1.0, -0.5, -0.5, 1.0});

    CHECK_THROWS_AS(homogeneous_matrix(1, 0.0), std::invalid_argument);
    CHECK_THROWS_AS(explicit_matrix(2, {2.0, 0.0, 0.0, 1.0}), std::invalid_argument);
    CHECK_THROWS_AS(explicit_matrix(2, {1.0, 0.0, 1.0}), std::invalid_argument);
}

TEST_CASE("completely-S classification") {
    CHECK_FALSE(is_completely_s(homogeneous_matrix(3, -1.0)));
    CHECK(is_completely_s(explicit_matrix(3, {1, 0, 0, 0, 1, 0, 0, 0, 1})));
    // upper triangular with a large negative entry still works: x = (3, 1)
    // certifies the full subset
    CHECK(is_completely_s(explicit_matrix(2, {1.0, -2.0, 0.0, 1.0})));

    // the homogeneous closed criterion against direct subset enumeration
    const double as[] = {-1.5, -1.0, -0.99, -0.5, 0.0, 1.0, 2.0};
    for (std::size_t n = 2; n <= 4; ++n) {
        for (double a : as) {
            const ReflectionSpec s = homogeneous_matrix(n, a);
            const bool closed = is_completely_s(s);
            const bool enumerated = is_completely_s_matrix(expand_matrix(s), n);
            CHECK(closed == (a > -1.0));
            CHECK(closed == enumerated);
        }
    }
}

TEST_CASE("spectral radius of the off-diagonal part") {
    CHECK(spectral_radius_abs(homogeneous_matrix(5, 0.7)) == 0.7);
    CHECK(spectral_radius_abs(homogeneous_matrix(2, -0.9)) == 0.9);
    CHECK(spectral_radius_abs(explicit_matrix(3, {1, 0, 0, 0, 1, 0, 0, 0, 1})) == 0.0);

    // explicit homogeneous expansion agrees with the closed form
    const ReflectionSpec h = homogeneous_matrix(6, -0.6);
    const double r = spectral_radius_abs(explicit_matrix(6, expand_matrix(h)));
    CHECK(r == doctest::Approx(0.6).epsilon(1e-9));
}

#ifdef RBM_HAVE_EIGEN
TEST_CASE("power iteration matches a dense eigensolver") {
    const uint64_t key = derive_stream(31, STREAM_ORACLE);
    for (std::size_t trial = 0; trial < 20; ++trial) {
        const std::size_t n = 3 + trial % 4;
        std::vector<double> R(n * n);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < n; ++j)
                R[i * n + j] = (i == j) ? 1.0
                                        : 0.9 * (uniform01(key, trial * 64 + i, j) - 0.5);
        const double mine = spectral_radius_abs(explicit_matrix(n, R));

        Eigen::MatrixXd B(n, n);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < n; ++j)
                B(i, j) = (i == j) ? 0.0 : std::abs(R[i * n + j]);
        const Eigen::VectorXcd ev = Eigen::EigenSolver<Eigen::MatrixXd>(B, false).eigenvalues();
        double ref = 0.0;
        for (Eigen::Index k = 0; k < ev.size(); ++k) ref = std::max(ref, std::abs(ev[k]));
        CHECK(mine == doctest::Approx(ref).epsilon(1e-7));
    }
}
#endif

namespace {

Path path_from(const TimeGrid& g, std::initializer_list<double> vals) {
    Path p = make_path(g);
    p.v.assign(vals);
    return p;
}

// two-particle fixed point iterated in 100-digit floats until the geometric
// tail is far below the working precision of the solver under test
void oracle_two_particle(const std::vector<double>& z1, const std::vector<double>& z2,
                         double a, std::vector<double>& L1, std::vector<double>& L2,
                         std::vector<double>& X1, std::vector<double>& X2) {
    using big = boost::multiprecision::cpp_bin_float_100;
    const std::size_t K = z1.size();
    std::vector<big> l1(K, 0), l2(K, 0), n1(K), n2(K);
    const big A = a;
    for (int sweep = 0; sweep < 400; ++sweep) {
        big run1 = 0, run2 = 0;
        for (std::size_t k = 0; k < K; ++k) {
            const big d1 = big(z1[k]) + A * l2[k];
            const big d2 = big(z2[k]) + A * l1[k];
            if (-d1 > run1) run1 = -d1;
            if (-d2 > run2) run2 = -d2;
            n1[k] = run1;
            n2[k] = run2;
        }
        l1 = n1;
        l2 = n2;
    }
    L1.resize(K), L2.resize(K), X1.resize(K), X2.resize(K);
    for (std::size_t k = 0; k < K; ++k) {
        L1[k] = double(l1[k]);
        L2[k] = double(l2[k]);
        X1[k] = double(big(z1[k]) + A * l2[k] + l1[k]);
        X2[k] = double(big(z2[k]) + A * l1[k] + l2[k]);
    }
}

} // namespace

TEST_CASE("contraction solver reduces to the 1d map when particles decouple") {
    const TimeGrid g = make_grid(1.0, 64);
    const BrownianEnsemble W = sample_brownian(g, 3, 0.0, 1.0, 41);
    std::vector<Path> z;
    for (const Path& p : W.paths) {
        Path q = p;
        q.v[0] = 0.0;
        z.push_back(q);
    }
    const SrbmSolution sol = solve_srbm_contraction(z, homogeneous_matrix(3, 0.0), 1e-12);
    for (std::size_t i = 0; i < 3; ++i) {
        auto [x, l] = reflect_1d(z[i]);
        for (std::size_t k = 0; k <= g.M; ++k) {
            CHECK(sol.X[i].v[k] == x.v[k]);
            CHECK(sol.L[i].v[k] == l.v[k]);
        }
    }
    CHECK_FALSE(sol.approximate);
}

TEST_CASE("identical drivers give identical regulators by symmetry") {
    const TimeGrid g = make_grid(1.0, 50);
    const BrownianEnsemble W = sample_brownian(g, 1, -0.5, 1.0, 42);
    std::vector<Path> z{W.paths[0], W.paths[0]};
    const SrbmSolution sol = solve_srbm_contraction(z, homogeneous_matrix(2, 0.5), 1e-12);
    for (std::size_t k = 0; k <= g.M; ++k) {
        CHECK(sol.L[0].v[k] == sol.L[1].v[k]);
        CHECK(sol.X[0].v[k] == sol.X[1].v[k]);
    }
}

TEST_CASE("two-particle solution against the extended-precision oracle") {
    const TimeGrid g = make_grid(4.0, 4);
    const std::vector<double> z1{0.5, -1.0, 0.25, -1.5, 0.0};
    const std::vector<double> z2{0.0, 0.5, -0.75, -0.25, 1.0};
    std::vector<Path> z{path_from(g, {0.5, -1.0, 0.25, -1.5, 0.0}),
                        path_from(g, {0.0, 0.5, -0.75, -0.25, 1.0})};

    for (double a : {-0.5, 0.5, -0.9}) {
        std::vector<double> L1, L2, X1, X2;
        oracle_two_particle(z1, z2, a, L1, L2, X1, X2);
        const SrbmSolution sol =
            solve_srbm_contraction(z, homogeneous_matrix(2, a), 1e-13);
        for (std::size_t k = 0; k <= 4; ++k) {
            CHECK(sol.L[0].v[k] == doctest::Approx(L1[k]).epsilon(1e-11));
            CHECK(sol.L[1].v[k] == doctest::Approx(L2[k]).epsilon(1e-11));
            CHECK(sol.X[0].v[k] == doctest::Approx(X1[k]).epsilon(1e-11));
            CHECK(sol.X[1].v[k] == doctest::Approx(X2[k]).epsilon(1e-11));
        }
    }
}

TEST_CASE("contraction solutions satisfy the exact discrete invariants") {
    const TimeGrid g = make_grid(1.0, 200);
    for (double a : {-0.5, 0.5}) {
        const std::size_t n = 8;
        const BrownianEnsemble W = sample_brownian(g, n, 0.0, 1.0, 43);
        std::vector<Path> z = W.paths;
        const double tol = 1e-10;
        const SrbmSolution sol = solve_srbm_contraction(z, homogeneous_matrix(n, a), tol);
        CHECK(sol.min_X >= 0.0);
        CHECK(sol.fixed_point_residual <= tol);
        CHECK(sol.max_complementarity_residual == 0.0);
        for (std::size_t i = 0; i < n; ++i) {
            CHECK(sol.L[i].v[0] == 0.0);
            CHECK(complementarity_residual(sol.X[i], sol.L[i]) == 0.0);
        }
        // geometric decay of the logged sweep gaps
        for (std::size_t m = 0; m + 1 < sol.gap_history.size(); ++m) {
            if (sol.gap_history[m + 1] < 1e-12) break;
            CHECK(sol.gap_history[m + 1] <=
                  (std::abs(a) + 0.05) * sol.gap_history[m] + 1e-15);
        }
    }
}

TEST_CASE("contraction solver refuses expansive matrices") {
    const TimeGrid g = make_grid(1.0, 4);
    std::vector<Path> z{make_path(g, 1.0), make_path(g, 1.0)};
    try {
        solve_srbm_contraction(z, homogeneous_matrix(2, 1.2), 1e-10);
        FAIL("expected a rejection");
    } catch (const std::invalid_argument& e) {
        CHECK(std::string(e.what()).find("penalty") != std::string::npos);
    }
    CHECK_THROWS_AS(
        solve_srbm_contraction(z, homogeneous_matrix(3, 0.5), 1e-10),
        std::invalid_argument);

    std::vector<Path> zneg{path_from(g, {-0.1, 0, 0, 0, 0}), make_path(g, 1.0)};
    CHECK_THROWS_AS(
        solve_srbm_contraction(zneg, homogeneous_matrix(2, 0.5), 1e-10),
        std::invalid_argument);
}

TEST_CASE("iteration budget exhaustion carries the last residual") {
    const TimeGrid g = make_grid(1.0, 32);
    const BrownianEnsemble W = sample_brownian(g, 4, -1.0, 1.0, 44);
    std::vector<Path> z = W.paths;
    try {
        solve_srbm_contraction(z, homogeneous_matrix(4, 0.9), 1e-12, 2);
        FAIL("expected non-convergence");
    } catch (const SolverError& e) {
        CHECK(e.residual > 0.0);
        CHECK(std::string(e.what()).find("2 sweeps") != std::string::npos);
    }
}

TEST_CASE("penalty gradient branches") {
    CHECK(penalty_fn(-0.2, 0.1) == 10.0);
    CHECK(penalty_fn(0.5, 0.1) == 0.0);
    // the middle branch divides by eps*eps, which is not an exact double
    CHECK(penalty_fn(-0.05, 0.1) == doctest::Approx(5.0).epsilon(1e-15));
    CHECK(penalty_fn(0.0, 0.1) == 0.0);
    CHECK(penalty_fn(-0.1, 0.1) == 10.0);
    CHECK_THROWS_AS(penalty_fn(0.0, 0.0), std::invalid_argument);
    CHECK_THROWS_AS(penalty_fn(0.0, -0.1), std::invalid_argument);
}

TEST_CASE("penalty scheme is inert for paths that stay positive") {
    const TimeGrid g = make_grid(1.0, 1000);
    BrownianEnsemble W;
    W.grid = g;
    W.n = 2;
    W.b = 0.0;
    W.sigma = 0.0;
    W.seed = 0;
    W.paths = {make_path(g, 0.0), make_path(g, 0.0)};
    const SrbmSolution sol =
        solve_srbm_penalty({1.0, 1.0}, W, homogeneous_matrix(2, 0.5), 0.1);
    for (std::size_t i = 0; i < 2; ++i)
        for (std::size_t k = 0; k <= g.M; ++k) {
            CHECK(sol.X[i].v[k] == 1.0);
            CHECK(sol.L[i].v[k] == 0.0);
        }
    CHECK(sol.approximate);
    CHECK(sol.epsilon == 0.1);
}

TEST_CASE("penalty scheme balances a constant negative drift") {
    const double eps = 0.05;
    const std::size_t M = std::size_t(std::ceil(10.0 / (eps * eps)));
    const TimeGrid g = make_grid(1.0, M);
    const BrownianEnsemble W = sample_brownian(g, 2, -1.0, 1e-12, 45);
    const SrbmSolution sol =
        solve_srbm_penalty({0.0, 0.0}, W, homogeneous_matrix(2, 0.0), eps);
    // the state settles where the penalty gradient cancels the drift
    const double ystar = -eps * eps;
    for (std::size_t i = 0; i < 2; ++i) {
        CHECK(std::abs(sol.X[i].v[M] - ystar) < 0.5 * eps * eps);
        CHECK(sol.L[i].v[M] > 1.0 - 0.02);
        CHECK(sol.L[i].v[M] < 1.0 + 0.01);
    }
    CHECK(sol.min_X >= -eps - 0.01);
}

TEST_CASE("penalty scheme enforces the step-size guard") {
    const TimeGrid g = make_grid(1.0, 100);
    const BrownianEnsemble W = sample_brownian(g, 2, 0.0, 1.0, 46);
    try {
        solve_srbm_penalty({0.0, 0.0}, W, homogeneous_matrix(2, 0.0), 0.01);
        FAIL("expected the stability guard to fire");
    } catch (const std::invalid_argument& e) {
        CHECK(std::string(e.what()).find("need at least 100000 steps") !=
              std::string::npos);
    }
    CHECK_THROWS_AS(
        solve_srbm_penalty({-1.0, 0.0}, W, homogeneous_matrix(2, 0.0), 0.5),
        std::invalid_argument);
}

TEST_CASE("penalty error shrinks along an epsilon sweep") {
    // one grid fine enough for the smallest epsilon keeps the driver fixed
    // across the sweep
    const std::size_t M = 4000;
    const TimeGrid g = make_grid(1.0, M);
    const BrownianEnsemble W = sample_brownian(g, 2, 0.0, 1.0, 47);
    std::vector<Path> z = W.paths;
    const SrbmSolution ex =
        solve_srbm_contraction(z, homogeneous_matrix(2, 0.5), 1e-12);
    double prev = 1e100;
    for (double eps : {0.2, 0.1, 0.05}) {
        const SrbmSolution pen =
            solve_srbm_penalty({0.0, 0.0}, W, homogeneous_matrix(2, 0.5), eps);
        double gap = 0.0;
        for (std::size_t i = 0; i < 2; ++i)
            for (std::size_t k = 0; k <= M; ++k)
                gap = std::max(gap, std::abs(pen.X[i].v[k] - ex.X[i].v[k]));
        CHECK(gap < prev);
        prev = gap;
    }
}

TEST_CASE("single particle front door degenerates to the 1d map") {
    const TimeGrid g = make_grid(1.0, 128);
    const SrbmSolution sol =
        simulate_particle_system(1, homogeneous_matrix(2, 0.7), point_mass(0.5), g,
                                 0.1, 1.0, SolverChoice::automatic, 0.01, 48);
    const BrownianEnsemble W = sample_brownian(g, 1, 0.1, 1.0, 48);
    Path z = W.paths[0];
    for (double& v : z.v) v += 0.5;
    auto [x, l] = reflect_1d(z);
    for (std::size_t k = 0; k <= g.M; ++k) {
        CHECK(sol.X[0].v[k] == x.v[k]);
        CHECK(sol.L[0].v[k] == l.v[k]);
    }
}

TEST_CASE("front door at a = 0 decouples componentwise") {
    const TimeGrid g = make_grid(1.0, 100);
    const std::size_t n = 16;
    const uint64_t seed = 49;
    const SrbmSolution sol =
        simulate_particle_system(n, homogeneous_matrix(n, 0.0), uniform_law(1.0), g,
                                 0.0, 1.0, SolverChoice::automatic, 0.01, seed);
    const BrownianEnsemble W = sample_brownian(g, n, 0.0, 1.0, seed);
    const InitialLaw law = uniform_law(1.0);
    for (std::size_t i = 0; i < n; ++i) {
        Path z = W.paths[i];
        const double x0 = law.sample(seed, i);
        for (double& v : z.v) v += x0;
        auto [x, l] = reflect_1d(z);
        for (std::size_t k = 0; k <= g.M; ++k) {
            CHECK(sol.X[i].v[k] == x.v[k]);
            CHECK(sol.L[i].v[k] == l.v[k]);
        }
    }
}

TEST_CASE("front door reruns are bit-identical") {
    const TimeGrid g = make_grid(1.0, 100);
    const SrbmSolution s1 =
        simulate_particle_system(8, homogeneous_matrix(8, 0.5), uniform_law(1.0), g,
                                 0.0, 1.0, SolverChoice::automatic, 0.01, 50);
    const SrbmSolution s2 =
        simulate_particle_system(8, homogeneous_matrix(8, 0.5), uniform_law(1.0), g,
                                 0.0, 1.0, SolverChoice::automatic, 0.01, 50);
    CHECK(s1.iterations == s2.iterations);
    for (std::size_t i = 0; i < 8; ++i)
        for (std::size_t k = 0; k <= g.M; ++k) {
            CHECK(s1.X[i].v[k] == s2.X[i].v[k]);
            CHECK(s1.L[i].v[k] == s2.L[i].v[k]);
        }
}

TEST_CASE("automatic dispatch picks the penalty scheme past the contraction range") {
    const TimeGrid g = make_grid(0.5, 2000);
    const SrbmSolution pen =
        simulate_particle_system(4, homogeneous_matrix(4, 2.0), point_mass(0.0), g,
                                 0.0, 1.0, SolverChoice::automatic, 0.1, 51);
    CHECK(pen.solver == SrbmSolution::Solver::penalty);
    CHECK(pen.approximate);

    const SrbmSolution con =
        simulate_particle_system(4, homogeneous_matrix(4, 0.5), point_mass(0.0), g,
                                 0.0, 1.0, SolverChoice::automatic, 0.1, 51);
    CHECK(con.solver == SrbmSolution::Solver::contraction);
    CHECK_FALSE(con.approximate);
}

TEST_CASE("initial law samplers") {
    const InitialLaw p = point_mass(0.7);
    CHECK(p.sample(1, 0) == 0.7);
    CHECK(p.sample(2, 5) == 0.7);

    const InitialLaw u = uniform_law(2.0);
    double mean = 0.0;
    for (std::size_t i = 0; i < 10000; ++i) {
        const double v = u.sample(3, i);
        CHECK(v > 0.0);
        CHECK(v <= 2.0);
        mean += v;
    }
    CHECK(std::abs(mean / 10000.0 - 1.0) < 0.03);
    CHECK(u.sample(3, 0) == u.sample(3, 0));

    const InitialLaw e = exponential_law(2.0);
    double em = 0.0;
    for (std::size_t i = 0; i < 10000; ++i) {
        const double v = e.sample(4, i);
        CHECK(v >= 0.0);
        em += v;
    }
    CHECK(std::abs(em / 10000.0 - 0.5) < 0.03);

    CHECK_THROWS_AS(point_mass(-0.1), std::invalid_argument);
    CHECK_THROWS_AS(uniform_law(0.0), std::invalid_argument);
    CHECK_THROWS_AS(exponential_law(-1.0), std::invalid_argument);
}

TEST_CASE("solution export formats") {
    const TimeGrid g = make_grid(1.0, 1);
    SrbmSolution sol;
    sol.grid = g;
    sol.solver = SrbmSolution::Solver::contraction;
    sol.X = {path_from(g, {1.0, 0.0}), path_from(g, {0.25, 2.0})};
    sol.L = {path_from(g, {0.0, 0.5}), path_from(g, {0.0, 0.0})};
    sol.seed = 9;
    std::filesystem::create_directories("unit_scratch");
    write_solution_csv(sol, "unit_scratch/solution.csv");
    CHECK(read_text_file("unit_scratch/solution.csv") ==
          "t,i,X,L\n0,1,1,0\n0,2,0.25,0\n1,1,0,0.5\n1,2,2,0\n");

    const nlohmann::json j = nlohmann::json::parse(solution_summary_json(sol, 0xabcull));
    CHECK(j.at("solver") == "contraction");
    CHECK(j.at("seed") == 9);
    CHECK(j.at("approximate") == false);
    CHECK(j.at("config_hash").get<std::string>() == "0000000000000abc");
}
