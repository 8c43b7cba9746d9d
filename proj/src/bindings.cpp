// Python surface: thin wrappers around the path solvers, the mean-field
// fixed point, environments, transport distances, and the experiment runner.
// Vectors cross the boundary as plain lists; nothing here owns state.

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <cstdint>
#include <string>
#include <vector>

#include "rbm/environment.hpp"
#include "rbm/experiments.hpp"
#include "rbm/io.hpp"
#include "rbm/mckean_vlasov.hpp"
#include "rbm/parallel.hpp"
#include "rbm/paths.hpp"
#include "rbm/skorohod.hpp"
#include "rbm/srbm.hpp"
#include "rbm/stats.hpp"

namespace py = pybind11;
using namespace rbm;

namespace {

InitialLaw law_from(const std::string& kind, double param) {
    if (kind == "point") return point_mass(param);
    if (kind == "uniform") return uniform_law(param);
    if (kind == "exponential") return exponential_law(param);
    throw std::invalid_argument("x0_law must be point, uniform, or exponential");
}

SolverChoice choice_from(const std::string& s) {
    if (s == "auto") return SolverChoice::automatic;
    if (s == "contraction") return SolverChoice::contraction;
    if (s == "penalty") return SolverChoice::penalty;
    throw std::invalid_argument("solver must be auto, contraction, or penalty");
}

py::dict solution_dict(const SrbmSolution& sol) {
    py::dict d;
    const std::size_t n = sol.X.size();
    py::list t, X, L;
    for (std::size_t k = 0; k < sol.grid.points(); ++k) t.append(sol.grid.t(k));
    for (std::size_t i = 0; i < n; ++i) {
        X.append(sol.X[i].v);
        L.append(sol.L[i].v);
    }
    d["t"] = t;
    d["X"] = X;
    d["L"] = L;
    d["solver"] = sol.solver == SrbmSolution::Solver::contraction ? "contraction" : "penalty";
    d["iterations"] = sol.iterations;
    d["fixed_point_residual"] = sol.fixed_point_residual;
    d["max_complementarity_residual"] = sol.max_complementarity_residual;
    d["min_X"] = sol.min_X;
    d["approximate"] = sol.approximate;
    d["seed"] = sol.seed;
    return d;
}

py::dict mv_dict(const MvSolution& mv) {
    py::dict d;
    py::list t;
    for (std::size_t k = 0; k < mv.grid.points(); ++k) t.append(mv.grid.t(k));
    d["t"] = t;
    d["lambda"] = mv.lambda;
    d["iterations"] = mv.picard_iterations;
    d["residual"] = mv.picard_residual;
    d["damping"] = mv.damping;
    d["converged"] = mv.converged;
    d["penalized"] = mv.penalized;
    d["X_T"] = mv.X_T;
    d["L_T"] = mv.L_T;
    return d;
}

} // namespace

PYBIND11_MODULE(_core, mod) {
    mod.doc() = "reflected particle systems and their mean-field limits";
    mod.attr("__version__") = kToolVersion;

    mod.def(
        "reflect",
        [](const std::vector<double>& w, double T) {
            if (w.size() < 2) throw std::invalid_argument("need at least two points");
            TimeGrid g = make_grid(T, w.size() - 1);
            Path p{g, w};
            auto [x, l] = reflect_1d(p);
            return py::make_tuple(x.v, l.v);
        },
        py::arg("w"), py::arg("T") = 1.0,
        "one-dimensional boundary reflection of a sampled driver; returns (x, l)");

    mod.def(
        "completely_s",
        [](std::size_t n, double a) { return is_completely_s(homogeneous_matrix(n, a)); },
        py::arg("n"), py::arg("a"));

    mod.def(
        "spectral_radius",
        [](std::size_t n, double a) { return spectral_radius_abs(homogeneous_matrix(n, a)); },
        py::arg("n"), py::arg("a"));

    mod.def(
        "simulate",
        [](std::size_t n, double a, double T, std::size_t steps, double b, double sigma,
           uint64_t seed, const std::string& solver, double epsilon, double tol,
           const std::string& x0_law, double x0_param) {
            const ReflectionSpec spec = homogeneous_matrix(n < 2 ? 2 : n, a);
            const SrbmSolution sol = simulate_particle_system(
                n, spec, law_from(x0_law, x0_param), make_grid(T, steps), b, sigma,
                choice_from(solver), epsilon, seed, tol);
            return solution_dict(sol);
        },
        py::arg("n"), py::arg("a"), py::arg("T") = 1.0, py::arg("steps") = 1000,
        py::arg("b") = 0.0, py::arg("sigma") = 1.0, py::arg("seed") = 1,
        py::arg("solver") = "auto", py::arg("epsilon") = 0.01, py::arg("tol") = 1e-10,
        py::arg("x0_law") = "point", py::arg("x0_param") = 0.0,
        "one constrained particle system run with homogeneous coupling");

    mod.def(
        "solve_mean_field",
        [](double a, double b, double sigma, double T, std::size_t steps, std::size_t m,
           double tol, double damping, uint64_t seed) {
            const MvSolution mv =
                solve_nlr(a, b, sigma, point_mass(0.0), make_grid(T, steps), m, tol,
                          damping > 0 ? damping : default_damping(a), seed);
            return mv_dict(mv);
        },
        py::arg("a"), py::arg("b") = 0.0, py::arg("sigma") = 1.0, py::arg("T") = 1.0,
        py::arg("steps") = 1000, py::arg("m") = 10000, py::arg("tol") = 1e-6,
        py::arg("damping") = 0.0, py::arg("seed") = 1,
        "mean boundary curve of the nonlinear reflected dynamics");

    mod.def(
        "analytic_boundary_mean",
        [](double t, double sigma) { return analytic_rbm_marginal(t, sigma).mean(); },
        py::arg("t"), py::arg("sigma") = 1.0,
        "closed form E sup of the reflected free case, sigma*sqrt(2 t / pi)");

    mod.def(
        "sample_environment",
        [](std::size_t n, double a, double half_width, double eps_rho,
           const std::string& family, uint64_t env_seed) {
            const EnvironmentDraw env = sample_environment(
                n, a, half_width, eps_rho, env_family_from_string(family), env_seed);
            py::dict d;
            d["n"] = env.n;
            d["a"] = env.a;
            d["rho"] = env.rho;
            d["mean_offdiag"] = env.mean_offdiag();
            d["max_abs_offdiag"] = env.max_abs_offdiag();
            return d;
        },
        py::arg("n"), py::arg("a"), py::arg("half_width"), py::arg("eps_rho") = 0.1,
        py::arg("family") = "uniform", py::arg("env_seed") = 1);

    mod.def("wasserstein1", &wasserstein1_1d, py::arg("u"), py::arg("v"),
            "exact transport distance between two samples on the line");

    mod.def(
        "run_config",
        [](const std::string& json_text, const std::string& out_dir, unsigned threads,
           bool verbose) {
            Config cfg = parse_config(json_text);
            if (!out_dir.empty()) cfg.out_dir = out_dir;
            set_worker_threads(threads);
            return run_experiment(cfg, verbose);
        },
        py::arg("json_text"), py::arg("out_dir") = "", py::arg("threads") = 0,
        py::arg("verbose") = false,
        "run one experiment config (JSON text); returns the process exit code");

    py::register_exception<ConfigError>(mod, "ConfigError");
}
