#include "rbm/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <filesystem>
#include <limits>
#include <set>
#include <utility>

#include <json.hpp>

#include "rbm/environment.hpp"
#include "rbm/io.hpp"
#include "rbm/mckean_vlasov.hpp"
#include "rbm/parallel.hpp"
#include "rbm/paths.hpp"
#include "rbm/rng.hpp"
#include "rbm/srbm.hpp"
#include "rbm/stats.hpp"

namespace rbm {

const char* const kToolVersion = "0.1.0";

using nlohmann::json;

namespace {

double num_field(const json& v, const std::string& key) {
    if (!v.is_number()) throw ConfigError("config: '" + key + "' must be a number");
    const double x = v.get<double>();
    if (!std::isfinite(x)) throw ConfigError("config: '" + key + "' must be finite");
    return x;
}

uint64_t uint_field(const json& v, const std::string& key) {
    if (!v.is_number_unsigned())
        throw ConfigError("config: '" + key + "' must be a nonnegative integer");
    return v.get<uint64_t>();
}

std::size_t count_field(const json& v, const std::string& key, uint64_t lo, uint64_t hi) {
    const uint64_t x = uint_field(v, key);
    if (x < lo || x > hi)
        throw ConfigError("config: '" + key + "' out of range [" + std::to_string(lo) +
                          ", " + std::to_string(hi) + "]");
    return static_cast<std::size_t>(x);
}

void parse_rho(const json& v, RhoConfig& rho) {
    if (!v.is_object()) throw ConfigError("config: 'rho' must be an object");
    for (const auto& item : v.items()) {
        const std::string& k = item.key();
        if (k == "family") {
            if (!item.value().is_string())
                throw ConfigError("config: 'rho.family' must be a string");
            rho.family = item.value().get<std::string>();
            try {
                env_family_from_string(rho.family);
            } catch (const std::invalid_argument& e) {
                throw ConfigError(std::string("config: ") + e.what());
            }
        } else if (k == "half_width") {
            rho.half_width = num_field(item.value(), "rho.half_width");
            if (rho.half_width < 0)
                throw ConfigError("config: 'rho.half_width' must be >= 0");
        } else if (k == "eps_rho") {
            rho.eps_rho = num_field(item.value(), "rho.eps_rho");
            if (!(rho.eps_rho > 0))
                throw ConfigError("config: 'rho.eps_rho' must be > 0");
        } else if (k == "env_seed") {
            rho.env_seed = uint_field(item.value(), "rho.env_seed");
        } else {
            throw ConfigError("config: unknown key 'rho." + k + "'");
        }
    }
}

constexpr double kGridBiasCoeff = 0.5826; // discrete-supremum correction rate

double epsilon_or(const Config& cfg, double dflt = 0.01) {
    return cfg.epsilon_list.empty() ? dflt : cfg.epsilon_list.front();
}

double tol_or(const Config& cfg, double dflt) { return cfg.tol > 0 ? cfg.tol : dflt; }

double damping_or(const Config& cfg) {
    return cfg.damping > 0 ? cfg.damping : default_damping(cfg.a);
}

double mean_of(const std::vector<double>& v) {
    return v.empty() ? 0.0 : ordered_sum(v) / double(v.size());
}

double stderr_of(const std::vector<double>& v) {
    if (v.size() < 2) return 0.0;
    const double m = mean_of(v);
    std::vector<double> sq(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) {
        const double d = v[i] - m;
        sq[i] = d * d;
    }
    const double var = ordered_sum(sq) / double(v.size() - 1);
    return std::sqrt(var / double(v.size()));
}

std::size_t single_n(const Config& cfg) {
    if (cfg.n_list.size() != 1)
        throw ConfigError("config: " + cfg.experiment + " takes a single 'n'");
    return cfg.n_list.front();
}

void require_a(const Config& cfg) {
    if (!cfg.has_a) throw ConfigError("config: " + cfg.experiment + " requires 'a'");
}

void note(bool verbose, const char* fmt, ...) {
    if (!verbose) return;
    va_list ap;
    va_start(ap, fmt);
    std::vfprintf(stderr, fmt, ap);
    va_end(ap);
    std::fputc('\n', stderr);
}

std::string matrix_csv(const std::vector<double>& m, std::size_t n) {
    std::string out;
    out.reserve(n * n * 24);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            if (j) out += ',';
            out += fmt17(m[i * n + j]);
        }
        out += '\n';
    }
    return out;
}

struct Sink {
    const Config* cfg;
    std::vector<std::string> names;

    void write(const std::string& name, const std::string& text) {
        write_text_file(cfg->out_dir + "/" + name, text);
        names.push_back(name);
    }
};

// ---------------------------------------------------------------- check-s

json run_check_s(const Config& cfg, bool verbose, Sink& sink) {
    require_a(cfg);
    if (cfg.n_list.empty()) throw ConfigError("config: check-s requires 'n' or 'n_list'");
    std::string csv = "n,a,completely_s,spectral_radius_abs\n";
    json flags = json::array();
    for (std::size_t n : cfg.n_list) {
        if (n < 2) throw ConfigError("config: check-s requires n >= 2");
        const ReflectionSpec spec = homogeneous_matrix(n, cfg.a);
        const bool cs = is_completely_s(spec);
        const double sr = spectral_radius_abs(spec);
        csv += std::to_string(n);
        csv += ',';
        csv += fmt17(cfg.a);
        csv += ',';
        csv += cs ? "true" : "false";
        csv += ',';
        csv += fmt17(sr);
        csv += '\n';
        flags.push_back(cs);
        note(verbose, "[check-s] n=%zu a=%g completely_s=%d", n, cfg.a, int(cs));
    }
    sink.write("table.csv", csv);
    json summary;
    summary["completely_s"] = flags;
    return summary;
}

// ---------------------------------------------------------------- simulate

json run_simulate(const Config& cfg, bool verbose, Sink& sink) {
    require_a(cfg);
    const std::size_t n = single_n(cfg);
    if (n < 1) throw ConfigError("config: simulate requires n >= 1");
    if (!(cfg.sigma > 0)) throw ConfigError("config: simulate requires sigma > 0");
    const TimeGrid grid = make_grid(cfg.T, cfg.steps);
    const ReflectionSpec spec = homogeneous_matrix(std::max<std::size_t>(n, 2), cfg.a);
    SrbmSolution sol =
        simulate_particle_system(n, spec, point_mass(0.0), grid, cfg.b, cfg.sigma,
                                 SolverChoice::automatic, epsilon_or(cfg), cfg.seed,
                                 tol_or(cfg, 1e-10));
    write_solution_csv(sol, cfg.out_dir + "/solution.csv");
    sink.names.push_back("solution.csv");
    json summary = json::parse(solution_summary_json(sol, cfg.config_hash));
    summary["mean_boundary_T"] = mean_boundary(sol, grid.T);
    note(verbose, "[simulate] n=%zu solver=%s iterations=%zu min_X=%g", n,
         summary["solver"].get<std::string>().c_str(), sol.iterations, sol.min_X);
    return summary;
}

// ---------------------------------------------------------------- mv-solve

json run_mv_solve(const Config& cfg, bool verbose, Sink& sink) {
    require_a(cfg);
    const TimeGrid grid = make_grid(cfg.T, cfg.steps);
    MvSolution mv = solve_nlr(cfg.a, cfg.b, cfg.sigma, point_mass(0.0), grid,
                              cfg.ensemble, tol_or(cfg, 1e-6), damping_or(cfg), cfg.seed);
    if (!mv.converged)
        throw SolverError("mv-solve: picard iteration stalled above tol after " +
                              std::to_string(mv.picard_iterations) + " sweeps",
                          mv.picard_residual);
    write_lambda_csv(mv, cfg.out_dir + "/lambda.csv");
    sink.names.push_back("lambda.csv");
    json summary = json::parse(mv_summary_json(mv));
    summary["stderr_lambda_T"] = stderr_of(mv.L_T);
    summary["grid_bias_hint"] = kGridBiasCoeff * cfg.sigma * std::sqrt(grid.dt);
    note(verbose, "[mv-solve] lambda_T=%.6f residual=%.3g iterations=%zu",
         mv.lambda.back(), mv.picard_residual, mv.picard_iterations);
    return summary;
}

// ------------------------------------------------------------ penalty-sweep

json run_penalty_sweep(const Config& cfg, bool verbose, Sink& sink) {
    require_a(cfg);
    const std::size_t n = single_n(cfg);
    if (n < 2) throw ConfigError("config: penalty-sweep requires n >= 2");
    if (!(std::abs(cfg.a) < 1))
        throw ConfigError("config: penalty-sweep requires |a| < 1 for the exact reference");
    if (cfg.epsilon_list.empty())
        throw ConfigError("config: penalty-sweep requires 'epsilon' or 'epsilon_list'");
    if (!(cfg.sigma > 0)) throw ConfigError("config: penalty-sweep requires sigma > 0");
    const ReflectionSpec spec = homogeneous_matrix(n, cfg.a);
    const double tol = tol_or(cfg, 1e-10);
    const double tol_mv = tol_or(cfg, 1e-8);
    const std::size_t R = cfg.replications;

    std::string csv =
        "epsilon,steps,mean_gap_particle,stderr_gap_particle,mean_gap_mv,stderr_gap_mv,"
        "lambda_gap\n";
    std::vector<double> particle_means, mv_means;
    json eps_arr = json::array();

    for (const double eps : cfg.epsilon_list) {
        const std::size_t Meps =
            static_cast<std::size_t>(std::ceil(10.0 * cfg.T / (eps * eps)));
        const TimeGrid g = make_grid(cfg.T, Meps);

        std::vector<double> gap(R);
        parallel_for(R, worker_threads(), [&](std::size_t r) {
            const uint64_t sr = derive_replication_seed(cfg.seed, r);
            const BrownianEnsemble W = sample_brownian(g, n, cfg.b, cfg.sigma, sr);
            const std::vector<double> X0(n, 0.0);
            const SrbmSolution pen = solve_srbm_penalty(X0, W, spec, eps);
            const SrbmSolution ex = solve_srbm_contraction(W.paths, spec, tol);
            double gmax = 0.0;
            for (std::size_t k = 0; k <= g.M; ++k)
                gmax = std::max(gmax, std::abs(pen.X[0][k] - ex.X[0][k]));
            gap[r] = gmax;
        });

        const MvSolution mvp = solve_nlr_penalized(cfg.a, cfg.b, cfg.sigma, point_mass(0.0),
                                                   g, cfg.ensemble, eps, cfg.seed);
        const MvSolution mvx = solve_nlr(cfg.a, cfg.b, cfg.sigma, point_mass(0.0), g,
                                         cfg.ensemble, tol_mv, damping_or(cfg), cfg.seed);
        if (!mvx.converged)
            throw SolverError("penalty-sweep: mean-field reference did not converge",
                              mvx.picard_residual);
        std::vector<double> mgap(cfg.ensemble);
        parallel_for(cfg.ensemble, worker_threads(), [&](std::size_t i) {
            std::vector<double> Xp, Lp, Xx, Lx;
            mvp.member(i, Xp, Lp);
            mvx.member(i, Xx, Lx);
            double gm = 0.0;
            for (std::size_t k = 0; k <= g.M; ++k)
                gm = std::max(gm, std::abs(Xp[k] - Xx[k]));
            mgap[i] = gm;
        });
        double lgap = 0.0;
        for (std::size_t k = 0; k <= g.M; ++k)
            lgap = std::max(lgap, std::abs(mvp.lambda[k] - mvx.lambda[k]));

        const double mg = mean_of(gap), sg = stderr_of(gap);
        const double mm = mean_of(mgap), sm = stderr_of(mgap);
        csv += fmt17(eps);
        csv += ',';
        csv += std::to_string(Meps);
        csv += ',';
        csv += fmt17(mg);
        csv += ',';
        csv += fmt17(sg);
        csv += ',';
        csv += fmt17(mm);
        csv += ',';
        csv += fmt17(sm);
        csv += ',';
        csv += fmt17(lgap);
        csv += '\n';
        particle_means.push_back(mg);
        mv_means.push_back(mm);
        eps_arr.push_back(eps);
        note(verbose, "[penalty-sweep] eps=%g steps=%zu gap=%g mv_gap=%g", eps, Meps, mg, mm);
    }
    sink.write("sweep.csv", csv);

    // monotone along decreasing epsilon regardless of the list order given
    std::vector<std::size_t> order(cfg.epsilon_list.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](std::size_t i, std::size_t j) {
        return cfg.epsilon_list[i] > cfg.epsilon_list[j];
    });
    bool mono_p = true, mono_m = true;
    for (std::size_t k = 1; k < order.size(); ++k) {
        if (!(particle_means[order[k]] < particle_means[order[k - 1]])) mono_p = false;
        if (!(mv_means[order[k]] < mv_means[order[k - 1]])) mono_m = false;
    }
    json summary;
    summary["epsilons"] = eps_arr;
    summary["mean_gap_particle"] = particle_means;
    summary["mean_gap_mv"] = mv_means;
    summary["monotone_particle"] = mono_p;
    summary["monotone_mv"] = mono_m;
    return summary;
}

// -------------------------------------------------------------- chaos-sweep

json run_chaos_sweep(const Config& cfg, bool verbose, Sink& sink) {
    require_a(cfg);
    if (cfg.n_list.empty()) throw ConfigError("config: chaos-sweep requires 'n_list'");
    for (std::size_t n : cfg.n_list)
        if (n < 2) throw ConfigError("config: chaos-sweep requires n >= 2");
    if (!(cfg.a > -1)) throw ConfigError("config: chaos-sweep requires a > -1");
    if (!(cfg.sigma > 0)) throw ConfigError("config: chaos-sweep requires sigma > 0");
    if (cfg.replications < 2)
        throw ConfigError("config: chaos-sweep requires replications >= 2");

    const TimeGrid grid = make_grid(cfg.T, cfg.steps);
    const double tol = tol_or(cfg, 1e-10);
    MvSolution mv = solve_nlr(cfg.a, cfg.b, cfg.sigma, point_mass(0.0), grid, cfg.ensemble,
                              tol_or(cfg, 1e-8), damping_or(cfg), cfg.seed);
    if (!mv.converged)
        throw SolverError("chaos-sweep: mean-field reference did not converge",
                          mv.picard_residual);
    const bool analytic_ok = cfg.a == 0.0 && cfg.b == 0.0;
    const AnalyticRbmMarginal law = analytic_rbm_marginal(grid.T, cfg.sigma);
    const std::size_t R = cfg.replications;
    const std::size_t P = 16; // monitored particle pairs per system size

    std::vector<ReportRow> rows;
    json narr = json::array(), w1xarr = json::array(), w1larr = json::array(),
         corrarr = json::array();

    for (const std::size_t n : cfg.n_list) {
        const ReflectionSpec spec = homogeneous_matrix(n, cfg.a);
        const uint64_t pair_key = derive_stream(cfg.seed, STREAM_PAIRS);
        std::vector<std::size_t> pi(P), pj(P);
        for (std::size_t p = 0; p < P; ++p) {
            const uint64_t id = uint64_t(n) * 64 + p;
            std::size_t i = std::min<std::size_t>(
                n - 1, std::size_t(uniform01(pair_key, id, 0) * double(n)));
            std::size_t j = std::min<std::size_t>(
                n - 2, std::size_t(uniform01(pair_key, id, 1) * double(n - 1)));
            if (j >= i) ++j;
            pi[p] = i;
            pj[p] = j;
        }

        std::vector<double> w1x(R), w1l(R), w1a(R, 0.0);
        std::vector<double> pu(P * R), pv(P * R);
        parallel_for(R, worker_threads(), [&](std::size_t r) {
            const SrbmSolution sol = simulate_particle_system(
                n, spec, point_mass(0.0), grid, cfg.b, cfg.sigma, SolverChoice::automatic,
                epsilon_or(cfg), derive_replication_seed(cfg.seed, r), tol);
            const EmpiricalMeasure em = empirical_measure(sol, grid.T);
            w1x[r] = wasserstein1_1d(em.x, mv.X_T);
            w1l[r] = wasserstein1_1d(em.l, mv.L_T);
            if (analytic_ok) w1a[r] = wasserstein1_vs_analytic(em.x, law);
            for (std::size_t p = 0; p < P; ++p) {
                pu[p * R + r] = sol.X[pi[p]][grid.M];
                pv[p * R + r] = sol.X[pj[p]][grid.M];
            }
        });

        const double wx = mean_of(w1x), wxs = stderr_of(w1x);
        const double wl = mean_of(w1l), wls = stderr_of(w1l);
        rows.push_back({"w1_x", n, cfg.a, grid.T, wx, wxs});
        rows.push_back({"w1_l", n, cfg.a, grid.T, wl, wls});
        if (analytic_ok)
            rows.push_back({"w1_x_analytic", n, cfg.a, grid.T, mean_of(w1a), stderr_of(w1a)});
        double cmax = 0.0;
        for (std::size_t p = 0; p < P; ++p) {
            const std::vector<double> u(pu.begin() + p * R, pu.begin() + (p + 1) * R);
            const std::vector<double> v(pv.begin() + p * R, pv.begin() + (p + 1) * R);
            cmax = std::max(cmax, std::abs(pearson(u, v)));
        }
        rows.push_back({"max_abs_corr", n, cfg.a, grid.T, cmax, 0.0});
        narr.push_back(n);
        w1xarr.push_back(wx);
        w1larr.push_back(wl);
        corrarr.push_back(cmax);
        note(verbose, "[chaos-sweep] n=%zu w1_x=%g w1_l=%g max_corr=%g", n, wx, wl, cmax);
    }
    sink.write("report.csv", report_csv(rows));

    json summary;
    summary["n"] = narr;
    summary["w1_x"] = w1xarr;
    summary["w1_l"] = w1larr;
    summary["max_abs_corr"] = corrarr;
    summary["mv_lambda_T"] = mv.lambda.back();
    summary["mv_iterations"] = mv.picard_iterations;
    return summary;
}

// ----------------------------------------------------------- coupling-sweep

json run_coupling_sweep(const Config& cfg, bool verbose, Sink& sink) {
    require_a(cfg);
    if (cfg.n_list.empty()) throw ConfigError("config: coupling-sweep requires 'n_list'");
    for (std::size_t n : cfg.n_list)
        if (n < 2) throw ConfigError("config: coupling-sweep requires n >= 2");
    if (!(cfg.sigma > 0)) throw ConfigError("config: coupling-sweep requires sigma > 0");
    if (cfg.replications < 2)
        throw ConfigError("config: coupling-sweep requires replications >= 2");
    const EnvFamily fam = env_family_from_string(cfg.rho.family);
    const TimeGrid grid = make_grid(cfg.T, cfg.steps);
    const double tol = tol_or(cfg, 1e-10);
    const std::size_t R = cfg.replications;
    const InitialLaw mu0 = point_mass(0.0);

    std::vector<ReportRow> rows;
    json narr = json::array(), dl1arr = json::array(), lqarr = json::array(),
         laarr = json::array();

    for (const std::size_t n : cfg.n_list) {
        std::vector<double> dl1(R), dxs(R), dls(R);
        parallel_for(R, worker_threads(), [&](std::size_t r) {
            const EnvironmentDraw env =
                sample_environment(n, cfg.a, cfg.rho.half_width, cfg.rho.eps_rho, fam,
                                   derive_replication_seed(cfg.rho.env_seed, r));
            const CoupledRun run = coupled_run(env, grid, mu0, cfg.b, cfg.sigma,
                                               derive_replication_seed(cfg.seed, r), tol);
            dl1[r] = run.delta.max_dL_l1;
            dxs[r] = run.delta.max_dX_sup;
            dls[r] = run.delta.max_dL_sup;
        });
        rows.push_back({"max_dL_l1", n, cfg.a, grid.T, mean_of(dl1), stderr_of(dl1)});
        rows.push_back({"max_dX_sup", n, cfg.a, grid.T, mean_of(dxs), stderr_of(dxs)});
        rows.push_back({"max_dL_sup", n, cfg.a, grid.T, mean_of(dls), stderr_of(dls)});

        const EnvironmentDraw envQ = sample_environment(
            n, cfg.a, cfg.rho.half_width, cfg.rho.eps_rho, fam, cfg.rho.env_seed);
        const std::vector<SrbmSolution> qs =
            quenched_replicates(envQ, R, cfg.seed, grid, mu0, cfg.b, cfg.sigma, tol);
        std::vector<double> lq(R);
        for (std::size_t r = 0; r < R; ++r) lq[r] = mean_boundary(qs[r], grid.T);
        rows.push_back({"lambda_quenched", n, cfg.a, grid.T, mean_of(lq), stderr_of(lq)});

        const std::vector<SrbmSolution> as =
            annealed_replicates(R, cfg.rho.env_seed, cfg.seed, n, cfg.a,
                                cfg.rho.half_width, cfg.rho.eps_rho, fam, grid, mu0,
                                cfg.b, cfg.sigma, tol);
        std::vector<double> la(R);
        for (std::size_t r = 0; r < R; ++r) la[r] = mean_boundary(as[r], grid.T);
        rows.push_back({"lambda_annealed", n, cfg.a, grid.T, mean_of(la), stderr_of(la)});

        narr.push_back(n);
        dl1arr.push_back(mean_of(dl1));
        lqarr.push_back(mean_of(lq));
        laarr.push_back(mean_of(la));
        note(verbose, "[coupling-sweep] n=%zu mean_max_dL_l1=%g lambda_q=%g lambda_a=%g", n,
             mean_of(dl1), mean_of(lq), mean_of(la));
    }
    sink.write("report.csv", report_csv(rows));

    MvSolution mv = solve_nlr(cfg.a, cfg.b, cfg.sigma, mu0, grid, cfg.ensemble,
                              tol_or(cfg, 1e-8), damping_or(cfg), cfg.seed);
    if (!mv.converged)
        throw SolverError("coupling-sweep: mean-field reference did not converge",
                          mv.picard_residual);
    json summary;
    summary["n"] = narr;
    summary["mean_max_dL_l1"] = dl1arr;
    summary["lambda_quenched"] = lqarr;
    summary["lambda_annealed"] = laarr;
    summary["mv_lambda_T"] = mv.lambda.back();
    return summary;
}

// -------------------------------------------------------------- bounds-audit

json run_bounds_audit(const Config& cfg, bool verbose, Sink& sink) {
    require_a(cfg);
    const std::size_t n = single_n(cfg);
    if (n < 2) throw ConfigError("config: bounds-audit requires n >= 2");
    if (!(cfg.sigma > 0)) throw ConfigError("config: bounds-audit requires sigma > 0");
    const TimeGrid grid = make_grid(cfg.T, cfg.steps);
    const ReflectionSpec spec = homogeneous_matrix(n, cfg.a);
    const InitialLaw law = uniform_law(1.0);
    const double tol = tol_or(cfg, 1e-10);
    const double eps = epsilon_or(cfg);
    const std::size_t R = cfg.replications;

    std::vector<BoundReport> reports(R);
    parallel_for(R, worker_threads(), [&](std::size_t r) {
        const uint64_t sr = derive_replication_seed(cfg.seed, r);
        const SrbmSolution sol = simulate_particle_system(
            n, spec, law, grid, cfg.b, cfg.sigma, SolverChoice::automatic, eps, sr, tol);
        const BrownianEnsemble W = sample_brownian(grid, n, cfg.b, cfg.sigma, sr);
        reports[r] = pathwise_bound_check(sol, cfg.a, W);
    });

    std::string csv =
        "scenario,a,solver,approximate,viol_r1,viol_r02,viol_r2,viol_x1,viol_x2,"
        "max_violation\n";
    double worst_exact = -std::numeric_limits<double>::infinity();
    std::size_t exact_count = 0;
    for (std::size_t r = 0; r < R; ++r) {
        const BoundReport& rep = reports[r];
        csv += std::to_string(r);
        csv += ',';
        csv += fmt17(cfg.a);
        csv += ',';
        csv += rep.approximate ? "penalty" : "contraction";
        csv += ',';
        csv += rep.approximate ? "true" : "false";
        csv += ',';
        csv += fmt17(rep.viol_r1);
        csv += ',';
        csv += fmt17(rep.viol_r02);
        csv += ',';
        csv += fmt17(rep.viol_r2);
        csv += ',';
        csv += fmt17(rep.viol_x1);
        csv += ',';
        csv += fmt17(rep.viol_x2);
        csv += ',';
        csv += fmt17(rep.max_violation);
        csv += '\n';
        if (!rep.approximate) {
            worst_exact = std::max(worst_exact, rep.max_violation);
            ++exact_count;
        }
    }
    sink.write("audit.csv", csv);

    const double threshold = 10.0 * tol;
    json summary;
    summary["scenarios"] = R;
    summary["exact_scenarios"] = exact_count;
    summary["max_violation"] = exact_count ? worst_exact : 0.0;
    summary["threshold"] = threshold;
    summary["pass"] = exact_count == 0 || worst_exact <= threshold;
    note(verbose, "[bounds-audit] scenarios=%zu exact=%zu max_violation=%g", R, exact_count,
         exact_count ? worst_exact : 0.0);
    return summary;
}

// --------------------------------------------------------------- jackson-map

json run_jackson_map(const Config& cfg, bool verbose, Sink& sink) {
    require_a(cfg);
    const std::size_t n = single_n(cfg);
    if (n < 2) throw ConfigError("config: jackson-map requires n >= 2");
    if (cfg.a > 0 || cfg.a + cfg.rho.half_width > 0)
        throw ConfigError(
            "config: jackson-map requires nonpositive coefficients (a + half_width <= 0)");
    std::vector<double> rho;
    if (cfg.rho.half_width > 0) {
        const EnvironmentDraw env =
            sample_environment(n, cfg.a, cfg.rho.half_width, cfg.rho.eps_rho,
                               env_family_from_string(cfg.rho.family), cfg.rho.env_seed);
        rho = env.rho;
    } else {
        rho.assign(n * n, 0.0);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < n; ++j)
                if (i != j) rho[i * n + j] = cfg.a;
    }
    const std::vector<double> P = reflection_to_routing(rho, n);
    const std::vector<double> back = routing_to_reflection(P, n);
    double err = 0.0;
    for (std::size_t k = 0; k < n * n; ++k) err = std::max(err, std::abs(back[k] - rho[k]));
    sink.write("rho.csv", matrix_csv(rho, n));
    sink.write("routing.csv", matrix_csv(P, n));
    json summary;
    summary["round_trip_max_error"] = err;
    note(verbose, "[jackson-map] n=%zu round_trip_max_error=%g", n, err);
    return summary;
}

// ----------------------------------------------------------------- plumbing

void write_manifest(const Config& cfg, const std::vector<std::string>& artifacts,
                    json summary) {
    json j;
    j["experiment"] = cfg.experiment;
    j["version"] = kToolVersion;
    j["config_hash"] = hex64(cfg.config_hash);
    j["seed"] = cfg.seed;
    json p;
    if (!cfg.n_list.empty()) p["n_list"] = cfg.n_list;
    if (cfg.has_a) p["a"] = cfg.a;
    p["b"] = cfg.b;
    p["sigma"] = cfg.sigma;
    p["T"] = cfg.T;
    p["steps"] = cfg.steps;
    p["ensemble"] = cfg.ensemble;
    p["replications"] = cfg.replications;
    if (!cfg.epsilon_list.empty()) p["epsilon_list"] = cfg.epsilon_list;
    p["tol"] = cfg.tol;
    p["damping"] = cfg.damping;
    if (cfg.has_rho) {
        p["rho"] = {{"family", cfg.rho.family},
                    {"half_width", cfg.rho.half_width},
                    {"eps_rho", cfg.rho.eps_rho}};
        j["env_seed"] = cfg.rho.env_seed;
    }
    j["parameters"] = p;
    j["artifacts"] = artifacts;
    j["summary"] = std::move(summary);
    write_text_file(cfg.out_dir + "/manifest.json", j.dump(2) + "\n");
}

void write_error_manifest(const Config& cfg, const std::string& message, double residual) {
    json j;
    j["experiment"] = cfg.experiment;
    j["version"] = kToolVersion;
    j["config_hash"] = hex64(cfg.config_hash);
    j["seed"] = cfg.seed;
    j["error"] = {{"message", message}, {"residual", residual}};
    write_text_file(cfg.out_dir + "/manifest.json", j.dump(2) + "\n");
}

} // namespace

Config parse_config(const std::string& json_text) {
    json j;
    try {
        j = json::parse(json_text);
    } catch (const std::exception& e) {
        throw ConfigError(std::string("config: ") + e.what());
    }
    if (!j.is_object()) throw ConfigError("config: top level must be an object");

    static const std::set<std::string> known = {
        "experiment", "n",       "n_list",       "a",    "rho",          "b",
        "sigma",      "T",       "steps",        "ensemble", "replications", "epsilon",
        "epsilon_list", "tol",   "damping",      "seed", "out_dir"};
    for (const auto& item : j.items())
        if (!known.count(item.key()))
            throw ConfigError("config: unknown key '" + item.key() + "'");

    Config cfg;
    if (j.contains("experiment")) {
        if (!j["experiment"].is_string())
            throw ConfigError("config: 'experiment' must be a string");
        cfg.experiment = j["experiment"].get<std::string>();
    }

    if (j.contains("n") && j.contains("n_list"))
        throw ConfigError("config: give 'n' or 'n_list', not both");
    if (j.contains("n")) cfg.n_list.push_back(count_field(j["n"], "n", 1, 1000000));
    if (j.contains("n_list")) {
        if (!j["n_list"].is_array() || j["n_list"].empty())
            throw ConfigError("config: 'n_list' must be a nonempty array");
        for (const auto& v : j["n_list"])
            cfg.n_list.push_back(count_field(v, "n_list", 1, 1000000));
    }
    if (j.contains("a")) {
        cfg.a = num_field(j["a"], "a");
        cfg.has_a = true;
    }
    if (j.contains("rho")) {
        parse_rho(j["rho"], cfg.rho);
        cfg.has_rho = true;
    }
    if (j.contains("b")) cfg.b = num_field(j["b"], "b");
    if (j.contains("sigma")) {
        cfg.sigma = num_field(j["sigma"], "sigma");
        if (cfg.sigma < 0) throw ConfigError("config: 'sigma' must be >= 0");
    }
    if (j.contains("T")) {
        cfg.T = num_field(j["T"], "T");
        if (!(cfg.T > 0)) throw ConfigError("config: 'T' must be > 0");
    }
    if (j.contains("steps")) cfg.steps = count_field(j["steps"], "steps", 1, 1000000000);
    if (j.contains("ensemble"))
        cfg.ensemble = count_field(j["ensemble"], "ensemble", 1, 1000000000);
    if (j.contains("replications"))
        cfg.replications = count_field(j["replications"], "replications", 1, 100000000);
    if (j.contains("epsilon") && j.contains("epsilon_list"))
        throw ConfigError("config: give 'epsilon' or 'epsilon_list', not both");
    if (j.contains("epsilon")) {
        const double e = num_field(j["epsilon"], "epsilon");
        if (!(e > 0)) throw ConfigError("config: 'epsilon' must be > 0");
        cfg.epsilon_list.push_back(e);
    }
    if (j.contains("epsilon_list")) {
        if (!j["epsilon_list"].is_array() || j["epsilon_list"].empty())
            throw ConfigError("config: 'epsilon_list' must be a nonempty array");
        for (const auto& v : j["epsilon_list"]) {
            const double e = num_field(v, "epsilon_list");
            if (!(e > 0)) throw ConfigError("config: 'epsilon_list' entries must be > 0");
            cfg.epsilon_list.push_back(e);
        }
    }
    if (j.contains("tol")) {
        cfg.tol = num_field(j["tol"], "tol");
        if (cfg.tol < 0) throw ConfigError("config: 'tol' must be >= 0");
    }
    if (j.contains("damping")) {
        cfg.damping = num_field(j["damping"], "damping");
        if (cfg.damping < 0 || cfg.damping > 1)
            throw ConfigError("config: 'damping' must lie in [0, 1]");
    }
    if (j.contains("seed")) cfg.seed = uint_field(j["seed"], "seed");
    if (j.contains("out_dir")) {
        if (!j["out_dir"].is_string())
            throw ConfigError("config: 'out_dir' must be a string");
        cfg.out_dir = j["out_dir"].get<std::string>();
        if (cfg.out_dir.empty()) throw ConfigError("config: 'out_dir' must be nonempty");
    }

    json canonical = j;
    canonical.erase("out_dir"); // the hash identifies the run, not its location
    cfg.config_hash = fnv1a(canonical.dump());
    return cfg;
}

Config load_config_file(const std::string& path) {
    std::string text;
    try {
        text = read_text_file(path);
    } catch (const std::exception& e) {
        throw ConfigError(std::string("config: ") + e.what());
    }
    return parse_config(text);
}

int run_experiment(const Config& cfg, bool verbose) {
    if (cfg.experiment.empty())
        throw ConfigError("config: set 'experiment' or pick a subcommand");
    static const std::set<std::string> experiments = {
        "check-s",     "simulate",       "mv-solve",     "penalty-sweep",
        "chaos-sweep", "coupling-sweep", "bounds-audit", "jackson-map"};
    if (!experiments.count(cfg.experiment))
        throw ConfigError("config: unknown experiment '" + cfg.experiment + "'");

    std::filesystem::create_directories(cfg.out_dir);
    Sink sink{&cfg, {}};
    try {
        json summary;
        if (cfg.experiment == "check-s") summary = run_check_s(cfg, verbose, sink);
        else if (cfg.experiment == "simulate") summary = run_simulate(cfg, verbose, sink);
        else if (cfg.experiment == "mv-solve") summary = run_mv_solve(cfg, verbose, sink);
        else if (cfg.experiment == "penalty-sweep")
            summary = run_penalty_sweep(cfg, verbose, sink);
        else if (cfg.experiment == "chaos-sweep")
            summary = run_chaos_sweep(cfg, verbose, sink);
        else if (cfg.experiment == "coupling-sweep")
            summary = run_coupling_sweep(cfg, verbose, sink);
        else if (cfg.experiment == "bounds-audit")
            summary = run_bounds_audit(cfg, verbose, sink);
        else summary = run_jackson_map(cfg, verbose, sink);
        write_manifest(cfg, sink.names, std::move(summary));
        return 0;
    } catch (const ConfigError&) {
        throw;
    } catch (const std::invalid_argument& e) {
        // core precondition failures are config problems in disguise
        throw ConfigError(e.what());
    } catch (const SolverError& e) {
        write_error_manifest(cfg, e.what(), e.residual);
        std::fprintf(stderr, "solver failure: %s\n", e.what());
        return 3;
    }
}

} // namespace rbm
