#pragma once
// Empirical measures, transport distances on the line, independence
// diagnostics, and the pathwise inequality audit.

#include <cstddef>
#include <cstdint>
#include <vector>

#include "rbm/mckean_vlasov.hpp"
#include "rbm/srbm.hpp"

namespace rbm {

struct EmpiricalMeasure {
    double t = 0.0;
    std::vector<double> x; // atom coordinates, one per particle / member
    std::vector<double> l;

    std::size_t size() const { return x.size(); }
};

EmpiricalMeasure empirical_measure(const SrbmSolution& sol, double t);
EmpiricalMeasure empirical_measure(const MvSolution& sol, double t);

// mean of the boundary components at time t; the mean-field solution
// reports its own lambda curve (the two agree within the Picard residual)
double mean_boundary(const SrbmSolution& sol, double t);
double mean_boundary(const MvSolution& sol, double t);

// mid-rank order statistics, used to equalize sample counts
std::vector<double> quantile_subsample(std::vector<double> samples, std::size_t m);

// exact W1 on the line for equal counts (mean absolute difference of the
// sorted samples); unequal counts are first reduced by quantile_subsample
double wasserstein1_1d(std::vector<double> u, std::vector<double> v);

// exact planar transport distance with |dx| + |dl| ground cost, assignment
// solved exactly; cross-check tool, capped at 64 atoms per side
double wasserstein1_2d_exact(const EmpiricalMeasure& u, const EmpiricalMeasure& v);

double pearson(const std::vector<double>& u, const std::vector<double>& v);

struct ChaosReport {
    double w1_x = 0.0;
    double w1_l = 0.0;
    double max_abs_corr = 0.0;
    std::size_t pairs_used = 0;
};

// marginal W1 between one n-particle snapshot and the mean-field ensemble,
// plus a pair-sampled correlation estimate (exchangeable particles, so
// sampled (X_i, X_j) pairs stand in for replicated draws of a single pair)
ChaosReport chaos_gap(const SrbmSolution& sol, const MvSolution& mv, double t,
                      std::size_t pair_budget);

struct BoundReport {
    // raw worst margins, positive means the inequality failed by that much
    double viol_r1 = 0.0;
    double viol_r02 = 0.0;
    double viol_r2 = 0.0;
    double viol_x1 = 0.0;
    double viol_x2 = 0.0;
    double max_violation = 0.0;
    bool r_applicable = false; // a >= 0 branch
    bool x_applicable = false; // |a| < 1 branch
    bool approximate = false;  // copied from the solution
};

// flat export row shared by the sweep reports
struct ReportRow {
    std::string metric;
    std::size_t n = 0;
    double a = 0.0;
    double t = 0.0;
    double value = 0.0;
    double se = 0.0;
};

// header "metric,n,a,t,value,stderr"
std::string report_csv(const std::vector<ReportRow>& rows);
std::string report_json(const std::vector<ReportRow>& rows);

// audits, at the final time and window widths {dt, 10 dt}:
//   r1:  L_i(T) <= sup_s W_i(s)^-                    (a >= 0)
//   r02: w(L_i, d) <= w(W_i, d)                      (a >= 0)
//   r2:  <L(T)> <= c_a <max_s |W_s|>                 (|a| < 1)
//   x1:  L_i(T) <= max|W_i| + 2|a| c_a <max|W|>      (|a| < 1)
//   x2:  w(L_i, d) <= w(W_i, d) + 2|a| c_a <w(W,d)>  (|a| < 1)
// with c_a = 1/(1-|a|) and <.> the particle average
BoundReport pathwise_bound_check(const SrbmSolution& sol, double a,
                                 const BrownianEnsemble& W);

} // namespace rbm
