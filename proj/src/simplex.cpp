#include "rbm/simplex.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace rbm {

LpResult simplex_max(const std::vector<double>& A, const std::vector<double>& b,
                     const std::vector<double>& c, std::size_t m, std::size_t n) {
    if (A.size() != m * n || b.size() != m || c.size() != n)
        throw std::invalid_argument("simplex_max: dimension mismatch");
    for (double bi : b)
        if (bi < 0.0) throw std::invalid_argument("simplex_max: needs b >= 0");

    const std::size_t cols = n + m + 1; // variables, slacks, rhs
    std::vector<double> T((m + 1) * cols, 0.0);
    auto at = [&](std::size_t r, std::size_t col) -> double& { return T[r * cols + col]; };

    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = 0; j < n; ++j) at(i, j) = A[i * n + j];
        at(i, n + i) = 1.0;
        at(i, cols - 1) = b[i];
    }
    for (std::size_t j = 0; j < n; ++j) at(m, j) = -c[j];

    std::vector<std::size_t> basis(m);
    for (std::size_t i = 0; i < m; ++i) basis[i] = n + i;

    const double eps = 1e-12;
    for (std::size_t iter = 0; iter < 100000; ++iter) {
        // Bland: entering = lowest-index column with negative reduced cost
        std::size_t enter = cols;
        for (std::size_t j = 0; j + 1 < cols; ++j) {
            if (at(m, j) < -eps) { enter = j; break; }
        }
        if (enter == cols) {
            LpResult res{LpResult::Status::optimal, at(m, cols - 1), std::vector<double>(n, 0.0)};
            for (std::size_t i = 0; i < m; ++i)
                if (basis[i] < n) res.y[basis[i]] = at(i, cols - 1);
            return res;
        }
        // ratio test; ties broken by lowest basis index (Bland again)
        std::size_t leave = m;
        double best = std::numeric_limits<double>::infinity();
        for (std::size_t i = 0; i < m; ++i) {
            const double a = at(i, enter);
            if (a > eps) {
                const double r = at(i, cols - 1) / a;
                if (r < best - eps || (std::abs(r - best) <= eps && (leave == m || basis[i] < basis[leave]))) {
                    best = r;
                    leave = i;
                }
            }
        }
        if (leave == m) return {LpResult::Status::unbounded, 0.0, {}};

        const double piv = at(leave, enter);
        for (std::size_t j = 0; j < cols; ++j) at(leave, j) /= piv;
        for (std::size_t r = 0; r <= m; ++r) {
            if (r == leave) continue;
            const double f = at(r, enter);
            if (f == 0.0) continue;
            for (std::size_t j = 0; j < cols; ++j) at(r, j) -= f * at(leave, j);
        }
        basis[leave] = enter;
    }
    throw std::runtime_error("simplex_max: iteration cap hit");
}

} // namespace rbm
