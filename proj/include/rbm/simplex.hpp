#pragma once
// Dense tableau simplex for the tiny margin-maximization LPs behind the
// completely-S check (at most ~20 variables / ~40 rows).  Bland's rule,
// so degenerate bases (our b has zeros) cannot cycle.

#include <vector>

namespace rbm {

struct LpResult {
    enum class Status { optimal, unbounded } status;
    double value = 0.0;
    std::vector<double> y;
};

// maximize c'y subject to A y <= b, y >= 0, with b >= 0 so the slack
// basis is feasible.  A is row-major m x n.
LpResult simplex_max(const std::vector<double>& A, const std::vector<double>& b,
                     const std::vector<double>& c, std::size_t m, std::size_t n);

} // namespace rbm
