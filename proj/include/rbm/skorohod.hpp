#pragma once
// One-dimensional Skorohod map on a grid and the boundary-property
// (complementarity) residual.  Everything else reflects through these.

#include <utility>

#include "rbm/paths.hpp"

namespace rbm {

// x = w + l with l(t_k) = max_{j<=k} max(-w(t_j), 0).  The returned x is
// nonnegative at every grid point in exact floating point: wherever the
// running max is active, l holds literally -w of the attaining point.
std::pair<Path, Path> reflect_1d(const Path& w);

// in-place core used by the solvers: l[k] and x[k] from driver values
void reflect_values(const std::vector<double>& w, std::vector<double>& x,
                    std::vector<double>& l);

// sum of x at the grid point of each l-increment, i.e. the discrete
// integral of x dl.  Zero exactly for reflect_1d outputs: l only moves at
// points where x is exactly 0.
double complementarity_residual(const Path& x, const Path& l);

} // namespace rbm
