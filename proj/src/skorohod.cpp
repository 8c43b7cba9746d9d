#include "rbm/skorohod.hpp"

#include <stdexcept>

namespace rbm {

void reflect_values(const std::vector<double>& w, std::vector<double>& x,
                    std::vector<double>& l) {
    const std::size_t K = w.size();
    x.resize(K);
    l.resize(K);
    double run = 0.0; // running sup of (-w)^+
    for (std::size_t k = 0; k < K; ++k) {
        const double neg = -w[k];
        if (neg > run) run = neg;
        l[k] = run;
        x[k] = w[k] + run;
    }
}

std::pair<Path, Path> reflect_1d(const Path& w) {
    if (w.v.empty()) throw std::invalid_argument("reflect_1d: empty path");
    if (w.v[0] < 0.0) throw std::invalid_argument("reflect_1d: driver must start nonnegative");
    Path x = make_path(w.grid), l = make_path(w.grid);
    reflect_values(w.v, x.v, l.v);
    return {std::move(x), std::move(l)};
}

double complementarity_residual(const Path& x, const Path& l) {
    if (!(x.grid == l.grid) || x.v.size() != l.v.size())
        throw std::invalid_argument("complementarity_residual: mismatched grids");
    for (std::size_t k = 1; k < l.v.size(); ++k)
        if (l.v[k] < l.v[k - 1])
            throw std::invalid_argument("complementarity_residual: l must be nondecreasing");
    double s = 0.0;
    for (std::size_t k = 1; k < l.v.size(); ++k)
        s += x.v[k] * (l.v[k] - l.v[k - 1]);
    return s;
}

} // namespace rbm
