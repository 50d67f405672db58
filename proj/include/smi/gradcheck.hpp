#pragma once

#include <algorithm>
#include <cmath>

#include "smi/types.hpp"

namespace smi {

/// Central-difference gradient of a scalar function.
template <typename F>
Vector finite_difference_gradient(F&& f, const Vector& x, double step = 1e-5) {
    Vector g(x.size());
    Vector probe = x;
    for (Index j = 0; j < x.size(); ++j) {
        const double orig = probe(j);
        probe(j) = orig + step;
        const double up = f(probe);
        probe(j) = orig - step;
        const double down = f(probe);
        probe(j) = orig;
        g(j) = (up - down) / (2.0 * step);
    }
    return g;
}

/// Worst coordinate error |g - fd| / max(1, |fd|).
inline double gradient_relative_error(const Vector& analytic, const Vector& numeric) {
    if (analytic.size() != numeric.size()) throw InvalidInput("gradient sizes differ");
    double worst = 0.0;
    for (Index j = 0; j < analytic.size(); ++j)
        worst = std::max(worst, std::abs(analytic(j) - numeric(j)) / std::max(1.0, std::abs(numeric(j))));
    return worst;
}

}  // namespace smi
