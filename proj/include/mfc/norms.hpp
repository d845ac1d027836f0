#pragma once

#include <cmath>

#include "mfc/grid.hpp"
#include "mfc/paths.hpp"

namespace mfc {

/// Normalized discrete beta-weighted L2 norm of the difference of two
/// particle fields over node range [from, to]:
///   sqrt( sum_k w_k e^{sign*beta*t_k} mean_i |a-b|^2 / sum_k w_k e^{sign*beta*t_k} )
/// with trapezoid weights. The normalization divides out the exponential
/// mass so tolerances stay on the scale of the field values; contraction
/// ratios are unaffected.
inline double beta_norm_diff(const PathMatrix& a, const PathMatrix& b,
                             const TimeGrid& grid, int from, int to,
                             double beta, double sign,
                             const PathMatrix* a2 = nullptr,
                             const PathMatrix* b2 = nullptr) {
    double num = 0.0, den = 0.0;
    const int n = a.particles();
    for (int k = from; k <= to; ++k) {
        const double w = (k == from || k == to) ? 0.5 : 1.0;
        const double weight = w * std::exp(sign * beta * grid.time(k));
        double ms = 0.0;
        const auto ca = a.column(k);
        const auto cb = b.column(k);
        for (int i = 0; i < n; ++i) {
            const double d = ca[i] - cb[i];
            ms += d * d;
        }
        if (a2 && b2) {
            const auto ca2 = a2->column(k);
            const auto cb2 = b2->column(k);
            for (int i = 0; i < n; ++i) {
                const double d = ca2[i] - cb2[i];
                ms += d * d;
            }
        }
        num += weight * (ms / n);
        den += weight;
    }
    return std::sqrt(num / den);
}

} // namespace mfc
