#include "mfc/wasserstein.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

namespace mfc {

namespace {

double w2_sorted(std::vector<double>& a, std::vector<double>& b) {
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    const int n = static_cast<int>(a.size());
    const int m = static_cast<int>(b.size());
    if (n == m) {
        double s = 0.0;
        for (int i = 0; i < n; ++i) {
            const double d = a[i] - b[i];
            s += d * d;
        }
        return std::sqrt(s / n);
    }
    // Exact integral of (F_a^{-1}(u) - F_b^{-1}(u))^2 over u in (0,1):
    // both inverses are step functions with breakpoints i/n and j/m.
    double s = 0.0;
    double u = 0.0;
    int i = 0, j = 0;
    while (i < n && j < m) {
        const double ua = static_cast<double>(i + 1) / n;
        const double ub = static_cast<double>(j + 1) / m;
        const double next = std::min(ua, ub);
        const double d = a[i] - b[j];
        s += d * d * (next - u);
        u = next;
        if (ua <= next + 1e-18) ++i;
        if (ub <= next + 1e-18) ++j;
    }
    return std::sqrt(s);
}

} // namespace

double w2_distance_1d(const EmpiricalLaw& p, const EmpiricalLaw& q) {
    if (p.dim() != 1 || q.dim() != 1) {
        throw dispatch_error(
            "w2_distance_1d requires scalar laws; use w2_distance_sliced");
    }
    std::vector<double> a(p.atoms().begin(), p.atoms().end());
    std::vector<double> b(q.atoms().begin(), q.atoms().end());
    return w2_sorted(a, b);
}

double w2_distance_sliced(const EmpiricalLaw& p, const EmpiricalLaw& q,
                          int n_projections, const RandomSource& rng) {
    if (p.dim() != q.dim()) throw domain_error("sliced W2: dimension mismatch");
    if (n_projections < 1) throw domain_error("need at least one projection");
    const int m = p.dim();
    if (m == 1) return w2_distance_1d(p, q);

    const int np = p.size(), nq = q.size();
    std::vector<double> a(np), b(nq), dir(m);
    double acc = 0.0;
    for (int l = 0; l < n_projections; ++l) {
        if (m == 2) {
            // Stratified angles with one seeded offset.
            const double offset =
                rng.uniform(StreamDomain::projection, 0, 0, 0, 0);
            const double theta =
                2.0 * 3.14159265358979323846 * (l + offset) / n_projections;
            dir[0] = std::cos(theta);
            dir[1] = std::sin(theta);
        } else {
            double norm2 = 0.0;
            for (int c = 0; c < m; ++c) {
                dir[c] = rng.normal(StreamDomain::projection,
                                    static_cast<std::uint32_t>(l), 0,
                                    static_cast<std::uint32_t>(c));
                norm2 += dir[c] * dir[c];
            }
            const double inv = 1.0 / std::sqrt(norm2);
            for (int c = 0; c < m; ++c) dir[c] *= inv;
        }
        for (int i = 0; i < np; ++i) {
            const auto x = p.atom(i);
            double s = 0.0;
            for (int c = 0; c < m; ++c) s += x[c] * dir[c];
            a[i] = s;
        }
        for (int i = 0; i < nq; ++i) {
            const auto x = q.atom(i);
            double s = 0.0;
            for (int c = 0; c < m; ++c) s += x[c] * dir[c];
            b[i] = s;
        }
        const double w = w2_sorted(a, b);
        acc += w * w;
    }
    return std::sqrt(m * acc / n_projections);
}

} // namespace mfc
