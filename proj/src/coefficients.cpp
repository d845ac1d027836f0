#include "mfc/coefficients.hpp"

#include <cmath>
#include <vector>

#include "mfc/wasserstein.hpp"

namespace mfc {

namespace {

EmpiricalLaw probe_law(const RandomSource& rng, std::uint32_t tag, int n,
                       double shift, double scale) {
    std::vector<double> atoms(n);
    for (int i = 0; i < n; ++i) {
        atoms[i] = shift + scale * rng.normal(StreamDomain::probe, tag,
                                              static_cast<std::uint32_t>(i));
    }
    return EmpiricalLaw(std::move(atoms), 1);
}

void note(ProbeReport& r, double err, double tol, const char* what) {
    r.worst_relative_error = std::max(r.worst_relative_error, err);
    if (err > tol && r.passed) {
        r.passed = false;
        r.detail = what;
    }
}

} // namespace

ProbeReport verify_partials(const CoefficientSet& coeffs,
                            const RandomSource& rng, int n_probes,
                            double tol) {
    ProbeReport report;
    const double step = 1e-5;
    for (int p = 0; p < n_probes; ++p) {
        const auto draw = [&rng, p](std::uint32_t slot) {
            return rng.normal(StreamDomain::probe,
                              static_cast<std::uint32_t>(p) + 1000u, slot);
        };
        const double t = 0.5 + 0.25 * draw(0);
        const double x = draw(1), xd = draw(2), v = 0.5 * draw(3),
                     vd = 0.5 * draw(4);
        const EmpiricalLaw mu = probe_law(rng, 2000u + p, 32, draw(5), 1.0);
        const EmpiricalLaw mud = probe_law(rng, 3000u + p, 32, draw(6), 1.0);

        struct Slot {
            const CoefficientSet::StateFn* fn;
            const CoefficientSet::StateFn* partial;
            int arg;  // 0=x, 1=xd, 2=v, 3=vd
            const char* name;
        };
        const Slot state_slots[] = {
            {&coeffs.b, &coeffs.b_x, 0, "b_x"},
            {&coeffs.b, &coeffs.b_xd, 1, "b_xd"},
            {&coeffs.b, &coeffs.b_v, 2, "b_v"},
            {&coeffs.b, &coeffs.b_vd, 3, "b_vd"},
            {&coeffs.sigma, &coeffs.sigma_x, 0, "sigma_x"},
            {&coeffs.sigma, &coeffs.sigma_xd, 1, "sigma_xd"},
            {&coeffs.sigma, &coeffs.sigma_v, 2, "sigma_v"},
            {&coeffs.sigma, &coeffs.sigma_vd, 3, "sigma_vd"},
        };
        for (const auto& s : state_slots) {
            if (!*s.fn) continue;
            const auto eval = [&](double bump) {
                double a[4] = {x, xd, v, vd};
                a[s.arg] += bump;
                return (*s.fn)(t, a[0], a[1], mu, mud, a[2], a[3]);
            };
            const double fd = (eval(step) - eval(-step)) / (2.0 * step);
            const double an =
                *s.partial ? (*s.partial)(t, x, xd, mu, mud, v, vd) : 0.0;
            note(report, std::abs(fd - an) / (1.0 + std::abs(an)), tol, s.name);
        }

        if (coeffs.h) {
            struct CostSlot {
                const CoefficientSet::CostFn* partial;
                int arg;  // 0=x, 1=v, 2=vd
                const char* name;
            };
            const CostSlot cost_slots[] = {
                {&coeffs.h_x, 0, "h_x"},
                {&coeffs.h_v, 1, "h_v"},
                {&coeffs.h_vd, 2, "h_vd"},
            };
            for (const auto& s : cost_slots) {
                const auto eval = [&](double bump) {
                    double a[3] = {x, v, vd};
                    a[s.arg] += bump;
                    return coeffs.h(t, a[0], mu, a[1], a[2]);
                };
                const double fd = (eval(step) - eval(-step)) / (2.0 * step);
                const double an =
                    *s.partial ? (*s.partial)(t, x, mu, v, vd) : 0.0;
                note(report, std::abs(fd - an) / (1.0 + std::abs(an)), tol,
                     s.name);
            }
        }
        if (coeffs.Phi) {
            const double fd = (coeffs.Phi(x + step, mu) - coeffs.Phi(x - step, mu)) /
                              (2.0 * step);
            const double an = coeffs.Phi_x ? coeffs.Phi_x(x, mu) : 0.0;
            note(report, std::abs(fd - an) / (1.0 + std::abs(an)), tol, "Phi_x");
        }
    }
    return report;
}

ProbeReport probe_lipschitz(const CoefficientSet& coeffs,
                            const RandomSource& rng, int n_probes) {
    ProbeReport report;
    const double C = coeffs.lipschitz_C;
    for (int p = 0; p < n_probes; ++p) {
        const auto draw = [&rng, p](std::uint32_t slot) {
            return rng.normal(StreamDomain::probe,
                              static_cast<std::uint32_t>(p) + 9000u, slot);
        };
        const double t = 0.4 + 0.2 * draw(0);
        const double x = draw(1), xd = draw(2);
        const double x2 = draw(3), xd2 = draw(4);
        const double v = 0.3 * draw(5), vd = 0.3 * draw(6);
        const EmpiricalLaw mu = probe_law(rng, 12000u + p, 32, draw(7), 1.0);
        const EmpiricalLaw mu2 = probe_law(rng, 13000u + p, 32, draw(8), 1.0);
        const EmpiricalLaw mud = probe_law(rng, 14000u + p, 32, draw(9), 1.0);
        const EmpiricalLaw mud2 = probe_law(rng, 15000u + p, 32, draw(10), 1.0);

        const double dist = std::abs(x - x2) + std::abs(xd - xd2) +
                            w2_distance_1d(mu, mu2) + w2_distance_1d(mud, mud2);
        for (const auto* fn : {&coeffs.b, &coeffs.sigma}) {
            if (!*fn) continue;
            const double d1 = (*fn)(t, x, xd, mu, mud, v, vd);
            const double d2 = (*fn)(t, x2, xd2, mu2, mud2, v, vd);
            const double quot = std::abs(d1 - d2);
            const double bound = C * dist * (1.0 + 1e-6) + 1e-12;
            if (quot > bound) {
                report.passed = false;
                report.detail = fn == &coeffs.b
                                    ? "b violates declared Lipschitz bound"
                                    : "sigma violates declared Lipschitz bound";
            }
            if (dist > 1e-12) {
                report.worst_relative_error =
                    std::max(report.worst_relative_error, quot / dist);
            }
        }
    }
    return report;
}

ProbeReport probe_origin_bound(const CoefficientSet& coeffs, double t_max) {
    ProbeReport report;
    const EmpiricalLaw zero = EmpiricalLaw({0.0, 0.0}, 1);
    for (int i = 0; i <= 8; ++i) {
        const double t = t_max * i / 8.0;
        for (const auto* fn : {&coeffs.b, &coeffs.sigma}) {
            if (!*fn) continue;
            const double val = (*fn)(t, 0.0, 0.0, zero, zero, 0.0, 0.0);
            if (!std::isfinite(val)) {
                report.passed = false;
                report.detail = "coefficient not finite at the origin";
            }
        }
    }
    return report;
}

} // namespace mfc
