#include "mfc/lions.hpp"

#include <cmath>

namespace mfc {

LionsCheckReport check_lions_derivative(
    const std::function<double(const EmpiricalLaw&)>& f,
    const MeasureDerivative& df, const EmpiricalLaw& mu, int directions,
    const RandomSource& rng, std::span<const double> epsilons) {
    static const double default_eps[3] = {1e-2, 1e-3, 1e-4};
    if (epsilons.empty()) epsilons = std::span<const double>(default_eps, 3);

    const int n = mu.size();
    const int dim = mu.dim();
    LionsCheckReport report;
    report.epsilons.assign(epsilons.begin(), epsilons.end());

    const double f0 = f(mu);
    if (!std::isfinite(f0)) {
        report.probe_failed = true;
        return report;
    }

    std::vector<double> eta(static_cast<std::size_t>(n) * dim);
    std::vector<double> perturbed(static_cast<std::size_t>(n) * dim);
    std::vector<double> kernel(dim);

    std::vector<double> per_direction_pairing(directions);
    for (int d = 0; d < directions; ++d) {
        double norm2 = 0.0;
        for (int i = 0; i < n; ++i) {
            for (int c = 0; c < dim; ++c) {
                const double g = rng.normal(StreamDomain::direction,
                                            static_cast<std::uint32_t>(i),
                                            static_cast<std::uint32_t>(d),
                                            static_cast<std::uint32_t>(c));
                eta[static_cast<std::size_t>(i) * dim + c] = g;
                norm2 += g * g;
            }
        }
        // Normalize to unit L2 norm: (1/N) sum |eta_i|^2 = 1.
        const double scale = 1.0 / std::sqrt(norm2 / n);
        for (auto& v : eta) v *= scale;

        double pairing = 0.0;
        for (int i = 0; i < n; ++i) {
            df.evaluator(mu, mu.atom(i), kernel);
            for (int c = 0; c < dim; ++c) {
                pairing += kernel[c] * eta[static_cast<std::size_t>(i) * dim + c];
            }
        }
        pairing /= n;
        per_direction_pairing[d] = pairing;

        for (double eps : epsilons) {
            for (std::size_t idx = 0; idx < eta.size(); ++idx) {
                perturbed[idx] = mu.atoms()[idx] + eps * eta[idx];
            }
            double fd;
            try {
                const EmpiricalLaw nu(perturbed, dim);
                fd = (f(nu) - f0) / eps;
            } catch (const domain_error&) {
                report.probe_failed = true;
                return report;
            }
            if (!std::isfinite(fd)) {
                report.probe_failed = true;
                return report;
            }
            const double err = std::abs(fd - pairing) / (1.0 + std::abs(pairing));
            report.errors.push_back(err);
        }
    }

    // Errors are stored direction-major; headline value is the smallest eps.
    const int ne = static_cast<int>(epsilons.size());
    for (int d = 0; d < directions; ++d) {
        report.max_relative_error =
            std::max(report.max_relative_error, report.errors[d * ne + ne - 1]);
    }

    // Slope of log(max-over-directions error) against log(eps).
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    int pts = 0;
    for (int e = 0; e < ne; ++e) {
        double worst = 0.0;
        for (int d = 0; d < directions; ++d) {
            worst = std::max(worst, report.errors[d * ne + e]);
        }
        if (worst < 1e-14) continue;   // at rounding level, uninformative
        const double lx = std::log(epsilons[e]);
        const double ly = std::log(worst);
        sx += lx; sy += ly; sxx += lx * lx; sxy += lx * ly;
        ++pts;
    }
    if (pts >= 2) {
        report.error_slope = (pts * sxy - sx * sy) / (pts * sxx - sx * sx);
    } else {
        report.error_slope = std::nan("");
    }
    return report;
}

} // namespace mfc
