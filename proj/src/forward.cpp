#include "mfc/forward.hpp"

#include <cmath>

#include "mfc/norms.hpp"
#include "mfc/prime_expectation.hpp"

namespace mfc {

namespace {

void validate_entry(const CoefficientSet& coeffs, const TimeGrid& grid,
                    const ForwardConfig& cfg, const BoundaryData& boundary,
                    const RandomSource& rng) {
    if (cfg.n_particles < 2) throw config_error("n_particles must be >= 2");
    if (cfg.picard_tol < 0) throw config_error("picard_tol must be >= 0");
    if (!coeffs.b && !coeffs.sigma) {
        throw config_error("forward solve needs b or sigma");
    }
    if (!boundary.has_initial()) {
        throw config_error("forward solve needs an initial segment");
    }
    if (boundary.initial_segment.particles() != cfg.n_particles) {
        throw config_error("initial segment particle count mismatch");
    }
    if (boundary.initial_segment.nodes() < grid.zero_index() + 1) {
        throw config_error("initial segment does not cover [-delta, 0]");
    }
    if (cfg.validate_coeffs) {
        const auto origin = probe_origin_bound(coeffs, grid.horizon_T());
        if (!origin.passed) throw config_error(origin.detail);
        const auto lip = probe_lipschitz(coeffs, rng, 16);
        if (!lip.passed) throw config_error(lip.detail);
    }
}

void copy_initial(PathMatrix& x, const BoundaryData& boundary,
                  const TimeGrid& grid) {
    for (int k = 0; k <= grid.zero_index(); ++k) {
        const auto src = boundary.initial_segment.column(k);
        auto dst = x.column(k);
        for (std::size_t i = 0; i < src.size(); ++i) dst[i] = src[i];
    }
}

// One Euler step writing column k+1 of `out`, with state/law arguments read
// from `state` (equal to `out` for the direct scheme, the frozen iterate in
// Picard mode).
void euler_step(const CoefficientSet& coeffs, const ControlProcess& control,
                const TimeGrid& grid, const BrownianDriver& noise,
                const PathMatrix& state, PathMatrix& out, int k) {
    const int n = out.particles();
    const int lag = grid.delay_steps();
    const double t = grid.time(k);
    const double dt = grid.dt();
    const EmpiricalLaw mu = EmpiricalLaw::view(state.column(k));
    const EmpiricalLaw mu_d = EmpiricalLaw::view(state.column(k - lag));
    const auto cur = state.column(k);
    const auto lagged = state.column(k - lag);
    const auto base = out.column(k);
    auto next = out.column(k + 1);
    for (int i = 0; i < n; ++i) {
        const double v = control.value(i, k);
        const double v_d = control.value(i, k - lag);
        double drift = 0.0, diff = 0.0;
        if (coeffs.b) drift = coeffs.b(t, cur[i], lagged[i], mu, mu_d, v, v_d);
        if (coeffs.sigma) {
            diff = coeffs.sigma(t, cur[i], lagged[i], mu, mu_d, v, v_d);
        }
        next[i] = base[i] + drift * dt + diff * noise.increment(i, k);
    }
    check_finite_column(out, k + 1, "forward state");
}

} // namespace

ForwardSolution simulate_gmfdsde(const CoefficientSet& coeffs,
                                 const BoundaryData& boundary,
                                 const ControlProcess& control,
                                 const TimeGrid& grid,
                                 const ForwardConfig& cfg,
                                 const RandomSource& rng) {
    validate_entry(coeffs, grid, cfg, boundary, rng);
    ForwardSolution sol{grid, PathMatrix(cfg.n_particles, grid.n_nodes()),
                        sample_brownian(grid, cfg.n_particles, 1, rng),
                        {}};
    copy_initial(sol.x, boundary, grid);
    for (int k = grid.zero_index(); k < grid.horizon_T_index(); ++k) {
        euler_step(coeffs, control, grid, sol.noise, sol.x, sol.x, k);
    }
    return sol;
}

ForwardSolution picard_solve_forward(const CoefficientSet& coeffs,
                                     const BoundaryData& boundary,
                                     const ControlProcess& control,
                                     const TimeGrid& grid,
                                     const ForwardConfig& cfg,
                                     const RandomSource& rng) {
    validate_entry(coeffs, grid, cfg, boundary, rng);
    const double beta = cfg.beta_forward > 0.0
                            ? cfg.beta_forward
                            : 1.0 + 4.0 * coeffs.lipschitz_C * coeffs.lipschitz_C;

    ForwardSolution sol{grid, PathMatrix(cfg.n_particles, grid.n_nodes()),
                        sample_brownian(grid, cfg.n_particles, 1, rng),
                        {}};

    // Start from the initial value frozen in time.
    PathMatrix prev(cfg.n_particles, grid.n_nodes());
    copy_initial(prev, boundary, grid);
    for (int k = grid.zero_index(); k < grid.horizon_T_index(); ++k) {
        const auto base = prev.column(grid.zero_index());
        auto col = prev.column(k + 1);
        for (int i = 0; i < cfg.n_particles; ++i) col[i] = base[i];
    }

    copy_initial(sol.x, boundary, grid);
    bool converged = false;
    for (int iter = 0; iter < cfg.picard_max_iter; ++iter) {
        for (int k = grid.zero_index(); k < grid.horizon_T_index(); ++k) {
            euler_step(coeffs, control, grid, sol.noise, prev, sol.x, k);
        }
        const double norm = beta_norm_diff(sol.x, prev, grid, 0,
                                           grid.horizon_T_index(), beta, -1.0);
        sol.picard_norms.push_back(norm);
        if (cfg.picard_tol > 0.0 && norm < cfg.picard_tol) {
            converged = true;
            break;
        }
        std::swap(prev, sol.x);
        copy_initial(sol.x, boundary, grid);
    }
    if (cfg.picard_tol > 0.0 && !converged) {
        throw nonconvergence_error("forward Picard iteration did not converge",
                                   sol.picard_norms);
    }
    return sol;
}

ItoReport verify_ito_formula(const CoefficientSet& coeffs,
                             const MeasureFunctional& functional,
                             const ForwardSolution& solution, double x_probe,
                             int interaction_budget) {
    if (!functional.value || !functional.dx || !functional.dxx) {
        throw config_error("functional needs value, dx and dxx evaluators");
    }
    if (solution.grid.delay_steps() != 0) {
        throw config_error("generator check requires a delay-free solution");
    }
    const TimeGrid& grid = solution.grid;
    const int n = solution.x.particles();
    const int horizon = grid.horizon_T_index();
    const double dt = grid.dt();
    const int m = std::min(interaction_budget, n);

    std::vector<double> xx(n, x_probe);       // probe ensemble
    std::vector<double> integ(n, 0.0), stoch(n, 0.0);

    ItoReport report;
    report.node_residuals.resize(horizon + 1, 0.0);

    const EmpiricalLaw mu0 = solution.law_at(grid.zero_index());
    const double phi0 = functional.value(x_probe, mu0);

    std::vector<int> sub(m);
    const bool with_mu = static_cast<bool>(functional.dmu);
    const bool with_dymu = static_cast<bool>(functional.dy_dmu);

    for (int k = grid.zero_index(); k <= horizon; ++k) {
        const EmpiricalLaw mu = solution.law_at(k);
        const double t = grid.time(k);

        double resid_sum = 0.0;
        for (int i = 0; i < n; ++i) {
            const double lhs = functional.value(xx[i], mu) - phi0;
            resid_sum += lhs - (integ[i] + stoch[i]);
        }
        report.node_residuals[k - grid.zero_index()] = resid_sum / n;

        if (k == horizon) break;

        const auto atoms = solution.x.column(k);
        for (int i = 0; i < n; ++i) {
            double drift = 0.0, diff = 0.0;
            if (coeffs.b) drift = coeffs.b(t, xx[i], xx[i], mu, mu, 0.0, 0.0);
            if (coeffs.sigma) {
                diff = coeffs.sigma(t, xx[i], xx[i], mu, mu, 0.0, 0.0);
            }
            double gen = functional.dx(xx[i], mu) * drift +
                         0.5 * functional.dxx(xx[i], mu) * diff * diff;
            if (with_mu || with_dymu) {
                seeded_subsample(n, m, solution.noise.rng(),
                                 {static_cast<std::uint32_t>(k),
                                  static_cast<std::uint32_t>(i)},
                                 sub);
                double acc = 0.0;
                for (int j : sub) {
                    const double y = atoms[j];
                    double bj = 0.0, sj = 0.0;
                    if (coeffs.b) bj = coeffs.b(t, y, y, mu, mu, 0.0, 0.0);
                    if (coeffs.sigma) {
                        sj = coeffs.sigma(t, y, y, mu, mu, 0.0, 0.0);
                    }
                    if (with_mu) acc += functional.dmu(xx[i], mu, y) * bj;
                    if (with_dymu) {
                        acc += 0.5 * functional.dy_dmu(xx[i], mu, y) * sj * sj;
                    }
                }
                gen += acc / m;
            }
            const double db = solution.noise.increment(i, k);
            integ[i] += gen * dt;
            stoch[i] += functional.dx(xx[i], mu) * diff * db;
            xx[i] += drift * dt + diff * db;
        }
    }
    for (double r : report.node_residuals) {
        report.max_mean_residual = std::max(report.max_mean_residual, std::abs(r));
    }
    return report;
}

} // namespace mfc
