#include "mfc/control.hpp"

#include <cmath>
#include <memory>

#include "mfc/prime_expectation.hpp"

namespace mfc {

CostEstimate cost_functional(const CoefficientSet& coeffs,
                             const ForwardSolution& solution,
                             const ControlProcess& control) {
    const TimeGrid& grid = solution.grid;
    const int n = solution.x.particles();
    if (solution.x.nodes() != grid.n_nodes()) {
        throw config_error("cost functional: solution grid mismatch");
    }
    if (control.matrix_backed() &&
        control.matrix().nodes() != grid.n_nodes()) {
        throw config_error("cost functional: control grid mismatch");
    }
    const int lag = grid.delay_steps();
    const double dt = grid.dt();
    const int horizon = grid.horizon_T_index();

    std::vector<double> per_particle(n, 0.0);
    if (coeffs.h) {
        for (int k = grid.zero_index(); k <= horizon; ++k) {
            const double w =
                (k == grid.zero_index() || k == horizon) ? 0.5 : 1.0;
            const double t = grid.time(k);
            const EmpiricalLaw mu = solution.law_at(k);
            const auto xc = solution.x.column(k);
            for (int i = 0; i < n; ++i) {
                per_particle[i] += w * dt *
                                   coeffs.h(t, xc[i], mu, control.value(i, k),
                                            control.value(i, k - lag));
            }
        }
    }
    if (coeffs.Phi) {
        const EmpiricalLaw mu_T = solution.law_at(horizon);
        const auto xt = solution.x.column(horizon);
        for (int i = 0; i < n; ++i) {
            per_particle[i] += coeffs.Phi(xt[i], mu_T);
        }
    }
    double s = 0.0, s2 = 0.0;
    for (double v : per_particle) {
        s += v;
        s2 += v * v;
    }
    CostEstimate est;
    est.value = s / n;
    est.std_error = std::sqrt(std::max(s2 / n - est.value * est.value, 0.0) / n);
    return est;
}

namespace {

double sup_sq_distance(const PathMatrix& a, const PathMatrix& b,
                       const TimeGrid& grid) {
    const int n = a.particles();
    std::vector<double> sup(n, 0.0);
    for (int k = grid.zero_index(); k <= grid.horizon_T_index(); ++k) {
        const auto ca = a.column(k);
        const auto cb = b.column(k);
        for (int i = 0; i < n; ++i) {
            sup[i] = std::max(sup[i], std::abs(ca[i] - cb[i]));
        }
    }
    double s = 0.0;
    for (double v : sup) s += v * v;
    return s / n;
}

double loglog_slope(std::span<const double> x, std::span<const double> y) {
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    int n = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        if (y[i] <= 0.0) continue;
        const double lx = std::log(x[i]);
        const double ly = std::log(y[i]);
        sx += lx; sy += ly; sxx += lx * lx; sxy += lx * ly;
        ++n;
    }
    if (n < 2) return std::nan("");
    return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

} // namespace

PerturbationReport perturbation_convergence_check(
    const CoefficientSet& coeffs, const BoundaryData& boundary,
    const ControlProcess& u, const ControlProcess& v, const TimeGrid& grid,
    const ForwardConfig& cfg, const RandomSource& rng,
    std::span<const double> thetas) {
    for (std::size_t i = 1; i < thetas.size(); ++i) {
        if (thetas[i] >= thetas[i - 1]) {
            throw domain_error("thetas must decrease to 0");
        }
    }
    const ForwardSolution base =
        simulate_gmfdsde(coeffs, boundary, u, grid, cfg, rng);
    ForwardConfig quiet = cfg;
    quiet.validate_coeffs = false;

    PerturbationReport report;
    report.thetas.assign(thetas.begin(), thetas.end());
    for (double theta : thetas) {
        const ForwardSolution pert = simulate_gmfdsde(
            coeffs, boundary, perturb_control(u, v, theta), grid, quiet, rng);
        report.sup_errors.push_back(sup_sq_distance(pert.x, base.x, grid));
    }
    for (std::size_t i = 1; i < report.sup_errors.size(); ++i) {
        if (report.sup_errors[i] > report.sup_errors[i - 1] * (1.0 + 1e-9)) {
            report.monotone = false;
        }
    }
    report.slope = loglog_slope(report.thetas, report.sup_errors);
    return report;
}

VariationalSolution solve_variational(const CoefficientSet& coeffs,
                                      const ForwardSolution& base,
                                      const ControlProcess& u,
                                      const ControlProcess& v,
                                      const TimeGrid& grid,
                                      const ForwardConfig& cfg) {
    const int n = base.x.particles();
    const int lag = grid.delay_steps();
    const double dt = grid.dt();
    const int budget = std::min(cfg.interaction_budget, n);

    VariationalSolution sol{grid, PathMatrix(n, grid.n_nodes())};
    PathMatrix& K = sol.K;

    std::vector<int> sub(budget);
    for (int k = grid.zero_index(); k < grid.horizon_T_index(); ++k) {
        const double t = grid.time(k);
        const EmpiricalLaw mu = base.law_at(k);
        const EmpiricalLaw mu_d = base.law_at(k - lag);
        const auto xc = base.x.column(k);
        const auto xd = base.x.column(k - lag);
        const auto kc = K.column(k);
        const auto kd = K.column(k - lag);
        auto kn = K.column(k + 1);
        const bool mu_terms = coeffs.b_mu || coeffs.sigma_mu ||
                              coeffs.b_mud || coeffs.sigma_mud;
        for (int i = 0; i < n; ++i) {
            const double ui = u.value(i, k);
            const double udi = u.value(i, k - lag);
            const double dv = v.value(i, k) - ui;
            const double dvd = v.value(i, k - lag) - udi;
            double drift = 0.0, diff = 0.0;
            if (coeffs.b_x) drift += coeffs.b_x(t, xc[i], xd[i], mu, mu_d, ui, udi) * kc[i];
            if (coeffs.b_xd) drift += coeffs.b_xd(t, xc[i], xd[i], mu, mu_d, ui, udi) * kd[i];
            if (coeffs.b_v) drift += coeffs.b_v(t, xc[i], xd[i], mu, mu_d, ui, udi) * dv;
            if (coeffs.b_vd) drift += coeffs.b_vd(t, xc[i], xd[i], mu, mu_d, ui, udi) * dvd;
            if (coeffs.sigma_x) diff += coeffs.sigma_x(t, xc[i], xd[i], mu, mu_d, ui, udi) * kc[i];
            if (coeffs.sigma_xd) diff += coeffs.sigma_xd(t, xc[i], xd[i], mu, mu_d, ui, udi) * kd[i];
            if (coeffs.sigma_v) diff += coeffs.sigma_v(t, xc[i], xd[i], mu, mu_d, ui, udi) * dv;
            if (coeffs.sigma_vd) diff += coeffs.sigma_vd(t, xc[i], xd[i], mu, mu_d, ui, udi) * dvd;
            if (mu_terms) {
                seeded_subsample(n, budget, base.noise.rng(),
                                 {static_cast<std::uint32_t>(k),
                                  static_cast<std::uint32_t>(i)},
                                 sub);
                double bacc = 0.0, sacc = 0.0;
                for (int j : sub) {
                    if (coeffs.b_mu) bacc += coeffs.b_mu(t, xc[i], xd[i], mu, mu_d, ui, udi, xc[j]) * kc[j];
                    if (coeffs.b_mud) bacc += coeffs.b_mud(t, xc[i], xd[i], mu, mu_d, ui, udi, xd[j]) * kd[j];
                    if (coeffs.sigma_mu) sacc += coeffs.sigma_mu(t, xc[i], xd[i], mu, mu_d, ui, udi, xc[j]) * kc[j];
                    if (coeffs.sigma_mud) sacc += coeffs.sigma_mud(t, xc[i], xd[i], mu, mu_d, ui, udi, xd[j]) * kd[j];
                }
                drift += bacc / budget;
                diff += sacc / budget;
            }
            kn[i] = kc[i] + drift * dt + diff * base.noise.increment(i, k);
        }
        check_finite_column(K, k + 1, "variational state");
    }
    return sol;
}

VariationalConsistencyReport variational_consistency_check(
    const CoefficientSet& coeffs, const BoundaryData& boundary,
    const ControlProcess& u, const ControlProcess& v, const TimeGrid& grid,
    const ForwardConfig& cfg, const RandomSource& rng,
    std::span<const double> thetas) {
    const ForwardSolution base =
        simulate_gmfdsde(coeffs, boundary, u, grid, cfg, rng);
    const VariationalSolution var = solve_variational(coeffs, base, u, v, grid, cfg);
    ForwardConfig quiet = cfg;
    quiet.validate_coeffs = false;

    VariationalConsistencyReport report;
    report.thetas.assign(thetas.begin(), thetas.end());
    const int n = base.x.particles();
    for (double theta : thetas) {
        const ForwardSolution pert = simulate_gmfdsde(
            coeffs, boundary, perturb_control(u, v, theta), grid, quiet, rng);
        std::vector<double> sup(n, 0.0);
        for (int k = grid.zero_index(); k <= grid.horizon_T_index(); ++k) {
            const auto xp = pert.x.column(k);
            const auto xb = base.x.column(k);
            const auto kc = var.K.column(k);
            for (int i = 0; i < n; ++i) {
                const double d = (xp[i] - xb[i]) / theta - kc[i];
                sup[i] = std::max(sup[i], std::abs(d));
            }
        }
        double s = 0.0;
        for (double w : sup) s += w * w;
        report.discrepancies.push_back(s / n);
    }
    for (std::size_t i = 1; i < report.discrepancies.size(); ++i) {
        if (report.discrepancies[i] >
            report.discrepancies[i - 1] * (1.0 + 1e-9)) {
            report.decreasing = false;
        }
    }
    report.slope = loglog_slope(report.thetas, report.discrepancies);
    return report;
}

AdjointSolution solve_adjoint(const CoefficientSet& coeffs,
                              const ForwardSolution& base,
                              const ControlProcess& u,
                              const BackwardConfig& cfg) {
    const TimeGrid& bg = base.grid;
    const TimeGrid ext = build_grid(bg.horizon_T(), bg.delay(), bg.delay(), bg.dt());
    const int n = base.x.particles();
    const int horizon = ext.horizon_T_index();
    const int lag = bg.delay_steps();
    const int budget = std::min(cfg.interaction_budget, n);

    // Terminal p_T = Phi_x + E'[Phi_mu]; zero beyond T.
    BoundaryData terminal;
    terminal.terminal_start = horizon;
    terminal.terminal_Y = PathMatrix(n, ext.n_steps() - horizon + 1);
    terminal.terminal_Z = PathMatrix(n, ext.n_steps() - horizon + 1);
    {
        const EmpiricalLaw mu_T = base.law_at(horizon);
        const auto xt = base.x.column(horizon);
        std::vector<int> sub(budget);
        for (int i = 0; i < n; ++i) {
            double p_t = coeffs.Phi_x ? coeffs.Phi_x(xt[i], mu_T) : 0.0;
            if (coeffs.Phi_mu) {
                seeded_subsample(n, budget, base.noise.rng(),
                                 {static_cast<std::uint32_t>(horizon),
                                  static_cast<std::uint32_t>(i)},
                                 sub);
                double acc = 0.0;
                for (int j : sub) acc += coeffs.Phi_mu(xt[j], mu_T, xt[i]);
                p_t += acc / budget;
            }
            terminal.terminal_Y.at(i, 0) = p_t;
        }
    }

    const bool use_bx = static_cast<bool>(coeffs.b_x);
    const bool use_sx = static_cast<bool>(coeffs.sigma_x);
    const bool use_hx = static_cast<bool>(coeffs.h_x);
    const bool mu_terms = coeffs.b_mu || coeffs.sigma_mu || coeffs.h_mu;
    const bool shift_plain = coeffs.b_xd || coeffs.sigma_xd;
    const bool shift_mu = coeffs.b_mud || coeffs.sigma_mud;
    const bool shift_terms = shift_plain || shift_mu;

    // Static coefficient tables along the base trajectory.
    const auto make_table = [&](const CoefficientSet::StateFn& fn) {
        auto t = std::make_shared<PathMatrix>(n, horizon + 1);
        for (int k = bg.zero_index(); k <= horizon; ++k) {
            const double tk = bg.time(k);
            const EmpiricalLaw mu = base.law_at(k);
            const EmpiricalLaw mu_d = base.law_at(k - lag);
            const auto xc = base.x.column(k);
            const auto xd = base.x.column(k - lag);
            for (int i = 0; i < n; ++i) {
                t->at(i, k) = fn(tk, xc[i], xd[i], mu, mu_d, u.value(i, k),
                                 u.value(i, k - lag));
            }
        }
        return t;
    };
    std::shared_ptr<PathMatrix> bx_t, sx_t, hx_t;
    if (use_bx) bx_t = make_table(coeffs.b_x);
    if (use_sx) sx_t = make_table(coeffs.sigma_x);
    if (use_hx) {
        hx_t = std::make_shared<PathMatrix>(n, horizon + 1);
        for (int k = bg.zero_index(); k <= horizon; ++k) {
            const double tk = bg.time(k);
            const EmpiricalLaw mu = base.law_at(k);
            const auto xc = base.x.column(k);
            for (int i = 0; i < n; ++i) {
                hx_t->at(i, k) = coeffs.h_x(tk, xc[i], mu, u.value(i, k),
                                            u.value(i, k - lag));
            }
        }
    }
    // Shifted tables: coefficient partials with t replaced by t + delta
    // along the base trajectory, defined where t + delta <= T.
    const auto make_shifted = [&](const CoefficientSet::StateFn& fn) {
        auto t = std::make_shared<PathMatrix>(n, horizon + 1);
        for (int k = bg.zero_index(); k + lag <= horizon; ++k) {
            const int ks = k + lag;
            const double tk = bg.time(ks);
            const EmpiricalLaw mu = base.law_at(ks);
            const EmpiricalLaw mu_d = base.law_at(k);
            const auto xc = base.x.column(ks);
            const auto xd = base.x.column(k);
            for (int i = 0; i < n; ++i) {
                t->at(i, k) = fn(tk, xc[i], xd[i], mu, mu_d, u.value(i, ks),
                                 u.value(i, k));
            }
        }
        return t;
    };
    std::shared_ptr<PathMatrix> bxd_sh, sxd_sh;
    if (coeffs.b_xd) bxd_sh = make_shifted(coeffs.b_xd);
    if (coeffs.sigma_xd) sxd_sh = make_shifted(coeffs.sigma_xd);

    auto shift_table = std::make_shared<PathMatrix>();

    DriverSpec driver;
    driver.uses_own = use_bx || use_sx;
    driver.uses_primed = mu_terms;
    driver.uses_anticipated = false;
    driver.lipschitz_C = coeffs.lipschitz_C;

    if (shift_terms) {
        driver.prepare = [&, shift_table](const PathMatrix& p_fz,
                                          const PathMatrix& q_fz) {
            *shift_table = PathMatrix(n, horizon + 1);
            std::vector<double> raw(n), fitted(n);
            std::vector<int> sub(budget);
            for (int k = bg.zero_index(); k < horizon; ++k) {
                if (k + lag > horizon) break;
                const int ks = k + lag;
                for (int i = 0; i < n; ++i) {
                    double v = 0.0;
                    if (bxd_sh) v += bxd_sh->at(i, k) * p_fz.at(i, ks);
                    if (sxd_sh) v += sxd_sh->at(i, k) * q_fz.at(i, ks);
                    raw[i] = v;
                }
                if (shift_mu) {
                    const double tk = bg.time(ks);
                    const EmpiricalLaw mu = base.law_at(ks);
                    const EmpiricalLaw mu_d = base.law_at(k);
                    const auto xs = base.x.column(ks);
                    const auto xd = base.x.column(k);
                    for (int i = 0; i < n; ++i) {
                        seeded_subsample(n, budget, base.noise.rng(),
                                         {static_cast<std::uint32_t>(1000000 + k),
                                          static_cast<std::uint32_t>(i)},
                                         sub);
                        double acc = 0.0;
                        for (int j : sub) {
                            if (coeffs.b_mud) {
                                acc += coeffs.b_mud(tk, xs[j], xd[j], mu, mu_d,
                                                    u.value(j, ks), u.value(j, k),
                                                    xs[i]) *
                                       p_fz.at(j, ks);
                            }
                            if (coeffs.sigma_mud) {
                                acc += coeffs.sigma_mud(tk, xs[j], xd[j], mu,
                                                        mu_d, u.value(j, ks),
                                                        u.value(j, k), xs[i]) *
                                       q_fz.at(j, ks);
                            }
                        }
                        raw[i] += acc / budget;
                    }
                }
                const auto x_col = base.x.column(k);
                const std::span<const double> lag_col =
                    cfg.basis.with_lag ? base.x.column(k - lag)
                                       : std::span<const double>();
                NodeRegression reg(x_col, lag_col, cfg.basis);
                reg.fit(raw, fitted);
                for (int i = 0; i < n; ++i) shift_table->at(i, k) = fitted[i];
            }
        };
    }

    driver.f = [&, shift_table](const DriverContext& c, const DriverArgs& a) {
        double val = 0.0;
        if (shift_terms && c.node < shift_table->nodes()) {
            val += shift_table->at(c.own, c.node);
        }
        if (bx_t) val += bx_t->at(c.own, c.node) * a.y;
        if (sx_t) val += sx_t->at(c.own, c.node) * a.z;
        if (hx_t) val += hx_t->at(c.own, c.node);
        if (mu_terms && c.co >= 0) {
            const int k = c.node;
            const double tk = bg.time(k);
            const EmpiricalLaw mu = base.law_at(k);
            const EmpiricalLaw mu_d = base.law_at(k - lag);
            const double xi = base.x.at(c.own, k);
            const double xj = base.x.at(c.co, k);
            const double xdj = base.x.at(c.co, k - lag);
            const double uj = u.value(c.co, k);
            const double udj = u.value(c.co, k - lag);
            if (coeffs.b_mu) {
                val += coeffs.b_mu(tk, xj, xdj, mu, mu_d, uj, udj, xi) * a.y_prime;
            }
            if (coeffs.sigma_mu) {
                val += coeffs.sigma_mu(tk, xj, xdj, mu, mu_d, uj, udj, xi) *
                       a.z_prime;
            }
            if (coeffs.h_mu) val += coeffs.h_mu(tk, xj, mu, uj, udj, xi);
        }
        return val;
    };

    FeatureSet features;
    features.values = &base.x;
    features.lag_steps = lag;

    BackwardSolution sol =
        solve_mfabsde(driver, terminal, ext, features, base.noise, cfg);
    return AdjointSolution{ext, std::move(sol.Y), std::move(sol.Z),
                           std::move(sol.picard_norms)};
}

HamiltonianEval hamiltonian(const CoefficientSet& coeffs, double t, double x,
                            double x_d, const EmpiricalLaw& mu,
                            const EmpiricalLaw& mu_d, double v, double v_d,
                            double p, double q) {
    HamiltonianEval H;
    if (coeffs.b) H.value += coeffs.b(t, x, x_d, mu, mu_d, v, v_d) * p;
    if (coeffs.sigma) H.value += coeffs.sigma(t, x, x_d, mu, mu_d, v, v_d) * q;
    if (coeffs.h) H.value += coeffs.h(t, x, mu, v, v_d);
    if (coeffs.b_x) H.H_x += coeffs.b_x(t, x, x_d, mu, mu_d, v, v_d) * p;
    if (coeffs.sigma_x) H.H_x += coeffs.sigma_x(t, x, x_d, mu, mu_d, v, v_d) * q;
    if (coeffs.h_x) H.H_x += coeffs.h_x(t, x, mu, v, v_d);
    if (coeffs.b_xd) H.H_xd += coeffs.b_xd(t, x, x_d, mu, mu_d, v, v_d) * p;
    if (coeffs.sigma_xd) H.H_xd += coeffs.sigma_xd(t, x, x_d, mu, mu_d, v, v_d) * q;
    if (coeffs.b_v) H.H_v += coeffs.b_v(t, x, x_d, mu, mu_d, v, v_d) * p;
    if (coeffs.sigma_v) H.H_v += coeffs.sigma_v(t, x, x_d, mu, mu_d, v, v_d) * q;
    if (coeffs.h_v) H.H_v += coeffs.h_v(t, x, mu, v, v_d);
    if (coeffs.b_vd) H.H_vd += coeffs.b_vd(t, x, x_d, mu, mu_d, v, v_d) * p;
    if (coeffs.sigma_vd) H.H_vd += coeffs.sigma_vd(t, x, x_d, mu, mu_d, v, v_d) * q;
    if (coeffs.h_vd) H.H_vd += coeffs.h_vd(t, x, mu, v, v_d);
    return H;
}

double hamiltonian_dmu(const CoefficientSet& coeffs, double t, double x,
                       double x_d, const EmpiricalLaw& mu,
                       const EmpiricalLaw& mu_d, double v, double v_d,
                       double y, double p, double q) {
    double val = 0.0;
    if (coeffs.b_mu) val += coeffs.b_mu(t, x, x_d, mu, mu_d, v, v_d, y) * p;
    if (coeffs.sigma_mu) val += coeffs.sigma_mu(t, x, x_d, mu, mu_d, v, v_d, y) * q;
    if (coeffs.h_mu) val += coeffs.h_mu(t, x, mu, v, v_d, y);
    return val;
}

double hamiltonian_dmud(const CoefficientSet& coeffs, double t, double x,
                        double x_d, const EmpiricalLaw& mu,
                        const EmpiricalLaw& mu_d, double v, double v_d,
                        double y, double p, double q) {
    double val = 0.0;
    if (coeffs.b_mud) val += coeffs.b_mud(t, x, x_d, mu, mu_d, v, v_d, y) * p;
    if (coeffs.sigma_mud) val += coeffs.sigma_mud(t, x, x_d, mu, mu_d, v, v_d, y) * q;
    return val;
}

namespace {

PathMatrix gradient_field_impl(const CoefficientSet& coeffs,
                               const ForwardSolution& base,
                               const ControlProcess& u,
                               const AdjointSolution& adjoint,
                               const BasisSpec& basis, bool fit_pointwise) {
    const TimeGrid& grid = base.grid;
    const int n = base.x.particles();
    const int lag = grid.delay_steps();
    const int horizon = grid.horizon_T_index();
    const bool vd_terms = coeffs.b_vd || coeffs.sigma_vd || coeffs.h_vd;

    PathMatrix g(n, grid.n_nodes());
    std::vector<double> target(n), fitted(n), advanced(n);
    for (int k = grid.zero_index(); k <= horizon; ++k) {
        const double t = grid.time(k);
        const EmpiricalLaw mu = base.law_at(k);
        const EmpiricalLaw mu_d = base.law_at(k - lag);
        const auto xc = base.x.column(k);
        const auto xd = base.x.column(k - lag);
        for (int i = 0; i < n; ++i) {
            const HamiltonianEval H = hamiltonian(
                coeffs, t, xc[i], xd[i], mu, mu_d, u.value(i, k),
                u.value(i, k - lag), adjoint.p.at(i, k), adjoint.q.at(i, k));
            target[i] = H.H_v;
        }
        const bool advanced_active = vd_terms && (k + lag <= horizon) && lag > 0;
        if (advanced_active) {
            const int ks = k + lag;
            const double ts = grid.time(ks);
            const EmpiricalLaw mus = base.law_at(ks);
            const EmpiricalLaw musd = base.law_at(k);
            const auto xs = base.x.column(ks);
            for (int i = 0; i < n; ++i) {
                const HamiltonianEval H = hamiltonian(
                    coeffs, ts, xs[i], xc[i], mus, musd, u.value(i, ks),
                    u.value(i, k), adjoint.p.at(i, ks), adjoint.q.at(i, ks));
                advanced[i] = H.H_vd;
            }
        }
        const std::span<const double> lag_col =
            basis.with_lag ? base.x.column(k - lag) : std::span<const double>();
        if (fit_pointwise) {
            if (advanced_active) {
                for (int i = 0; i < n; ++i) target[i] += advanced[i];
            }
            NodeRegression reg(xc, lag_col, basis);
            reg.fit(target, fitted);
            for (int i = 0; i < n; ++i) g.at(i, k) = fitted[i];
        } else {
            if (advanced_active) {
                NodeRegression reg(xc, lag_col, basis);
                reg.fit(advanced, fitted);
                for (int i = 0; i < n; ++i) target[i] += fitted[i];
            }
            for (int i = 0; i < n; ++i) g.at(i, k) = target[i];
        }
    }
    return g;
}

} // namespace

PathMatrix smp_gradient_field(const CoefficientSet& coeffs,
                              const ForwardSolution& base,
                              const ControlProcess& u,
                              const AdjointSolution& adjoint,
                              const BasisSpec& basis) {
    return gradient_field_impl(coeffs, base, u, adjoint, basis, true);
}

SmpResidualReport smp_residual(const CoefficientSet& coeffs,
                               const ForwardSolution& base,
                               const ControlProcess& u,
                               const AdjointSolution& adjoint,
                               const ControlProcess& v_probe,
                               const BasisSpec& basis) {
    const PathMatrix g =
        gradient_field_impl(coeffs, base, u, adjoint, basis, false);
    const TimeGrid& grid = base.grid;
    const int n = base.x.particles();
    const int horizon = grid.horizon_T_index();
    const double dt = grid.dt();

    SmpResidualReport report;
    report.min_node_pairing = 1e300;
    std::vector<double> per_particle(n, 0.0);
    for (int k = grid.zero_index(); k <= horizon; ++k) {
        const double w = (k == grid.zero_index() || k == horizon) ? 0.5 : 1.0;
        double node_mean = 0.0;
        for (int i = 0; i < n; ++i) {
            const double pairing =
                g.at(i, k) * (v_probe.value(i, k) - u.value(i, k));
            per_particle[i] += w * dt * pairing;
            node_mean += pairing;
        }
        report.min_node_pairing =
            std::min(report.min_node_pairing, node_mean / n);
    }
    double s = 0.0, s2 = 0.0;
    for (double v : per_particle) {
        s += v;
        s2 += v * v;
    }
    report.integral = s / n;
    report.std_error =
        std::sqrt(std::max(s2 / n - report.integral * report.integral, 0.0) / n);
    return report;
}

GateauxReport gateaux_consistency_check(const CoefficientSet& coeffs,
                                        const BoundaryData& boundary,
                                        const ControlProcess& u,
                                        const ControlProcess& v,
                                        const TimeGrid& grid,
                                        const ForwardConfig& fwd_cfg,
                                        const BackwardConfig& bwd_cfg,
                                        const RandomSource& rng,
                                        double theta) {
    GateauxReport report;
    double j_base;
    {
        const ForwardSolution base =
            simulate_gmfdsde(coeffs, boundary, u, grid, fwd_cfg, rng);
        j_base = cost_functional(coeffs, base, u).value;
        const AdjointSolution adjoint = solve_adjoint(coeffs, base, u, bwd_cfg);
        report.duality_value =
            smp_residual(coeffs, base, u, adjoint, v, bwd_cfg.basis).integral;
    }
    ForwardConfig quiet = fwd_cfg;
    quiet.validate_coeffs = false;
    const ControlProcess u_theta = perturb_control(u, v, theta);
    const ForwardSolution pert =
        simulate_gmfdsde(coeffs, boundary, u_theta, grid, quiet, rng);
    const double j_pert = cost_functional(coeffs, pert, u_theta).value;
    report.fd_value = (j_pert - j_base) / theta;
    report.relative_error =
        std::abs(report.fd_value - report.duality_value) /
        std::max({std::abs(report.fd_value), std::abs(report.duality_value),
                  1e-12});
    return report;
}

OptimizerResult optimize_control(const CoefficientSet& coeffs,
                                 const BoundaryData& boundary,
                                 const ControlProcess& u0,
                                 const TimeGrid& grid,
                                 const OptimizerConfig& opt_cfg,
                                 const ForwardConfig& fwd_cfg,
                                 const BackwardConfig& bwd_cfg,
                                 const RandomSource& rng) {
    const int n = fwd_cfg.n_particles;
    const Projection proj = u0.projection();

    PathMatrix values(n, grid.n_nodes());
    for (int k = 0; k < grid.n_nodes(); ++k) {
        for (int i = 0; i < n; ++i) values.at(i, k) = u0.value(i, k);
    }

    OptimizerResult result;
    result.best_j = 1e300;
    PathMatrix best_values = values;

    double step = opt_cfg.step;
    double prev_j = 1e300;
    int consecutive_up = 0, halvings = 0;
    ForwardConfig fcfg = fwd_cfg;

    for (int it = 0; it < opt_cfg.iterations; ++it) {
        PathMatrix snapshot = values;
        const ControlProcess u =
            ControlProcess::from_matrix(std::move(snapshot), proj);
        const ForwardSolution sol =
            simulate_gmfdsde(coeffs, boundary, u, grid, fcfg, rng);
        fcfg.validate_coeffs = false;
        const double j = cost_functional(coeffs, sol, u).value;
        result.j_history.push_back(j);
        if (j < result.best_j) {
            result.best_j = j;
            best_values = values;
        }
        if (j > prev_j) {
            if (++consecutive_up >= opt_cfg.increase_patience) {
                step *= 0.5;
                result.step_halved = true;
                consecutive_up = 0;
                if (++halvings > opt_cfg.max_halvings) {
                    result.converged = false;
                    break;
                }
            }
        } else {
            consecutive_up = 0;
        }
        prev_j = j;

        const AdjointSolution adjoint = solve_adjoint(coeffs, sol, u, bwd_cfg);
        const PathMatrix g =
            smp_gradient_field(coeffs, sol, u, adjoint, bwd_cfg.basis);
        for (int k = grid.zero_index(); k <= grid.horizon_T_index(); ++k) {
            for (int i = 0; i < n; ++i) {
                values.at(i, k) = proj.apply(values.at(i, k) - step * g.at(i, k));
            }
        }
    }
    result.u_star = ControlProcess::from_matrix(std::move(best_values), proj);
    return result;
}

} // namespace mfc
