#include "mfc/backward.hpp"

#include <cmath>

#include "mfc/norms.hpp"
#include "mfc/prime_expectation.hpp"

namespace mfc {

double BackwardSolution::y0_mean() const {
    const auto col = Y.column(grid.zero_index());
    double s = 0.0;
    for (double v : col) s += v;
    return s / col.size();
}

namespace {

double paper_beta(double C, double L) {
    return 32.0 * C * C * L + 32.0 * C * C + 6.0 * C + 2.0 * C * L + 1.0;
}

struct Sweep {
    const DriverSpec& driver;
    const TimeGrid& grid;
    const FeatureSet& features;
    const BrownianDriver& noise;
    const BackwardConfig& cfg;
    int n;
    int budget;

    // reusable buffers
    std::vector<double> m_fit, z_target, z_fit, y_ant, z_ant, y_target, db;
    std::vector<int> sub;

    Sweep(const DriverSpec& d, const TimeGrid& g, const FeatureSet& f,
          const BrownianDriver& b, const BackwardConfig& c)
        : driver(d), grid(g), features(f), noise(b), cfg(c),
          n(f.values->particles()),
          budget(std::min(c.interaction_budget, n)) {
        if (budget < 2) throw config_error("interaction budget must be >= 2");
        m_fit.resize(n);
        z_target.resize(n);
        z_fit.resize(n);
        y_ant.assign(n, 0.0);
        z_ant.assign(n, 0.0);
        y_target.resize(n);
        db.resize(n);
        sub.resize(budget);
    }

    // One backward pass writing Y, Z on [zero, horizon) from the frozen
    // iterate (y_fz, z_fz). Returns whether any node needed ridge fallback.
    bool run(const PathMatrix& y_fz, const PathMatrix& z_fz, PathMatrix& y_out,
             PathMatrix& z_out, std::vector<double>* y_rmse) {
        const int lag = features.lag_steps;
        const double dt = grid.dt();
        bool ridge = false;
        if (driver.prepare) driver.prepare(y_fz, z_fz);

        const PathMatrix& y_ant_src =
            driver.anticipated_y_override ? *driver.anticipated_y_override : y_fz;
        const PathMatrix& z_ant_src =
            driver.anticipated_z_override ? *driver.anticipated_z_override : z_fz;

        for (int k = grid.horizon_T_index() - 1; k >= grid.zero_index(); --k) {
            const auto x_col = features.values->column(k);
            const std::span<const double> lag_col =
                cfg.basis.with_lag ? features.values->column(k - lag)
                                   : std::span<const double>();
            NodeRegression reg(x_col, lag_col, cfg.basis);

            const auto y_next = y_out.column(k + 1);

            // Conditional mean of Y_{k+1}, reused as the control variate of
            // the Z target.
            reg.fit(y_next, m_fit);

            noise.column(k, 0, db);
            for (int i = 0; i < n; ++i) {
                z_target[i] = (y_next[i] - m_fit[i]) * db[i] / dt;
            }
            reg.fit(z_target, z_fit);

            const bool want_adv = driver.uses_anticipated || driver.uses_primed;
            const int ay = want_adv ? grid.advance_y(k) : k;
            const int az = want_adv ? grid.advance_z(k) : k;
            if (driver.uses_anticipated) {
                reg.fit(y_ant_src.column(ay), y_ant);
                reg.fit(z_ant_src.column(az), z_ant);
            }

            DriverArgs args;
            args.t = grid.time(k);
            DriverContext ctx;
            ctx.node = k;
            for (int i = 0; i < n; ++i) {
                ctx.own = i;
                args.y = y_next[i];
                args.z = z_fit[i];
                args.y_adv = y_ant[i];
                args.z_adv = z_ant[i];
                double drv;
                if (driver.uses_primed) {
                    seeded_subsample(n, budget, noise.rng(),
                                     {static_cast<std::uint32_t>(k),
                                      static_cast<std::uint32_t>(i)},
                                     sub);
                    double acc = 0.0;
                    for (int j : sub) {
                        ctx.co = j;
                        args.y_prime = y_fz.at(j, k);
                        args.z_prime = z_fz.at(j, k);
                        args.y_prime_adv = y_ant_src.at(j, ay);
                        args.z_prime_adv = z_ant_src.at(j, az);
                        acc += driver.f(ctx, args);
                    }
                    drv = acc / budget;
                    ctx.co = -1;
                } else {
                    args.y_prime = args.z_prime = 0.0;
                    args.y_prime_adv = args.z_prime_adv = 0.0;
                    drv = driver.f(ctx, args);
                }
                y_target[i] = y_next[i] + drv * dt;
            }
            reg.fit(y_target, y_out.column(k));
            if (y_rmse) (*y_rmse)[k] = reg.last_rmse();
            for (int i = 0; i < n; ++i) z_out.at(i, k) = z_fit[i];
            ridge = ridge || reg.ridge_used();
            check_finite_column(y_out, k, "backward Y");
        }
        return ridge;
    }
};

void set_terminal(PathMatrix& y, PathMatrix& z, const BoundaryData& terminal,
                  const TimeGrid& grid) {
    for (int k = grid.horizon_T_index(); k <= grid.n_steps(); ++k) {
        const auto ys = terminal.terminal_y_column(k);
        const auto zs = terminal.terminal_z_column(k);
        auto yd = y.column(k);
        auto zd = z.column(k);
        for (std::size_t i = 0; i < ys.size(); ++i) {
            yd[i] = ys[i];
            zd[i] = zs[i];
        }
    }
}

} // namespace

BackwardSolution solve_mfabsde(const DriverSpec& driver,
                               const BoundaryData& terminal,
                               const TimeGrid& grid, const FeatureSet& features,
                               const BrownianDriver& noise,
                               const BackwardConfig& cfg) {
    if (!driver.f) throw config_error("driver evaluator missing");
    if (!features.values) throw config_error("regression features missing");
    if (!terminal.has_terminal()) throw config_error("terminal segments missing");
    const int n = features.values->particles();
    if (terminal.terminal_Y.particles() != n) {
        throw config_error("terminal segment particle count mismatch");
    }
    if (features.values->nodes() <= grid.horizon_T_index()) {
        throw config_error("feature matrix does not cover the horizon");
    }
    if (cfg.basis.with_lag && features.lag_steps <= 0) {
        throw config_error("lagged basis requested without a lag feature");
    }

    const double beta = cfg.beta_backward > 0.0
                            ? cfg.beta_backward
                            : paper_beta(driver.lipschitz_C, driver.L_bound);

    BackwardSolution sol{grid, PathMatrix(n, grid.n_nodes()),
                         PathMatrix(n, grid.n_nodes())};
    sol.y_fit_rmse.assign(grid.n_nodes(), 0.0);
    set_terminal(sol.Y, sol.Z, terminal, grid);

    Sweep sweep(driver, grid, features, noise, cfg);

    // A driver that never reads the frozen iterate is solved by a single
    // sweep: own (y, z) arguments are resolved inside the sweep itself.
    const bool iterate_free =
        !driver.prepare && !driver.uses_primed &&
        (!driver.uses_anticipated ||
         (driver.anticipated_y_override && driver.anticipated_z_override));
    if (iterate_free) {
        PathMatrix dummy;
        sol.ridge_used = sweep.run(dummy, dummy, sol.Y, sol.Z, &sol.y_fit_rmse);
        return sol;
    }

    PathMatrix y_fz(n, grid.n_nodes()), z_fz(n, grid.n_nodes());
    set_terminal(y_fz, z_fz, terminal, grid);
    bool converged = false;
    for (int iter = 0; iter < cfg.picard_max_iter; ++iter) {
        sol.ridge_used |= sweep.run(y_fz, z_fz, sol.Y, sol.Z, &sol.y_fit_rmse);
        const double norm =
            beta_norm_diff(sol.Y, y_fz, grid, grid.zero_index(), grid.n_steps(),
                           beta, +1.0, &sol.Z, &z_fz);
        sol.picard_norms.push_back(norm);
        if (cfg.picard_tol > 0.0 && norm < cfg.picard_tol) {
            // Large beta concentrates the weight near T+K and can hide
            // early-time movement below rounding; confirm with the
            // unweighted norm before stopping.
            const double flat =
                beta_norm_diff(sol.Y, y_fz, grid, grid.zero_index(),
                               grid.n_steps(), 0.0, +1.0, &sol.Z, &z_fz);
            if (flat < cfg.picard_tol) {
                converged = true;
                break;
            }
        }
        std::swap(sol.Y, y_fz);
        std::swap(sol.Z, z_fz);
    }
    if (cfg.picard_tol > 0.0 && !converged) {
        throw nonconvergence_error("backward Picard iteration did not converge",
                                   sol.picard_norms);
    }
    if (!converged) {
        // Fixed-sweep mode: every recorded iteration ended with a swap, so
        // the newest iterate sits in the frozen slot.
        std::swap(sol.Y, y_fz);
        std::swap(sol.Z, z_fz);
    }
    return sol;
}

BackwardSolution solve_mfabsde_brownian(const DriverSpec& driver,
                                        const BoundaryData& terminal,
                                        const TimeGrid& grid, int n_particles,
                                        const BackwardConfig& cfg,
                                        const RandomSource& rng) {
    const BrownianDriver noise = sample_brownian(grid, n_particles, 1, rng);
    const PathMatrix b = noise.path_values(grid);
    FeatureSet features;
    features.values = &b;
    features.lag_steps = grid.delay_steps();
    return solve_mfabsde(driver, terminal, grid, features, noise, cfg);
}

AprioriReport apriori_estimate_check(const BackwardSolution& solution,
                                     const DriverSpec& driver,
                                     const PathMatrix& g0, double beta) {
    if (driver.uses_own || driver.uses_primed || driver.uses_anticipated) {
        throw precondition_error(
            "a priori estimate requires a driver independent of the solution");
    }
    const TimeGrid& grid = solution.grid;
    const int n = solution.Y.particles();
    const double dt = grid.dt();

    const double y0 = solution.y0_mean();
    double left = y0 * y0;
    double right_int = 0.0;
    for (int k = grid.zero_index(); k <= grid.horizon_T_index(); ++k) {
        const double w =
            (k == grid.zero_index() || k == grid.horizon_T_index()) ? 0.5 : 1.0;
        const double weight = w * std::exp(beta * grid.time(k)) * dt;
        double my2 = 0.0, mz2 = 0.0, mg2 = 0.0;
        const auto yc = solution.Y.column(k);
        const auto zc = solution.Z.column(k);
        const auto gc = g0.column(k);
        for (int i = 0; i < n; ++i) {
            my2 += yc[i] * yc[i];
            mz2 += zc[i] * zc[i];
            mg2 += gc[i] * gc[i];
        }
        left += weight * (0.5 * beta * my2 + mz2) / n;
        right_int += weight * mg2 / n;
    }
    double xi2 = 0.0;
    for (double v : solution.Y.column(grid.horizon_T_index())) xi2 += v * v;
    AprioriReport report;
    report.left = left;
    report.right = (xi2 / n) * std::exp(beta * grid.horizon_T()) +
                   (2.0 / beta) * right_int;
    report.slack = report.right - report.left;
    return report;
}

namespace {

DriverArgs random_args(const RandomSource& rng, std::uint32_t tag) {
    DriverArgs a;
    const auto draw = [&rng, tag](std::uint32_t slot) {
        return rng.normal(StreamDomain::probe, tag, slot);
    };
    a.t = 0.5 + 0.2 * draw(0);
    a.y_prime = draw(1);
    a.z_prime = draw(2);
    a.y_prime_adv = draw(3);
    a.z_prime_adv = draw(4);
    a.y = draw(5);
    a.z = draw(6);
    a.y_adv = draw(7);
    a.z_adv = draw(8);
    return a;
}

void probe_comparison_flags(const DriverSpec& d, const RandomSource& rng) {
    const DriverContext ctx;
    const double h = 0.37;
    for (std::uint32_t p = 0; p < 32; ++p) {
        DriverArgs a = random_args(rng, 40000u + p);
        const double base = d.f(ctx, a);
        DriverArgs b = a;

        if (d.flags.independent_z_prime) {
            b = a; b.z_prime += h;
            if (std::abs(d.f(ctx, b) - base) > 1e-10) {
                throw precondition_error("probe contradicts (i): driver depends on z'");
            }
        }
        if (d.flags.independent_anticipated_z) {
            b = a; b.z_adv += h;
            if (std::abs(d.f(ctx, b) - base) > 1e-10) {
                throw precondition_error(
                    "probe contradicts (iv): driver depends on anticipated Z");
            }
        }
        if (d.flags.independent_anticipated_z_prime) {
            b = a; b.z_prime_adv += h;
            if (std::abs(d.f(ctx, b) - base) > 1e-10) {
                throw precondition_error(
                    "probe contradicts (v): driver depends on anticipated z'");
            }
        }
        if (d.flags.nondecreasing_y_prime) {
            b = a; b.y_prime += h;
            if (d.f(ctx, b) < base - 1e-10) {
                throw precondition_error(
                    "probe contradicts (ii): driver decreasing in y'");
            }
        }
        if (d.flags.increasing_anticipated_y) {
            b = a; b.y_adv += h;
            if (d.f(ctx, b) < base - 1e-10) {
                throw precondition_error(
                    "probe contradicts (iii): driver decreasing in anticipated Y");
            }
        }
        if (d.flags.nondecreasing_anticipated_y_prime) {
            b = a; b.y_prime_adv += h;
            if (d.f(ctx, b) < base - 1e-10) {
                throw precondition_error(
                    "probe contradicts (vi): driver decreasing in anticipated Y'");
            }
        }
    }
}

} // namespace

ComparisonReport comparison_run(const DriverSpec& driver1,
                                const DriverSpec& driver2,
                                const BoundaryData& terminal1,
                                const BoundaryData& terminal2,
                                const TimeGrid& grid, int n_particles,
                                const BackwardConfig& cfg,
                                const RandomSource& rng,
                                int bootstrap_count) {
    if (!driver2.flags.all()) {
        throw precondition_error(
            "driver2 must declare restrictions (i)-(vi) for the comparison run");
    }
    probe_comparison_flags(driver2, rng);

    // f1 >= f2 on probes.
    const DriverContext ctx;
    for (std::uint32_t p = 0; p < 32; ++p) {
        const DriverArgs a = random_args(rng, 41000u + p);
        if (driver1.f(ctx, a) < driver2.f(ctx, a) - 1e-10) {
            throw precondition_error("probe contradicts f1 >= f2");
        }
    }
    // xi1 >= xi2 samplewise.
    for (int k = grid.horizon_T_index(); k <= grid.n_steps(); ++k) {
        const auto a = terminal1.terminal_y_column(k);
        const auto b = terminal2.terminal_y_column(k);
        for (std::size_t i = 0; i < a.size(); ++i) {
            if (a[i] < b[i] - 1e-12) {
                throw precondition_error("terminal ordering xi1 >= xi2 violated");
            }
        }
    }

    // Every solution is computed twice, at the configured basis degree and
    // two degrees higher. The pointwise disagreement between the two fits
    // estimates the local basis error; together with the fitted-value
    // standard error it sets the per-point comparison tolerance
    //   tol = 3 (se_a + se_b) + |bias_a| + |bias_b|.
    BackwardConfig cfg_hi = cfg;
    cfg_hi.basis.degree = cfg.basis.degree + 2;
    const auto solve_both = [&](const DriverSpec& d, const BoundaryData& term) {
        std::pair<BackwardSolution, PathMatrix> out{
            solve_mfabsde_brownian(d, term, grid, n_particles, cfg, rng), {}};
        const BackwardSolution hi =
            solve_mfabsde_brownian(d, term, grid, n_particles, cfg_hi, rng);
        out.second = PathMatrix(n_particles, grid.n_nodes());
        for (int k = grid.zero_index(); k <= grid.horizon_T_index(); ++k) {
            for (int i = 0; i < n_particles; ++i) {
                out.second.at(i, k) =
                    std::abs(out.first.Y.at(i, k) - hi.Y.at(i, k));
            }
        }
        return out;
    };

    ComparisonReport report;
    auto [s1, bias1] = solve_both(driver1, terminal1);
    auto [s2, bias2] = solve_both(driver2, terminal2);
    report.sol1 = std::move(s1);
    report.sol2 = std::move(s2);
    report.y1_0 = report.sol1.y0_mean();
    report.y2_0 = report.sol2.y0_mean();

    // sigma_MC at a node is the regression residual sigma there: the Monte
    // Carlo noise scale of a single particle's sample. Pointwise comparisons
    // of fitted values get 3 sigma_MC per solution plus 3x the local basis
    // sensitivity measured above (the degree-refinement difference
    // understates the bias when the basis error decays algebraically, and a
    // factor 3 covers decay exponents down to ~1).
    const int n = n_particles;
    const auto point_tol = [&](const BackwardSolution& sa, const PathMatrix& ba,
                               const BackwardSolution& sb, const PathMatrix& bb,
                               int i, int k) {
        return 3.0 * (sa.y_fit_rmse[k] + sb.y_fit_rmse[k]) +
               3.0 * (ba.at(i, k) + bb.at(i, k)) + 1e-12;
    };

    long long violations = 0, total = 0;
    for (int k = grid.zero_index(); k <= grid.horizon_T_index(); ++k) {
        const auto y1 = report.sol1.Y.column(k);
        const auto y2 = report.sol2.Y.column(k);
        for (int i = 0; i < n; ++i) {
            const double gap = y2[i] - y1[i] -
                               point_tol(report.sol1, bias1, report.sol2,
                                         bias2, i, k);
            if (gap > 0.0) {
                ++violations;
                report.max_violation = std::max(report.max_violation, gap);
            }
            ++total;
        }
    }
    report.violation_fraction =
        static_cast<double>(violations) / static_cast<double>(total);

    // Monotone bootstrap: anticipated slots of driver2 read the previous
    // element of the sequence, starting from solution 1.
    const PathMatrix* prev_y = &report.sol1.Y;
    const PathMatrix* prev_z = &report.sol1.Z;
    std::vector<BackwardSolution> chain;
    std::vector<PathMatrix> chain_bias;
    chain.reserve(bootstrap_count);
    chain_bias.reserve(bootstrap_count);
    for (int b = 0; b < bootstrap_count; ++b) {
        DriverSpec db = driver2;
        db.anticipated_y_override = prev_y;
        db.anticipated_z_override = prev_z;
        auto [sol, bias] = solve_both(db, terminal2);
        chain.push_back(std::move(sol));
        chain_bias.push_back(std::move(bias));
        prev_y = &chain.back().Y;
        prev_z = &chain.back().Z;
    }
    const auto pair_violation = [&](const BackwardSolution& hi,
                                    const PathMatrix& hi_bias,
                                    const BackwardSolution& lo,
                                    const PathMatrix& lo_bias) {
        double worst = 0.0;
        for (int k = grid.zero_index(); k <= grid.horizon_T_index(); ++k) {
            const auto a = hi.Y.column(k);
            const auto c = lo.Y.column(k);
            for (int i = 0; i < n; ++i) {
                worst = std::max(
                    worst, c[i] - a[i] -
                               point_tol(hi, hi_bias, lo, lo_bias, i, k));
            }
        }
        return worst;
    };
    report.bootstrap_violation.push_back(
        pair_violation(report.sol1, bias1, chain[0], chain_bias[0]));
    for (std::size_t b = 1; b < chain.size(); ++b) {
        report.bootstrap_violation.push_back(pair_violation(
            chain[b - 1], chain_bias[b - 1], chain[b], chain_bias[b]));
    }
    for (double v : report.bootstrap_violation) {
        if (v > 0.0) report.bootstrap_monotone = false;
    }
    return report;
}

CounterexampleReport counterexample_clark_ocone(int n_particles, double dt,
                                                const RandomSource& rng,
                                                const BackwardConfig& cfg_in) {
    TimeGrid grid = build_grid(1.0, 0.0, 0.0, dt);
    const int zeta_steps = static_cast<int>(std::llround(0.5 / dt));
    grid.set_anticipation([](int) { return 0; },
                          [zeta_steps](int) { return zeta_steps; });

    const BrownianDriver noise = sample_brownian(grid, n_particles, 1, rng);
    const PathMatrix b = noise.path_values(grid);

    const int horizon = grid.horizon_T_index();
    const auto plus = [](double x) { return x > 0.0 ? x : 0.0; };
    const BoundaryData terminal1 = make_terminal_boundary(
        grid, n_particles,
        [&](int i, int k) {
            const double w = plus(b.at(i, k));
            return -w * w * w;
        },
        [&](int i, int k) {
            const double w = plus(b.at(i, k));
            return -3.0 * w * w;
        });
    const BoundaryData terminal2 =
        make_terminal_boundary(grid, n_particles,
                               [](int, int) { return 0.0; });

    DriverSpec driver;
    driver.f = [](const DriverContext&, const DriverArgs& a) {
        return -a.z_prime_adv;
    };
    driver.lipschitz_C = 1.0;
    driver.L_bound = 1.0;
    driver.uses_own = false;
    driver.uses_primed = true;
    driver.uses_anticipated = false;

    BackwardConfig cfg = cfg_in;

    FeatureSet features;
    features.values = &b;

    CounterexampleReport report;
    const BackwardSolution sol1 =
        solve_mfabsde(driver, terminal1, grid, features, noise, cfg);
    const BackwardSolution sol2 =
        solve_mfabsde(driver, terminal2, grid, features, noise, cfg);
    report.y1_0 = sol1.y0_mean();
    report.y2_0 = sol2.y0_mean();
    report.violation = report.y1_0 > report.y2_0;
    double s = 0.0;
    for (double v : terminal1.terminal_y_column(horizon)) s += v;
    report.sampled_mean_xi1 = s / n_particles;
    for (int k = grid.zero_index(); k <= horizon; ++k) {
        report.times.push_back(grid.time(k));
        double m = 0.0;
        for (double v : sol1.Y.column(k)) m += v;
        report.y1_mean.push_back(m / n_particles);
    }
    return report;
}

bool probe_driver_lipschitz(const DriverSpec& driver, const RandomSource& rng,
                            int n_probes) {
    if (driver.prepare) return true;  // assembled driver, args are tabulated
    const DriverContext ctx;
    const double C = driver.lipschitz_C;
    for (std::uint32_t p = 0; p < static_cast<std::uint32_t>(n_probes); ++p) {
        const DriverArgs a = random_args(rng, 50000u + 2 * p);
        DriverArgs b = random_args(rng, 50001u + 2 * p);
        b.t = a.t;
        const double dist =
            std::abs(a.y_prime - b.y_prime) + std::abs(a.z_prime - b.z_prime) +
            std::abs(a.y_prime_adv - b.y_prime_adv) +
            std::abs(a.z_prime_adv - b.z_prime_adv) + std::abs(a.y - b.y) +
            std::abs(a.z - b.z) + std::abs(a.y_adv - b.y_adv) +
            std::abs(a.z_adv - b.z_adv);
        if (std::abs(driver.f(ctx, a) - driver.f(ctx, b)) >
            C * dist * (1.0 + 1e-9) + 1e-12) {
            return false;
        }
    }
    return true;
}

} // namespace mfc
