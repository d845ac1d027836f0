#include "mfc/experiments.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <iostream>
#include <map>

#include "mfc/backward.hpp"
#include "mfc/control.hpp"
#include "mfc/forward.hpp"
#include "mfc/lions.hpp"
#include "mfc/oracles.hpp"
#include "mfc/version.hpp"
#include "mfc/wasserstein.hpp"

namespace mfc {

namespace {

namespace fs = std::filesystem;
using ordered_json = nlohmann::ordered_json;

constexpr double kPi = 3.14159265358979323846;

struct CsvWriter {
    fs::path dir;

    void write(const std::string& name, const std::vector<std::string>& header,
               const std::vector<std::vector<double>>& rows) const {
        std::ofstream out(dir / name);
        out << std::setprecision(17);
        for (std::size_t c = 0; c < header.size(); ++c) {
            out << header[c] << (c + 1 < header.size() ? "," : "");
        }
        out << "\n";
        for (const auto& row : rows) {
            for (std::size_t c = 0; c < row.size(); ++c) {
                out << row[c] << (c + 1 < row.size() ? "," : "");
            }
            out << "\n";
        }
    }
};

double column_mean(const PathMatrix& m, int k) {
    double s = 0.0;
    for (double v : m.column(k)) s += v;
    return s / m.particles();
}

// Shared scalar test dynamics: dX = u dt + dB (or u_{t-delta} for the
// delayed variant), running cost u^2, terminal cost x^2.
CoefficientSet lq_coefficients(bool delayed) {
    CoefficientSet c;
    if (delayed) {
        c.b = [](double, double, double, const EmpiricalLaw&,
                 const EmpiricalLaw&, double, double v_d) { return v_d; };
        c.b_vd = [](double, double, double, const EmpiricalLaw&,
                    const EmpiricalLaw&, double, double) { return 1.0; };
    } else {
        c.b = [](double, double, double, const EmpiricalLaw&,
                 const EmpiricalLaw&, double v, double) { return v; };
        c.b_v = [](double, double, double, const EmpiricalLaw&,
                   const EmpiricalLaw&, double, double) { return 1.0; };
    }
    c.sigma = [](double, double, double, const EmpiricalLaw&,
                 const EmpiricalLaw&, double, double) { return 1.0; };
    c.h = [](double, double, const EmpiricalLaw&, double v, double) {
        return v * v;
    };
    c.h_v = [](double, double, const EmpiricalLaw&, double v, double) {
        return 2.0 * v;
    };
    c.Phi = [](double x, const EmpiricalLaw&) { return x * x; };
    c.Phi_x = [](double x, const EmpiricalLaw&) { return 2.0 * x; };
    c.lipschitz_C = 1.0;
    return c;
}

BackwardConfig backward_config(const ExperimentConfig& c, int default_degree,
                               bool with_lag = false) {
    BackwardConfig bc;
    bc.beta_backward = c.beta_backward;
    bc.basis.degree = c.basis_degree > 0 ? c.basis_degree : default_degree;
    bc.basis.with_lag = with_lag;
    bc.picard_tol = c.picard_tol;
    bc.picard_max_iter = c.picard_max_iter;
    bc.interaction_budget = c.interaction_budget;
    return bc;
}

ForwardConfig forward_config(const ExperimentConfig& c) {
    ForwardConfig fc;
    fc.n_particles = c.n_particles;
    fc.beta_forward = c.beta_forward;
    fc.picard_tol = c.picard_tol;
    fc.picard_max_iter = c.picard_max_iter;
    fc.interaction_budget = c.interaction_budget;
    return fc;
}

// ---------------------------------------------------------------------------
// counterexample
// ---------------------------------------------------------------------------

ordered_json run_counterexample(ExperimentConfig& c, const CsvWriter& csv) {
    if (c.was_defaulted("interaction_budget")) c.interaction_budget = 64;
    const RandomSource rng(c.seed);
    BackwardConfig bc = backward_config(c, 2);
    const CounterexampleReport rep =
        counterexample_clark_ocone(c.n_particles, c.dt, rng, bc);

    const double y1_exact = 1.5 - 2.0 / std::sqrt(2.0 * kPi);
    const double mean_xi1_exact = -2.0 / std::sqrt(2.0 * kPi);

    std::vector<std::vector<double>> rows;
    for (std::size_t k = 0; k < rep.times.size(); ++k) {
        rows.push_back({rep.times[k], rep.y1_mean[k]});
    }
    csv.write("counterexample_y1.csv", {"t", "Y1_mean"}, rows);

    ordered_json r;
    r["Y1_0"] = rep.y1_0;
    r["Y2_0"] = rep.y2_0;
    r["violation"] = rep.violation;
    r["sampled_mean_xi1"] = rep.sampled_mean_xi1;
    r["Y1_exact"] = y1_exact;
    r["mean_xi1_exact"] = mean_xi1_exact;
    ordered_json pass;
    pass["y1_within_0_05"] = std::abs(rep.y1_0 - y1_exact) <= 0.05;
    pass["y2_exactly_zero"] = rep.y2_0 == 0.0;
    pass["violation_flag"] = rep.violation;
    pass["sampled_xi1_within_0_01"] =
        std::abs(rep.sampled_mean_xi1 - mean_xi1_exact) <= 0.01;
    r["pass"] = pass;
    return r;
}

// ---------------------------------------------------------------------------
// comparison
// ---------------------------------------------------------------------------

ordered_json run_comparison(ExperimentConfig& c, const CsvWriter& csv) {
    if (c.was_defaulted("K")) c.K = 0.25;
    if (c.was_defaulted("delta")) c.delta = 0.25;

    const RandomSource rng(c.seed);
    const TimeGrid grid = build_grid(c.T, c.K, c.delta, c.dt);
    const BrownianDriver noise = sample_brownian(grid, c.n_particles, 1, rng);
    const PathMatrix b = noise.path_values(grid);

    const BoundaryData terminal1 = make_terminal_boundary(
        grid, c.n_particles,
        [&b](int i, int k) { return std::max(b.at(i, k), 0.0); });
    const BoundaryData terminal2 = make_terminal_boundary(
        grid, c.n_particles, [](int, int) { return 0.0; });

    DriverSpec d2;
    d2.f = [](const DriverContext&, const DriverArgs& a) { return a.y_adv; };
    d2.lipschitz_C = 1.0;
    d2.L_bound = 1.0;
    d2.uses_own = false;
    d2.uses_primed = false;
    d2.uses_anticipated = true;
    d2.flags.independent_z_prime = true;
    d2.flags.nondecreasing_y_prime = true;
    d2.flags.increasing_anticipated_y = true;
    d2.flags.independent_anticipated_z = true;
    d2.flags.independent_anticipated_z_prime = true;
    d2.flags.nondecreasing_anticipated_y_prime = true;
    const DriverSpec d1 = d2;

    const BackwardConfig bc = backward_config(c, 3);
    const ComparisonReport rep = comparison_run(d1, d2, terminal1, terminal2,
                                                grid, c.n_particles, bc, rng);

    std::vector<std::vector<double>> rows;
    for (int k = grid.zero_index(); k <= grid.horizon_T_index(); ++k) {
        rows.push_back({grid.time(k), column_mean(rep.sol1.Y, k),
                        column_mean(rep.sol2.Y, k)});
    }
    csv.write("comparison_y.csv", {"t", "Y1_mean", "Y2_mean"}, rows);

    ordered_json r;
    r["violation_fraction"] = rep.violation_fraction;
    r["max_violation"] = rep.max_violation;
    r["bootstrap_monotone"] = rep.bootstrap_monotone;
    r["bootstrap_violation"] = rep.bootstrap_violation;
    r["Y1_0"] = rep.y1_0;
    r["Y2_0"] = rep.y2_0;
    ordered_json pass;
    pass["violation_fraction_below_1e3"] = rep.violation_fraction <= 1e-3;
    pass["bootstrap_monotone"] = rep.bootstrap_monotone;
    r["pass"] = pass;
    return r;
}

// ---------------------------------------------------------------------------
// contraction-backward
// ---------------------------------------------------------------------------

ordered_json run_contraction_backward(ExperimentConfig& c,
                                      const CsvWriter& csv) {
    if (c.was_defaulted("K")) c.K = 0.25;
    if (c.was_defaulted("delta")) c.delta = 0.25;
    if (c.was_defaulted("n_particles")) c.n_particles = 2000;
    if (c.was_defaulted("picard_max_iter")) c.picard_max_iter = 14;

    const RandomSource rng(c.seed);
    const TimeGrid grid = build_grid(c.T, c.K, c.delta, c.dt);
    const BrownianDriver noise = sample_brownian(grid, c.n_particles, 1, rng);
    const PathMatrix b = noise.path_values(grid);

    const BoundaryData terminal = make_terminal_boundary(
        grid, c.n_particles, [&b](int i, int k) { return b.at(i, k); },
        [](int, int) { return 1.0; });

    DriverSpec driver;
    driver.f = [](const DriverContext&, const DriverArgs& a) {
        return 0.5 * (a.y + a.z + a.y_adv + a.z_adv + a.y_prime + a.z_prime +
                      a.y_prime_adv + a.z_prime_adv);
    };
    driver.lipschitz_C = 0.5;
    driver.L_bound = 1.0;

    BackwardConfig bc = backward_config(c, 2);
    bc.picard_tol = 0.0;  // fixed sweep count to record the full history
    bc.picard_max_iter = c.picard_max_iter;

    FeatureSet features;
    features.values = &b;
    const BackwardSolution sol =
        solve_mfabsde(driver, terminal, grid, features, noise, bc);

    // Clip the history at the rounding floor before the geometric fit.
    std::vector<double> norms;
    for (double v : sol.picard_norms) {
        if (v < 1e-13) break;
        norms.push_back(v);
    }
    const RateReport rate = contraction_rate(norms);

    std::vector<std::vector<double>> rows;
    for (std::size_t i = 0; i < sol.picard_norms.size(); ++i) {
        rows.push_back({static_cast<double>(i), sol.picard_norms[i]});
    }
    csv.write("contraction_backward_norms.csv", {"t", "norm"}, rows);

    const double beta_used =
        c.beta_backward > 0.0 ? c.beta_backward
                              : 32.0 * 0.25 * 1.0 + 32.0 * 0.25 + 6.0 * 0.5 +
                                    2.0 * 0.5 * 1.0 + 1.0;
    ordered_json r;
    r["beta"] = beta_used;
    r["lipschitz_C"] = driver.lipschitz_C;
    r["L_bound"] = driver.L_bound;
    r["rate"] = rate.rate;
    r["iterations_recorded"] = static_cast<int>(norms.size());
    r["norms"] = sol.picard_norms;
    ordered_json pass;
    pass["rate_below_0_6"] = rate.sufficient && rate.rate <= 0.6;
    pass["at_least_4_ratios"] = norms.size() >= 5;
    r["pass"] = pass;
    return r;
}

// ---------------------------------------------------------------------------
// contraction-forward
// ---------------------------------------------------------------------------

CoefficientSet mean_field_delay_drift() {
    CoefficientSet coeffs;
    coeffs.b = [](double, double x, double x_d, const EmpiricalLaw& mu,
                  const EmpiricalLaw& mu_d, double, double) {
        return 0.15 * x + 0.15 * x_d + 0.1 * mu.mean() + 0.1 * mu_d.mean();
    };
    coeffs.sigma = [](double, double x, double, const EmpiricalLaw&,
                      const EmpiricalLaw&, double, double) {
        return 0.2 + 0.05 * x;
    };
    coeffs.lipschitz_C = 0.15;
    return coeffs;
}

ordered_json run_contraction_forward(ExperimentConfig& c,
                                     const CsvWriter& csv) {
    if (c.was_defaulted("delta")) c.delta = 0.25;
    if (c.was_defaulted("dt")) c.dt = 0.002;
    if (c.was_defaulted("n_particles")) c.n_particles = 2000;
    if (c.was_defaulted("picard_tol")) c.picard_tol = 1e-9;
    if (c.was_defaulted("picard_max_iter")) c.picard_max_iter = 30;

    const RandomSource rng(c.seed);
    const TimeGrid grid = build_grid(c.T, 0.0, c.delta, c.dt);
    const CoefficientSet coeffs = mean_field_delay_drift();
    const BoundaryData boundary = make_initial_boundary(
        grid, c.n_particles, [](int, int) { return 1.0; });
    const ControlProcess control = ControlProcess::constant(0.0);

    ForwardConfig fc = forward_config(c);
    const ForwardSolution picard =
        picard_solve_forward(coeffs, boundary, control, grid, fc, rng);
    const ForwardSolution direct =
        simulate_gmfdsde(coeffs, boundary, control, grid, fc, rng);

    double sup_diff = 0.0;
    for (int k = 0; k <= grid.horizon_T_index(); ++k) {
        const auto a = picard.x.column(k);
        const auto b = direct.x.column(k);
        for (int i = 0; i < c.n_particles; ++i) {
            sup_diff = std::max(sup_diff, std::abs(a[i] - b[i]));
        }
    }
    const RateReport rate = contraction_rate(picard.picard_norms);

    std::vector<std::vector<double>> rows;
    for (std::size_t i = 0; i < picard.picard_norms.size(); ++i) {
        rows.push_back({static_cast<double>(i), picard.picard_norms[i]});
    }
    csv.write("contraction_forward_norms.csv", {"t", "norm"}, rows);

    const double beta_used = 1.0 + 4.0 * 0.15 * 0.15;
    ordered_json r;
    r["beta"] = beta_used;
    r["lipschitz_C"] = coeffs.lipschitz_C;
    r["rate"] = rate.rate;
    r["iterations"] = static_cast<int>(picard.picard_norms.size());
    r["pathwise_sup_difference"] = sup_diff;
    r["picard_tol"] = c.picard_tol;
    r["norms"] = picard.picard_norms;
    ordered_json pass;
    pass["rate_below_0_6"] = rate.sufficient && rate.rate <= 0.6;
    pass["agrees_with_euler"] = sup_diff <= 10.0 * c.picard_tol;
    r["pass"] = pass;
    return r;
}

// ---------------------------------------------------------------------------
// euler-order
// ---------------------------------------------------------------------------

ordered_json run_euler_order(ExperimentConfig& c, const CsvWriter& csv) {
    const double a = 1.0, s = 0.5, x0 = 1.0, T = 1.0;
    CoefficientSet coeffs;
    coeffs.b = [a](double, double x, double, const EmpiricalLaw&,
                   const EmpiricalLaw&, double, double) { return a * x; };
    coeffs.sigma = [s](double, double x, double, const EmpiricalLaw&,
                       const EmpiricalLaw&, double, double) { return s * x; };
    coeffs.lipschitz_C = 1.0;

    const RandomSource rng(c.seed);
    std::vector<double> dts, errors;
    for (int p = 6; p <= 10; ++p) {
        const double dt = std::pow(2.0, -p);
        const TimeGrid grid = build_grid(T, 0.0, 0.0, dt);
        const BoundaryData boundary = make_initial_boundary(
            grid, c.n_particles, [x0](int, int) { return x0; });
        ForwardConfig fc = forward_config(c);
        fc.validate_coeffs = (p == 6);
        const ForwardSolution sol = simulate_gmfdsde(
            coeffs, boundary, ControlProcess::constant(0.0), grid, fc, rng);
        double err = 0.0;
        const auto xt = sol.x.column(grid.horizon_T_index());
        for (int i = 0; i < c.n_particles; ++i) {
            double bt = 0.0;
            for (int k = 0; k < grid.n_steps(); ++k) {
                bt += sol.noise.increment(i, k);
            }
            const double exact = x0 * std::exp((a - 0.5 * s * s) * T + s * bt);
            err += std::abs(xt[i] - exact);
        }
        dts.push_back(dt);
        errors.push_back(err / c.n_particles);
    }
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (std::size_t i = 0; i < dts.size(); ++i) {
        const double lx = std::log(dts[i]);
        const double ly = std::log(errors[i]);
        sx += lx; sy += ly; sxx += lx * lx; sxy += lx * ly;
    }
    const int n = static_cast<int>(dts.size());
    const double slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);

    std::vector<std::vector<double>> rows;
    for (std::size_t i = 0; i < dts.size(); ++i) {
        rows.push_back({dts[i], errors[i]});
    }
    csv.write("euler_order.csv", {"t", "strong_error"}, rows);

    ordered_json r;
    r["dts"] = dts;
    r["strong_errors"] = errors;
    r["slope"] = slope;
    ordered_json pass;
    pass["slope_within_0_15_of_half"] = std::abs(slope - 0.5) <= 0.15;
    r["pass"] = pass;
    return r;
}

// ---------------------------------------------------------------------------
// ito-check
// ---------------------------------------------------------------------------

ordered_json run_ito_check(ExperimentConfig& c, const CsvWriter& csv) {
    if (c.was_defaulted("dt")) c.dt = 1e-3;
    if (c.was_defaulted("interaction_budget")) c.interaction_budget = 32;

    const RandomSource rng(c.seed);
    const double x_probe = 0.3;

    const auto zero2 = [](double, const EmpiricalLaw&) { return 0.0; };
    MeasureFunctional f_linear{[](double x, const EmpiricalLaw&) { return x; },
                               [](double, const EmpiricalLaw&) { return 1.0; },
                               zero2,
                               nullptr,
                               nullptr};
    MeasureFunctional f_square{
        [](double x, const EmpiricalLaw&) { return x * x; },
        [](double x, const EmpiricalLaw&) { return 2.0 * x; },
        [](double, const EmpiricalLaw&) { return 2.0; },
        nullptr,
        nullptr};
    MeasureFunctional f_mean_sq{
        [](double, const EmpiricalLaw& mu) {
            const double m = mu.mean();
            return m * m;
        },
        zero2,
        zero2,
        [](double, const EmpiricalLaw& mu, double) { return 2.0 * mu.mean(); },
        nullptr};

    struct System {
        std::string name;
        CoefficientSet coeffs;
    };
    std::vector<System> systems;
    {
        CoefficientSet drift_free;
        drift_free.sigma = [](double, double, double, const EmpiricalLaw&,
                              const EmpiricalLaw&, double, double) {
            return 1.0;
        };
        drift_free.lipschitz_C = 0.1;
        systems.push_back({"b0", drift_free});
        CoefficientSet linear = drift_free;
        linear.b = [](double, double x, double, const EmpiricalLaw&,
                      const EmpiricalLaw&, double, double) { return 0.5 * x; };
        linear.lipschitz_C = 0.6;
        systems.push_back({"linear", linear});
    }
    struct Functional {
        std::string name;
        const MeasureFunctional* f;
    };
    const std::vector<Functional> functionals = {
        {"x", &f_linear}, {"x2", &f_square}, {"mean2", &f_mean_sq}};

    ordered_json residuals, residuals_half;
    double worst = 0.0, worst_half = 0.0;
    for (const auto& sys : systems) {
        for (int half = 0; half < 2; ++half) {
            const double dt = half ? c.dt / 2.0 : c.dt;
            const TimeGrid grid = build_grid(c.T, 0.0, 0.0, dt);
            const BoundaryData boundary = make_initial_boundary(
                grid, c.n_particles, [&rng](int i, int) {
                    return 0.2 + 0.3 * rng.normal(StreamDomain::scratch,
                                                  static_cast<std::uint32_t>(i),
                                                  999u);
                });
            ForwardConfig fc = forward_config(c);
            fc.validate_coeffs = false;
            const ForwardSolution sol =
                simulate_gmfdsde(sys.coeffs, boundary,
                                 ControlProcess::constant(0.0), grid, fc, rng);
            for (const auto& fn : functionals) {
                const ItoReport rep =
                    verify_ito_formula(sys.coeffs, *fn.f, sol, x_probe,
                                       c.interaction_budget);
                const std::string key = sys.name + "_" + fn.name;
                if (half) {
                    residuals_half[key] = rep.max_mean_residual;
                    worst_half = std::max(worst_half, rep.max_mean_residual);
                } else {
                    residuals[key] = rep.max_mean_residual;
                    worst = std::max(worst, rep.max_mean_residual);
                    if (fn.name == "mean2" || sys.name == "b0") {
                        std::vector<std::vector<double>> rows;
                        for (std::size_t k = 0; k < rep.node_residuals.size();
                             ++k) {
                            rows.push_back({grid.time(static_cast<int>(k)),
                                            rep.node_residuals[k]});
                        }
                        csv.write("ito_" + key + ".csv", {"t", "residual"},
                                  rows);
                    }
                }
            }
        }
    }

    ordered_json r;
    r["residuals"] = residuals;
    r["residuals_half_dt"] = residuals_half;
    r["max_residual"] = worst;
    r["max_residual_half_dt"] = worst_half;
    ordered_json pass;
    pass["all_below_0_01"] = worst <= 0.01;
    pass["decreasing_when_dt_halves"] = worst_half <= worst;
    r["pass"] = pass;
    return r;
}

// ---------------------------------------------------------------------------
// lions-check
// ---------------------------------------------------------------------------

ordered_json run_lions_check(ExperimentConfig& c, const CsvWriter& csv) {
    const RandomSource rng(c.seed);
    std::vector<double> atoms(c.n_particles);
    for (int i = 0; i < c.n_particles; ++i) {
        atoms[i] = 0.5 + rng.normal(StreamDomain::scratch,
                                    static_cast<std::uint32_t>(i), 7u);
    }
    const EmpiricalLaw mu(std::move(atoms), 1);

    const auto mean_of = [](const EmpiricalLaw& law) { return law.mean(); };
    const std::function<double(const EmpiricalLaw&)> f1 = mean_of;
    const std::function<double(const EmpiricalLaw&)> f2 =
        [](const EmpiricalLaw& law) {
            const double m = law.mean();
            return m * m;
        };
    const std::function<double(const EmpiricalLaw&)> f3 =
        [](const EmpiricalLaw& law) { return law.second_moment(); };

    MeasureDerivative d1{[](const EmpiricalLaw&, std::span<const double>,
                            std::span<double> out) { out[0] = 1.0; }};
    MeasureDerivative d2{[](const EmpiricalLaw& law, std::span<const double>,
                            std::span<double> out) {
        out[0] = 2.0 * law.mean();
    }};
    MeasureDerivative d3{[](const EmpiricalLaw&, std::span<const double> y,
                            std::span<double> out) { out[0] = 2.0 * y[0]; }};

    const int directions = 16;
    const LionsCheckReport r1 =
        check_lions_derivative(f1, d1, mu, directions, rng);
    const LionsCheckReport r2 =
        check_lions_derivative(f2, d2, mu, directions, rng);
    const LionsCheckReport r3 =
        check_lions_derivative(f3, d3, mu, directions, rng);

    std::vector<std::vector<double>> rows;
    const int ne = static_cast<int>(r1.epsilons.size());
    for (int e = 0; e < ne; ++e) {
        double w1 = 0, w2 = 0, w3 = 0;
        for (int d = 0; d < directions; ++d) {
            w1 = std::max(w1, r1.errors[d * ne + e]);
            w2 = std::max(w2, r2.errors[d * ne + e]);
            w3 = std::max(w3, r3.errors[d * ne + e]);
        }
        rows.push_back({r1.epsilons[e], w1, w2, w3});
    }
    csv.write("lions_errors.csv", {"t", "err_linear", "err_mean_sq", "err_second_moment"},
              rows);

    ordered_json r;
    r["linear_max_error"] = r1.max_relative_error;
    r["mean_sq_max_error"] = r2.max_relative_error;
    r["second_moment_max_error"] = r3.max_relative_error;
    r["mean_sq_slope"] = r2.error_slope;
    r["second_moment_slope"] = r3.error_slope;
    ordered_json pass;
    pass["linear_below_1e8"] = r1.max_relative_error <= 1e-8;
    pass["mean_sq_below_1e4"] = r2.max_relative_error <= 1e-4;
    pass["second_moment_below_1e4"] = r3.max_relative_error <= 1e-4;
    pass["linear_decay_slope"] =
        r2.error_slope >= 0.9 && r3.error_slope >= 0.9;
    r["pass"] = pass;
    return r;
}

// ---------------------------------------------------------------------------
// lq-control
// ---------------------------------------------------------------------------

ordered_json run_lq_control(ExperimentConfig& c, const CsvWriter& csv) {
    if (c.was_defaulted("dt")) c.dt = 1e-3;
    if (c.was_defaulted("opt_step")) c.opt_step = 0.25;
    if (c.was_defaulted("opt_iterations")) c.opt_iterations = 45;
    if (c.was_defaulted("picard_tol")) c.picard_tol = 1e-8;

    const double x0 = 1.0;
    const oracles::RiccatiLq riccati{c.T, x0};
    const CoefficientSet coeffs = lq_coefficients(false);
    const RandomSource rng(c.seed);
    const TimeGrid grid = build_grid(c.T, 0.0, 0.0, c.dt);
    const BoundaryData boundary =
        make_initial_boundary(grid, c.n_particles, [x0](int, int) { return x0; });

    const ForwardConfig fc = forward_config(c);
    const BackwardConfig bc = backward_config(c, 2);
    OptimizerConfig oc;
    oc.step = c.opt_step;
    oc.iterations = c.opt_iterations;

    const OptimizerResult opt = optimize_control(
        coeffs, boundary, ControlProcess::constant(0.0), grid, oc, fc, bc, rng);

    ForwardConfig quiet = fc;
    quiet.validate_coeffs = false;
    const ForwardSolution star =
        simulate_gmfdsde(coeffs, boundary, opt.u_star, grid, quiet, rng);
    const double j_star = cost_functional(coeffs, star, opt.u_star).value;

    // RMS distance to the closed-form feedback law along the grid.
    double rms = 0.0;
    long long count = 0;
    for (int k = grid.zero_index(); k <= grid.horizon_T_index(); ++k) {
        const double t = grid.time(k);
        const auto xc = star.x.column(k);
        for (int i = 0; i < c.n_particles; ++i) {
            const double d =
                opt.u_star.value(i, k) - riccati.feedback(t, xc[i]);
            rms += d * d;
            ++count;
        }
    }
    rms = std::sqrt(rms / count);

    // Integral residual probes at the optimum.
    const AdjointSolution adjoint = solve_adjoint(coeffs, star, opt.u_star, bc);
    const auto make_probe = [&](std::uint32_t id) {
        const double kind = rng.uniform(StreamDomain::probe, id, 1u);
        const double a = -2.0 + 4.0 * rng.uniform(StreamDomain::probe, id, 2u);
        const double bcoef = -1.0 + 2.0 * rng.uniform(StreamDomain::probe, id, 3u);
        if (kind < 0.5) return ControlProcess::constant(a);
        const PathMatrix* xs = &star.x;
        return ControlProcess::from_callback(
            [xs, a, bcoef](int i, int k) { return bcoef * xs->at(i, k) + a * 0.25; });
    };
    double min_probe_margin = 1e300;
    for (int p = 0; p < c.n_probes; ++p) {
        const SmpResidualReport rep =
            smp_residual(coeffs, star, opt.u_star, adjoint,
                         make_probe(static_cast<std::uint32_t>(p)), bc.basis);
        min_probe_margin = std::min(
            min_probe_margin, rep.integral + 3.0 * rep.std_error);
    }

    // A perturbed control admits a strictly negative probe residual.
    const ControlProcess u_bad = ControlProcess::constant(0.0);
    const ForwardSolution bad =
        simulate_gmfdsde(coeffs, boundary, u_bad, grid, quiet, rng);
    const AdjointSolution adjoint_bad = solve_adjoint(coeffs, bad, u_bad, bc);
    double most_negative = 1e300;
    for (int p = 0; p < c.n_probes; ++p) {
        const SmpResidualReport rep =
            smp_residual(coeffs, bad, u_bad, adjoint_bad,
                         ControlProcess::constant(-1.0 + 2.0 * rng.uniform(
                                                              StreamDomain::probe,
                                                              9000u + p, 4u)),
                         bc.basis);
        most_negative =
            std::min(most_negative, rep.integral + 3.0 * rep.std_error);
    }

    std::vector<std::vector<double>> jrows;
    for (std::size_t i = 0; i < opt.j_history.size(); ++i) {
        jrows.push_back({static_cast<double>(i), opt.j_history[i]});
    }
    csv.write("lq_control_j.csv", {"t", "J"}, jrows);
    std::vector<std::vector<double>> urows;
    for (int k = grid.zero_index(); k <= grid.horizon_T_index(); ++k) {
        double um = 0.0;
        for (int i = 0; i < c.n_particles; ++i) um += opt.u_star.value(i, k);
        urows.push_back({grid.time(k), um / c.n_particles,
                         column_mean(adjoint.p, k)});
    }
    csv.write("lq_control_u.csv", {"t", "u_mean", "p_mean"}, urows);

    const double j_exact = riccati.optimal_cost();
    ordered_json r;
    r["J_optimizer"] = opt.best_j;
    r["J_final_resim"] = j_star;
    r["J_riccati"] = j_exact;
    r["rel_err"] = std::abs(opt.best_j - j_exact) / j_exact;
    r["feedback_rms"] = rms;
    r["min_probe_margin"] = min_probe_margin;
    r["most_negative_probe_margin_at_bad_control"] = most_negative;
    r["converged"] = opt.converged;
    ordered_json pass;
    pass["j_within_2pct"] = std::abs(opt.best_j - j_exact) / j_exact <= 0.02;
    pass["feedback_rms_below_0_05"] = rms <= 0.05;
    pass["probes_nonnegative_at_optimum"] = min_probe_margin >= 0.0;
    pass["negative_probe_exists_at_bad_control"] = most_negative < 0.0;
    r["pass"] = pass;
    return r;
}

// ---------------------------------------------------------------------------
// lq-delay-control
// ---------------------------------------------------------------------------

ordered_json run_lq_delay_control(ExperimentConfig& c,
                                  const CsvWriter& csv) {
    if (c.was_defaulted("delta")) c.delta = 0.25;
    if (c.was_defaulted("dt")) c.dt = 0.0125;
    if (c.was_defaulted("opt_step")) c.opt_step = 0.25;
    if (c.was_defaulted("opt_iterations")) c.opt_iterations = 80;
    if (c.was_defaulted("picard_tol")) c.picard_tol = 1e-8;

    const double x0 = 1.0;
    const CoefficientSet coeffs = lq_coefficients(true);
    const RandomSource rng(c.seed);
    const TimeGrid grid = build_grid(c.T, 0.0, c.delta, c.dt);
    const BoundaryData boundary =
        make_initial_boundary(grid, c.n_particles, [x0](int, int) { return x0; });

    const ForwardConfig fc = forward_config(c);
    const BackwardConfig bc = backward_config(c, 2, true);
    OptimizerConfig oc;
    oc.step = c.opt_step;
    oc.iterations = c.opt_iterations;

    const OptimizerResult opt = optimize_control(
        coeffs, boundary, ControlProcess::constant(0.0), grid, oc, fc, bc, rng);

    const double j_dp = oracles::delayed_lq_dp_value(
        c.T, c.dt, grid.delay_steps(), x0);

    // Gateaux consistency on the delayed dynamics.
    const int zero = grid.zero_index();
    const ControlProcess u_g = ControlProcess::from_callback(
        [zero](int, int k) { return k < zero ? 0.0 : 0.3; });
    const TimeGrid* gptr = &grid;
    const ControlProcess v_g = ControlProcess::from_callback(
        [zero, gptr](int, int k) {
            return k < zero ? 0.0 : 0.5 * std::sin(2.0 * kPi * gptr->time(k));
        });
    const GateauxReport gateaux = gateaux_consistency_check(
        coeffs, boundary, u_g, v_g, grid, fc, bc, rng);

    std::vector<std::vector<double>> jrows;
    for (std::size_t i = 0; i < opt.j_history.size(); ++i) {
        jrows.push_back({static_cast<double>(i), opt.j_history[i]});
    }
    csv.write("lq_delay_j.csv", {"t", "J"}, jrows);

    ordered_json r;
    r["J_optimizer"] = opt.best_j;
    r["J_dp"] = j_dp;
    r["rel_err"] = std::abs(opt.best_j - j_dp) / j_dp;
    r["gateaux_fd"] = gateaux.fd_value;
    r["gateaux_duality"] = gateaux.duality_value;
    r["gateaux_rel_err"] = gateaux.relative_error;
    r["converged"] = opt.converged;
    ordered_json pass;
    pass["j_within_3pct"] = std::abs(opt.best_j - j_dp) / j_dp <= 0.03;
    pass["gateaux_within_8pct"] = gateaux.relative_error <= 0.08;
    r["pass"] = pass;
    return r;
}

// ---------------------------------------------------------------------------
// gateaux-check
// ---------------------------------------------------------------------------

ordered_json run_gateaux_check(ExperimentConfig& c,
                               const CsvWriter& csv) {
    if (c.was_defaulted("dt")) c.dt = 1e-3;
    if (c.was_defaulted("picard_tol")) c.picard_tol = 1e-8;

    const CoefficientSet coeffs = lq_coefficients(false);
    const RandomSource rng(c.seed);
    const TimeGrid grid = build_grid(c.T, 0.0, 0.0, c.dt);
    const BoundaryData boundary =
        make_initial_boundary(grid, c.n_particles, [](int, int) { return 1.0; });

    const ControlProcess u = ControlProcess::constant(0.2);
    const TimeGrid* gptr = &grid;
    const ControlProcess v = ControlProcess::from_callback(
        [gptr](int, int k) { return 0.5 * std::sin(2.0 * kPi * gptr->time(k)); });

    const GateauxReport rep = gateaux_consistency_check(
        coeffs, boundary, u, v, grid, forward_config(c), backward_config(c, 2),
        rng);

    csv.write("gateaux.csv", {"t", "fd", "duality"},
              {{0.0, rep.fd_value, rep.duality_value}});

    ordered_json r;
    r["fd_value"] = rep.fd_value;
    r["duality_value"] = rep.duality_value;
    r["relative_error"] = rep.relative_error;
    ordered_json pass;
    pass["within_5pct"] = rep.relative_error <= 0.05;
    r["pass"] = pass;
    return r;
}

// ---------------------------------------------------------------------------

using ExperimentFn =
    std::function<ordered_json(ExperimentConfig&, const CsvWriter&)>;

const std::map<std::string, ExperimentFn>& registry() {
    static const std::map<std::string, ExperimentFn> reg = {
        {"counterexample", run_counterexample},
        {"comparison", run_comparison},
        {"contraction-backward", run_contraction_backward},
        {"contraction-forward", run_contraction_forward},
        {"euler-order", run_euler_order},
        {"ito-check", run_ito_check},
        {"lions-check", run_lions_check},
        {"lq-control", run_lq_control},
        {"lq-delay-control", run_lq_delay_control},
        {"gateaux-check", run_gateaux_check},
    };
    return reg;
}

void write_json(const fs::path& path, const ordered_json& j) {
    std::ofstream out(path);
    out << j.dump(2) << "\n";
}

bool all_pass(const ordered_json& result) {
    if (!result.contains("pass")) return false;
    for (const auto& [key, value] : result.at("pass").items()) {
        (void)key;
        if (value.is_boolean() && !value.get<bool>()) return false;
    }
    return true;
}

} // namespace

ordered_json ExperimentConfig::to_json() const {
    ordered_json j;
    j["experiment"] = experiment;
    j["T"] = T;
    j["K"] = K;
    j["delta"] = delta;
    j["dt"] = dt;
    j["n_particles"] = n_particles;
    j["seed"] = seed;
    j["beta_forward"] = beta_forward;
    j["beta_backward"] = beta_backward;
    j["basis_degree"] = basis_degree;
    j["picard_tol"] = picard_tol;
    j["picard_max_iter"] = picard_max_iter;
    j["interaction_budget"] = interaction_budget;
    j["opt_step"] = opt_step;
    j["opt_iterations"] = opt_iterations;
    j["n_probes"] = n_probes;
    j["output_dir"] = output_dir;
    return j;
}

const std::vector<std::string>& experiment_names() {
    static const std::vector<std::string> names = [] {
        std::vector<std::string> v;
        for (const auto& [name, fn] : registry()) {
            (void)fn;
            v.push_back(name);
        }
        return v;
    }();
    return names;
}

ValidationResult validate_config(const std::string& raw_text) {
    ValidationResult res;
    const nlohmann::json parsed =
        nlohmann::json::parse(raw_text, nullptr, /*allow_exceptions=*/false);
    if (parsed.is_discarded() || !parsed.is_object()) {
        res.errors.push_back("config is not a JSON object");
        return res;
    }

    ExperimentConfig& c = res.config;
    const std::set<std::string> known = {
        "experiment", "T", "K", "delta", "dt", "n_particles", "seed",
        "beta_forward", "beta_backward", "basis_degree", "picard_tol",
        "picard_max_iter", "interaction_budget", "opt_step", "opt_iterations",
        "n_probes", "output_dir"};
    for (const auto& [key, value] : parsed.items()) {
        (void)value;
        if (!known.count(key)) {
            res.errors.push_back("unknown key: " + key);
        }
    }

    const auto get_number = [&](const char* key, double lo, bool strict,
                                auto member) {
        using T = std::decay_t<decltype(c.*member)>;
        if (!parsed.contains(key)) {
            c.defaulted.insert(key);
            return;
        }
        const auto& v = parsed.at(key);
        if (!v.is_number()) {
            res.errors.push_back(std::string(key) + " must be a number");
            return;
        }
        const double d = v.get<double>();
        if (strict ? d <= lo : d < lo) {
            res.errors.push_back(std::string(key) + (strict ? " must be > " : " must be >= ") +
                                 std::to_string(lo));
            return;
        }
        c.*member = static_cast<T>(d);
    };

    if (!parsed.contains("experiment")) {
        res.errors.push_back("experiment name missing");
        c.defaulted.insert("experiment");
    } else if (!parsed.at("experiment").is_string()) {
        res.errors.push_back("experiment must be a string");
    } else {
        c.experiment = parsed.at("experiment").get<std::string>();
        if (!registry().count(c.experiment)) {
            res.errors.push_back("unknown experiment: " + c.experiment);
        }
    }

    get_number("T", 0.0, true, &ExperimentConfig::T);
    get_number("K", 0.0, false, &ExperimentConfig::K);
    get_number("delta", 0.0, false, &ExperimentConfig::delta);
    get_number("dt", 0.0, true, &ExperimentConfig::dt);
    get_number("n_particles", 2.0, false, &ExperimentConfig::n_particles);
    get_number("seed", 0.0, false, &ExperimentConfig::seed);
    get_number("beta_forward", 0.0, false, &ExperimentConfig::beta_forward);
    get_number("beta_backward", 0.0, false, &ExperimentConfig::beta_backward);
    get_number("basis_degree", 0.0, false, &ExperimentConfig::basis_degree);
    get_number("picard_tol", 0.0, false, &ExperimentConfig::picard_tol);
    get_number("picard_max_iter", 1.0, false, &ExperimentConfig::picard_max_iter);
    get_number("interaction_budget", 2.0, false,
               &ExperimentConfig::interaction_budget);
    get_number("opt_step", 0.0, false, &ExperimentConfig::opt_step);
    get_number("opt_iterations", 0.0, false, &ExperimentConfig::opt_iterations);
    get_number("n_probes", 1.0, false, &ExperimentConfig::n_probes);

    if (!parsed.contains("output_dir")) {
        c.defaulted.insert("output_dir");
    } else if (!parsed.at("output_dir").is_string()) {
        res.errors.push_back("output_dir must be a string");
    } else {
        c.output_dir = parsed.at("output_dir").get<std::string>();
    }

    // Grid arithmetic: every declared duration must sit on the dt lattice.
    if (!c.was_defaulted("dt") || !c.was_defaulted("delta")) {
        if (c.delta > 0.0 && !is_grid_multiple(c.delta, c.dt)) {
            res.errors.push_back("delta is not an integer multiple of dt "
                                 "(fields: delta, dt)");
        }
    }
    if (!is_grid_multiple(c.T, c.dt)) {
        res.errors.push_back("T is not an integer multiple of dt (fields: T, dt)");
    }
    if (c.K > 0.0 && !is_grid_multiple(c.K, c.dt)) {
        res.errors.push_back("K is not an integer multiple of dt (fields: K, dt)");
    }
    return res;
}

int run_experiment(const ExperimentConfig& config) {
    const auto it = registry().find(config.experiment);
    if (it == registry().end()) {
        std::cerr << "unknown experiment: " << config.experiment << "\n";
        return 2;
    }
    const fs::path dir(config.output_dir);
    std::error_code ec;
    fs::create_directories(dir, ec);
    const CsvWriter csv{dir};

    ExperimentConfig resolved = config;
    ordered_json result;
    try {
        result = it->second(resolved, csv);
    } catch (const nonconvergence_error& e) {
        ordered_json diag;
        diag["error"] = e.what();
        diag["norm_history"] = e.norm_history();
        write_json(dir / "diagnostics.json", diag);
        std::cerr << "non-convergence: " << e.what() << "\n";
        return 3;
    } catch (const divergence_error& e) {
        ordered_json diag;
        diag["error"] = e.what();
        diag["step"] = e.step();
        write_json(dir / "diagnostics.json", diag);
        std::cerr << "divergence: " << e.what() << "\n";
        return 4;
    }

    result["pass_all"] = all_pass(result);
    write_json(dir / "result.json", result);

    ordered_json manifest;
    manifest["library_version"] = library_version;
    manifest["config"] = resolved.to_json();
    write_json(dir / "manifest.json", manifest);
    return 0;
}

} // namespace mfc
