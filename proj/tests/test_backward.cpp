#include <doctest.h>

#include <cmath>

#include "mfc/backward.hpp"

using namespace mfc;

namespace {

BoundaryData terminal_const(const TimeGrid& grid, int n, double y,
                            double z = 0.0) {
    return make_terminal_boundary(
        grid, n, [y](int, int) { return y; }, [z](int, int) { return z; });
}

DriverSpec zero_driver() {
    DriverSpec d;
    d.f = [](const DriverContext&, const DriverArgs&) { return 0.0; };
    d.uses_own = false;
    d.uses_primed = false;
    d.uses_anticipated = false;
    d.lipschitz_C = 0.1;
    return d;
}

} // namespace

TEST_CASE("zero driver with Brownian terminal recovers the martingale") {
    const TimeGrid grid = build_grid(1.0, 0.0, 0.0, 0.01);
    const RandomSource rng(31);
    const int n = 100000;
    const BrownianDriver noise = sample_brownian(grid, n, 1, rng);
    const PathMatrix b = noise.path_values(grid);
    const BoundaryData terminal = make_terminal_boundary(
        grid, n, [&b](int i, int k) { return b.at(i, k); },
        [](int, int) { return 1.0; });
    BackwardConfig cfg;
    cfg.basis.degree = 2;
    FeatureSet features;
    features.values = &b;
    const BackwardSolution sol =
        solve_mfabsde(zero_driver(), terminal, grid, features, noise, cfg);

    // Node error: root-mean-square fit error across the ensemble.
    double worst_y = 0.0, worst_z = 0.0;
    for (int k = 10; k < grid.horizon_T_index(); k += 10) {
        double ey = 0.0, ez = 0.0;
        for (int i = 0; i < n; ++i) {
            const double dy = sol.Y.at(i, k) - b.at(i, k);
            const double dz = sol.Z.at(i, k) - 1.0;
            ey += dy * dy;
            ez += dz * dz;
        }
        worst_y = std::max(worst_y, std::sqrt(ey / n));
        worst_z = std::max(worst_z, std::sqrt(ez / n));
    }
    CHECK(worst_y <= 0.02);
    CHECK(worst_z <= 0.02);
}

TEST_CASE("driver -y yields the exponential decay oracle") {
    const TimeGrid grid = build_grid(1.0, 0.0, 0.0, 0.01);
    const RandomSource rng(32);
    const int n = 200;
    const BrownianDriver noise = sample_brownian(grid, n, 1, rng);
    const PathMatrix b = noise.path_values(grid);
    DriverSpec d;
    d.f = [](const DriverContext&, const DriverArgs& a) { return -a.y; };
    d.uses_primed = false;
    d.uses_anticipated = false;
    d.lipschitz_C = 1.0;
    BackwardConfig cfg;
    cfg.basis.degree = 2;
    FeatureSet features;
    features.values = &b;
    const BackwardSolution sol =
        solve_mfabsde(d, terminal_const(grid, n, 1.0), grid, features, noise,
                      cfg);
    CHECK(sol.y0_mean() == doctest::Approx(std::exp(-1.0)).epsilon(0.01));
}

TEST_CASE("constant driver with zero terminal integrates to T") {
    const TimeGrid grid = build_grid(1.0, 0.0, 0.0, 0.01);
    const RandomSource rng(33);
    const int n = 500;
    const BrownianDriver noise = sample_brownian(grid, n, 1, rng);
    const PathMatrix b = noise.path_values(grid);
    DriverSpec d = zero_driver();
    d.f = [](const DriverContext&, const DriverArgs&) { return 1.0; };
    BackwardConfig cfg;
    cfg.basis.degree = 2;
    FeatureSet features;
    features.values = &b;
    const BackwardSolution sol =
        solve_mfabsde(d, terminal_const(grid, n, 0.0), grid, features, noise,
                      cfg);
    CHECK(sol.y0_mean() == doctest::Approx(1.0).epsilon(1e-6));
    double zmax = 0.0;
    for (int k = 0; k < grid.horizon_T_index(); ++k) {
        for (int i = 0; i < n; i += 17) {
            zmax = std::max(zmax, std::abs(sol.Z.at(i, k)));
        }
    }
    CHECK(zmax <= 1e-9);
}

TEST_CASE("mean-field driver on a deterministic solution gives e") {
    const TimeGrid grid = build_grid(1.0, 0.0, 0.0, 1e-3);
    const RandomSource rng(34);
    const int n = 100;
    const BrownianDriver noise = sample_brownian(grid, n, 1, rng);
    const PathMatrix b = noise.path_values(grid);
    DriverSpec d;
    d.f = [](const DriverContext&, const DriverArgs& a) { return a.y_prime; };
    d.uses_own = false;
    d.uses_anticipated = false;
    d.lipschitz_C = 1.0;
    BackwardConfig cfg;
    cfg.basis.degree = 1;
    cfg.interaction_budget = n;
    FeatureSet features;
    features.values = &b;
    const BackwardSolution sol =
        solve_mfabsde(d, terminal_const(grid, n, 1.0), grid, features, noise,
                      cfg);
    CHECK(sol.y0_mean() == doctest::Approx(std::exp(1.0)).epsilon(0.005));
}

TEST_CASE("terminal segments are copied bit-exactly") {
    const TimeGrid grid = build_grid(0.5, 0.25, 0.25, 0.25);
    const RandomSource rng(35);
    const int n = 32;
    const BrownianDriver noise = sample_brownian(grid, n, 1, rng);
    const PathMatrix b = noise.path_values(grid);
    const BoundaryData terminal = make_terminal_boundary(
        grid, n, [](int i, int k) { return 0.1 * i - 0.2 * k; },
        [](int i, int k) { return 0.01 * i + 0.03 * k; });
    BackwardConfig cfg;
    cfg.basis.degree = 1;
    FeatureSet features;
    features.values = &b;
    DriverSpec d;
    d.f = [](const DriverContext&, const DriverArgs& a) {
        return 0.2 * a.y + 0.1 * a.y_adv;
    };
    d.uses_primed = false;
    d.lipschitz_C = 0.2;
    const BackwardSolution sol =
        solve_mfabsde(d, terminal, grid, features, noise, cfg);
    for (int k = grid.horizon_T_index(); k <= grid.n_steps(); ++k) {
        for (int i = 0; i < n; ++i) {
            CHECK(sol.Y.at(i, k) == terminal.terminal_y(i, k));
            CHECK(sol.Z.at(i, k) == terminal.terminal_z(i, k));
        }
    }
}

TEST_CASE("zero driver preserves the terminal mean at every node") {
    const TimeGrid grid = build_grid(1.0, 0.0, 0.0, 0.02);
    const RandomSource rng(36);
    const int n = 5000;
    const BrownianDriver noise = sample_brownian(grid, n, 1, rng);
    const PathMatrix b = noise.path_values(grid);
    const BoundaryData terminal = make_terminal_boundary(
        grid, n,
        [&b](int i, int k) {
            const double w = b.at(i, k);
            return w * w - 1.0;
        });
    BackwardConfig cfg;
    cfg.basis.degree = 2;
    FeatureSet features;
    features.values = &b;
    const BackwardSolution sol =
        solve_mfabsde(zero_driver(), terminal, grid, features, noise, cfg);
    double xi_mean = 0.0;
    for (double v : terminal.terminal_y_column(grid.horizon_T_index())) {
        xi_mean += v;
    }
    xi_mean /= n;
    for (int k = 0; k <= grid.horizon_T_index(); k += 5) {
        double ym = 0.0;
        for (double v : sol.Y.column(k)) ym += v;
        ym /= n;
        CHECK(ym == doctest::Approx(xi_mean).epsilon(1e-9));
    }
}

TEST_CASE("full and reduced code paths agree on shared data") {
    const TimeGrid grid = build_grid(1.0, 0.25, 0.25, 0.05);
    const RandomSource rng(37);
    const int n = 400;
    const BrownianDriver noise = sample_brownian(grid, n, 1, rng);
    const PathMatrix b = noise.path_values(grid);
    const BoundaryData terminal = make_terminal_boundary(
        grid, n, [&b](int i, int k) { return b.at(i, k); });
    FeatureSet features;
    features.values = &b;
    BackwardConfig cfg;
    cfg.basis.degree = 2;
    cfg.interaction_budget = n;

    SUBCASE("anticipated BSDE special case: driver ignores primed slots") {
        const auto f = [](const DriverContext&, const DriverArgs& a) {
            return 0.3 * a.y + 0.2 * a.y_adv;
        };
        DriverSpec full;
        full.f = f;
        full.lipschitz_C = 0.3;
        DriverSpec reduced = full;
        reduced.uses_primed = false;
        const BackwardSolution a =
            solve_mfabsde(full, terminal, grid, features, noise, cfg);
        const BackwardSolution c =
            solve_mfabsde(reduced, terminal, grid, features, noise, cfg);
        double worst = 0.0;
        for (int k = 0; k <= grid.n_steps(); ++k) {
            for (int i = 0; i < n; ++i) {
                worst = std::max(worst, std::abs(a.Y.at(i, k) - c.Y.at(i, k)));
                worst = std::max(worst, std::abs(a.Z.at(i, k) - c.Z.at(i, k)));
            }
        }
        CHECK(worst <= 1e-10);
    }
    SUBCASE("mean-field BSDE special case: driver ignores anticipated slots") {
        const auto f = [](const DriverContext&, const DriverArgs& a) {
            return 0.3 * a.y + 0.2 * a.y_prime;
        };
        DriverSpec full;
        full.f = f;
        full.lipschitz_C = 0.3;
        DriverSpec reduced = full;
        reduced.uses_anticipated = false;
        const BackwardSolution a =
            solve_mfabsde(full, terminal, grid, features, noise, cfg);
        const BackwardSolution c =
            solve_mfabsde(reduced, terminal, grid, features, noise, cfg);
        double worst = 0.0;
        for (int k = 0; k <= grid.n_steps(); ++k) {
            for (int i = 0; i < n; ++i) {
                worst = std::max(worst, std::abs(a.Y.at(i, k) - c.Y.at(i, k)));
                worst = std::max(worst, std::abs(a.Z.at(i, k) - c.Z.at(i, k)));
            }
        }
        CHECK(worst <= 1e-10);
    }
}

TEST_CASE("solutions are linear in terminal data for linear drivers") {
    const TimeGrid grid = build_grid(1.0, 0.0, 0.0, 0.05);
    const RandomSource rng(38);
    const int n = 300;
    const BrownianDriver noise = sample_brownian(grid, n, 1, rng);
    const PathMatrix b = noise.path_values(grid);
    FeatureSet features;
    features.values = &b;
    DriverSpec d;
    d.f = [](const DriverContext&, const DriverArgs& a) {
        return 0.3 * a.y + 0.2 * a.z;
    };
    d.uses_primed = false;
    d.uses_anticipated = false;
    d.lipschitz_C = 0.3;
    BackwardConfig cfg;
    cfg.basis.degree = 2;

    const BoundaryData t1 = make_terminal_boundary(
        grid, n, [&b](int i, int k) { return b.at(i, k); });
    const BoundaryData t2 = make_terminal_boundary(
        grid, n, [&b](int i, int k) { return b.at(i, k) * b.at(i, k); });
    const double alpha = 1.7, beta = -0.6;
    const BoundaryData t3 = make_terminal_boundary(
        grid, n, [&](int i, int k) {
            return alpha * b.at(i, k) + beta * b.at(i, k) * b.at(i, k);
        });
    const BackwardSolution s1 = solve_mfabsde(d, t1, grid, features, noise, cfg);
    const BackwardSolution s2 = solve_mfabsde(d, t2, grid, features, noise, cfg);
    const BackwardSolution s3 = solve_mfabsde(d, t3, grid, features, noise, cfg);
    double worst = 0.0;
    for (int k = 0; k <= grid.horizon_T_index(); ++k) {
        for (int i = 0; i < n; ++i) {
            worst = std::max(
                worst, std::abs(s3.Y.at(i, k) - alpha * s1.Y.at(i, k) -
                                beta * s2.Y.at(i, k)));
        }
    }
    CHECK(worst <= 1e-8);
}

TEST_CASE("a priori estimate on the documented cases") {
    const TimeGrid grid = build_grid(1.0, 0.0, 0.0, 0.01);
    const RandomSource rng(39);
    const int n = 10000;
    const BrownianDriver noise = sample_brownian(grid, n, 1, rng);
    const PathMatrix b = noise.path_values(grid);
    FeatureSet features;
    features.values = &b;
    BackwardConfig cfg;
    cfg.basis.degree = 2;
    const double beta = 2.0;

    SUBCASE("zero data gives zero on both sides") {
        const BackwardSolution sol = solve_mfabsde(
            zero_driver(), terminal_const(grid, n, 0.0), grid, features, noise,
            cfg);
        const PathMatrix g0(n, grid.n_nodes(), 0.0);
        const AprioriReport rep =
            apriori_estimate_check(sol, zero_driver(), g0, beta);
        CHECK(rep.left == doctest::Approx(0.0));
        CHECK(rep.right == doctest::Approx(0.0));
    }
    SUBCASE("Brownian terminal with zero driver") {
        const BoundaryData terminal = make_terminal_boundary(
            grid, n, [&b](int i, int k) { return b.at(i, k); },
            [](int, int) { return 1.0; });
        const BackwardSolution sol = solve_mfabsde(zero_driver(), terminal,
                                                   grid, features, noise, cfg);
        const PathMatrix g0(n, grid.n_nodes(), 0.0);
        const AprioriReport rep =
            apriori_estimate_check(sol, zero_driver(), g0, beta);
        // Analytic: left = int_0^1 (s + 1) e^{2s} ds, right = e^2.
        double left_exact = 0.0;
        const int m = 20000;
        for (int i = 0; i < m; ++i) {
            const double s = (i + 0.5) / m;
            left_exact += (s + 1.0) * std::exp(2.0 * s) / m;
        }
        CHECK(rep.left == doctest::Approx(left_exact).epsilon(0.02));
        CHECK(rep.right == doctest::Approx(std::exp(2.0)).epsilon(0.02));
        CHECK(rep.slack >= -0.02);
    }
    SUBCASE("constant driver with zero terminal") {
        DriverSpec d = zero_driver();
        d.f = [](const DriverContext&, const DriverArgs&) { return 1.0; };
        const BackwardSolution sol = solve_mfabsde(
            d, terminal_const(grid, n, 0.0), grid, features, noise, cfg);
        const PathMatrix g0(n, grid.n_nodes(), 1.0);
        const AprioriReport rep = apriori_estimate_check(sol, d, g0, beta);
        const double right_exact = (2.0 / beta) * (std::exp(beta) - 1.0) / beta;
        CHECK(rep.right == doctest::Approx(right_exact).epsilon(0.005));
        CHECK(rep.slack >= -0.02);
    }
    SUBCASE("a solution-dependent driver is rejected") {
        DriverSpec d = zero_driver();
        d.uses_own = true;
        const BackwardSolution sol = solve_mfabsde(
            zero_driver(), terminal_const(grid, n, 0.0), grid, features, noise,
            cfg);
        const PathMatrix g0(n, grid.n_nodes(), 0.0);
        CHECK_THROWS_AS(apriori_estimate_check(sol, d, g0, beta),
                        precondition_error);
    }
}

TEST_CASE("contraction rate does not increase when beta doubles") {
    const TimeGrid grid = build_grid(1.0, 0.25, 0.25, 0.025);
    const RandomSource rng(40);
    const int n = 400;
    const BrownianDriver noise = sample_brownian(grid, n, 1, rng);
    const PathMatrix b = noise.path_values(grid);
    const BoundaryData terminal = make_terminal_boundary(
        grid, n, [&b](int i, int k) { return b.at(i, k); },
        [](int, int) { return 1.0; });
    FeatureSet features;
    features.values = &b;
    DriverSpec d;
    d.f = [](const DriverContext&, const DriverArgs& a) {
        return 0.5 * (a.y + a.z + a.y_adv + a.z_adv + a.y_prime + a.z_prime +
                      a.y_prime_adv + a.z_prime_adv);
    };
    d.lipschitz_C = 0.5;
    d.L_bound = 1.0;
    BackwardConfig cfg;
    cfg.basis.degree = 2;
    cfg.picard_tol = 0.0;
    cfg.picard_max_iter = 10;
    cfg.interaction_budget = 64;
    const double beta_paper = 21.0;
    std::vector<double> rates;
    for (double beta : {beta_paper, 2.0 * beta_paper}) {
        BackwardConfig c2 = cfg;
        c2.beta_backward = beta;
        const BackwardSolution sol =
            solve_mfabsde(d, terminal, grid, features, noise, c2);
        std::vector<double> clipped;
        for (double v : sol.picard_norms) {
            if (v < 1e-13) break;
            clipped.push_back(v);
        }
        rates.push_back(contraction_rate(clipped).rate);
    }
    CHECK(rates[0] <= 0.6);
    CHECK(rates[1] <= rates[0] * 1.05);
}

TEST_CASE("comparison run with identical data has no violations") {
    const TimeGrid grid = build_grid(1.0, 0.25, 0.25, 0.05);
    const RandomSource rng(41);
    const int n = 500;
    const BrownianDriver noise = sample_brownian(grid, n, 1, rng);
    const PathMatrix b = noise.path_values(grid);
    DriverSpec d2;
    d2.f = [](const DriverContext&, const DriverArgs& a) { return a.y_adv; };
    d2.lipschitz_C = 1.0;
    d2.uses_own = false;
    d2.uses_primed = false;
    d2.uses_anticipated = true;
    d2.flags = MonotonicityFlags{true, true, true, true, true, true};
    const BoundaryData terminal = make_terminal_boundary(
        grid, n, [&b](int i, int k) { return std::max(b.at(i, k), 0.0); });
    BackwardConfig cfg;
    cfg.basis.degree = 3;
    const ComparisonReport rep = comparison_run(d2, d2, terminal, terminal,
                                                grid, n, cfg, rng);
    CHECK(rep.violation_fraction == 0.0);
    CHECK(rep.bootstrap_monotone);
    CHECK(rep.y1_0 == rep.y2_0);
}

TEST_CASE("a constant driver gap integrates into the initial values") {
    const TimeGrid grid = build_grid(1.0, 0.25, 0.25, 0.025);
    const RandomSource rng(42);
    const int n = 4000;
    const BrownianDriver noise = sample_brownian(grid, n, 1, rng);
    const PathMatrix b = noise.path_values(grid);
    DriverSpec d2;
    d2.f = [](const DriverContext&, const DriverArgs& a) { return a.y_adv; };
    d2.lipschitz_C = 1.0;
    d2.uses_own = false;
    d2.uses_primed = false;
    d2.uses_anticipated = true;
    d2.flags = MonotonicityFlags{true, true, true, true, true, true};
    DriverSpec d1 = d2;
    d1.f = [](const DriverContext&, const DriverArgs& a) {
        return a.y_adv + 1.0;
    };
    const BoundaryData terminal = make_terminal_boundary(
        grid, n, [&b](int i, int k) { return std::max(b.at(i, k), 0.0); });
    BackwardConfig cfg;
    cfg.basis.degree = 3;
    const ComparisonReport rep =
        comparison_run(d1, d2, terminal, terminal, grid, n, cfg, rng);
    // The anticipated feedback compounds the +1 gap; it is at least T at 0.
    CHECK(rep.y1_0 - rep.y2_0 >= 1.0 - 0.02);
    CHECK(rep.violation_fraction <= 1e-3);
}

TEST_CASE("declared monotonicity is probe-falsified") {
    const TimeGrid grid = build_grid(1.0, 0.25, 0.25, 0.25);
    const RandomSource rng(43);
    const int n = 16;
    DriverSpec bad;
    bad.f = [](const DriverContext&, const DriverArgs& a) { return -a.y_prime; };
    bad.lipschitz_C = 1.0;
    bad.flags = MonotonicityFlags{true, true, true, true, true, true};
    const BrownianDriver noise = sample_brownian(grid, n, 1, rng);
    const PathMatrix b = noise.path_values(grid);
    const BoundaryData terminal = make_terminal_boundary(
        grid, n, [](int, int) { return 0.0; });
    BackwardConfig cfg;
    CHECK_THROWS_AS(
        comparison_run(bad, bad, terminal, terminal, grid, n, cfg, rng),
        precondition_error);
}

TEST_CASE("counterexample reproduces the closed-form values at desk scale") {
    const RandomSource rng(42);
    BackwardConfig cfg;
    cfg.basis.degree = 2;
    cfg.interaction_budget = 64;
    const CounterexampleReport rep =
        counterexample_clark_ocone(20000, 0.01, rng, cfg);
    CHECK(rep.y2_0 == 0.0);
    CHECK(rep.violation);
    CHECK(rep.y1_0 ==
          doctest::Approx(1.5 - 2.0 / std::sqrt(2.0 * 3.14159265358979323846))
              .epsilon(0.05));
    CHECK(rep.sampled_mean_xi1 ==
          doctest::Approx(-2.0 / std::sqrt(2.0 * 3.14159265358979323846))
              .epsilon(0.02));
}

TEST_CASE("driver Lipschitz probe flags a bad declaration") {
    const RandomSource rng(44);
    DriverSpec good;
    good.f = [](const DriverContext&, const DriverArgs& a) {
        return 0.4 * a.y + 0.4 * a.z_adv;
    };
    good.lipschitz_C = 0.4;
    CHECK(probe_driver_lipschitz(good, rng));
    DriverSpec bad = good;
    bad.lipschitz_C = 0.1;
    CHECK_FALSE(probe_driver_lipschitz(bad, rng));
}
