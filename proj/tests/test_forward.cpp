#include <doctest.h>

#include <cmath>

#include "mfc/forward.hpp"
#include "mfc/wasserstein.hpp"

using namespace mfc;

namespace {

CoefficientSet drift_only(CoefficientSet::StateFn b, double C = 1.0) {
    CoefficientSet c;
    c.b = std::move(b);
    c.lipschitz_C = C;
    return c;
}

BoundaryData const_initial(const TimeGrid& grid, int n, double value) {
    return make_initial_boundary(grid, n, [value](int, int) { return value; });
}

} // namespace

TEST_CASE("frozen dynamics keep the initial value") {
    const TimeGrid grid = build_grid(1.0, 0.0, 0.25, 0.25);
    const RandomSource rng(1);
    CoefficientSet c;
    c.b = [](double, double, double, const EmpiricalLaw&, const EmpiricalLaw&,
             double, double) { return 0.0; };
    c.sigma = c.b;
    c.lipschitz_C = 0.1;
    ForwardConfig cfg;
    cfg.n_particles = 16;
    const ForwardSolution sol =
        simulate_gmfdsde(c, const_initial(grid, 16, 2.5),
                         ControlProcess::constant(0.0), grid, cfg, rng);
    for (int k = 0; k <= grid.horizon_T_index(); ++k) {
        for (double v : sol.x.column(k)) CHECK(v == 2.5);
    }
}

TEST_CASE("linear drift reproduces the exponential") {
    const TimeGrid grid = build_grid(1.0, 0.0, 0.0, 1e-3);
    const RandomSource rng(2);
    const CoefficientSet c = drift_only(
        [](double, double x, double, const EmpiricalLaw&, const EmpiricalLaw&,
           double, double) { return x; });
    ForwardConfig cfg;
    cfg.n_particles = 2;
    const ForwardSolution sol =
        simulate_gmfdsde(c, const_initial(grid, 2, 1.0),
                         ControlProcess::constant(0.0), grid, cfg, rng);
    CHECK(sol.x.at(0, grid.horizon_T_index()) ==
          doctest::Approx(std::exp(1.0)).epsilon(0.002 / std::exp(1.0)));
}

TEST_CASE("state delay follows the method of steps") {
    const TimeGrid grid = build_grid(2.0, 0.0, 1.0, 1e-3);
    const RandomSource rng(3);
    const CoefficientSet c = drift_only(
        [](double, double, double x_d, const EmpiricalLaw&,
           const EmpiricalLaw&, double, double) { return x_d; });
    ForwardConfig cfg;
    cfg.n_particles = 2;
    const ForwardSolution sol =
        simulate_gmfdsde(c, const_initial(grid, 2, 1.0),
                         ControlProcess::constant(0.0), grid, cfg, rng);
    CHECK(sol.x.at(0, grid.horizon_T_index()) ==
          doctest::Approx(3.5).epsilon(0.005 / 3.5));
}

TEST_CASE("pure mean-field drift matches the mean ODE") {
    const TimeGrid grid = build_grid(1.0, 0.0, 0.0, 1e-3);
    const RandomSource rng(4);
    CoefficientSet c;
    c.b = [](double, double, double, const EmpiricalLaw& mu,
             const EmpiricalLaw&, double, double) { return mu.mean(); };
    c.sigma = [](double, double, double, const EmpiricalLaw&,
                 const EmpiricalLaw&, double, double) { return 0.2; };
    c.lipschitz_C = 1.0;
    ForwardConfig cfg;
    cfg.n_particles = 100000;
    const ForwardSolution sol =
        simulate_gmfdsde(c, const_initial(grid, cfg.n_particles, 1.0),
                         ControlProcess::constant(0.0), grid, cfg, rng);
    const EmpiricalLaw law = sol.law_at(grid.horizon_T_index());
    CHECK(law.mean() == doctest::Approx(std::exp(1.0)).epsilon(0.01 / std::exp(1.0)));
}

TEST_CASE("boundary segment is copied bit-exactly") {
    const TimeGrid grid = build_grid(0.5, 0.0, 0.25, 0.25);
    const RandomSource rng(5);
    const CoefficientSet c = drift_only(
        [](double, double x, double, const EmpiricalLaw&, const EmpiricalLaw&,
           double, double) { return x; });
    const BoundaryData boundary = make_initial_boundary(
        grid, 8, [](int i, int k) { return 0.1 * i + 0.01 * k; });
    ForwardConfig cfg;
    cfg.n_particles = 8;
    const ForwardSolution sol = simulate_gmfdsde(
        c, boundary, ControlProcess::constant(0.0), grid, cfg, rng);
    for (int k = 0; k <= grid.zero_index(); ++k) {
        for (int i = 0; i < 8; ++i) {
            CHECK(sol.x.at(i, k) == boundary.initial_segment.at(i, k));
        }
    }
}

TEST_CASE("identical seeds give bit-identical solutions") {
    const TimeGrid grid = build_grid(0.5, 0.0, 0.0, 0.01);
    const CoefficientSet c = drift_only(
        [](double, double x, double, const EmpiricalLaw&, const EmpiricalLaw&,
           double, double) { return -x; });
    CoefficientSet cs = c;
    cs.sigma = [](double, double, double, const EmpiricalLaw&,
                  const EmpiricalLaw&, double, double) { return 0.3; };
    ForwardConfig cfg;
    cfg.n_particles = 50;
    const ForwardSolution a =
        simulate_gmfdsde(cs, const_initial(grid, 50, 1.0),
                         ControlProcess::constant(0.0), grid, cfg,
                         RandomSource(99));
    const ForwardSolution b =
        simulate_gmfdsde(cs, const_initial(grid, 50, 1.0),
                         ControlProcess::constant(0.0), grid, cfg,
                         RandomSource(99));
    for (int k = 0; k <= grid.horizon_T_index(); ++k) {
        for (int i = 0; i < 50; ++i) CHECK(a.x.at(i, k) == b.x.at(i, k));
    }
}

TEST_CASE("divergent coefficients raise a divergence error naming the step") {
    const TimeGrid grid = build_grid(1.0, 0.0, 0.0, 0.1);
    const RandomSource rng(6);
    CoefficientSet c = drift_only(
        [](double t, double x, double, const EmpiricalLaw&,
           const EmpiricalLaw&, double, double) {
            return t > 0.45 ? std::numeric_limits<double>::quiet_NaN() : x;
        });
    ForwardConfig cfg;
    cfg.n_particles = 4;
    cfg.validate_coeffs = false;
    CHECK_THROWS_AS(simulate_gmfdsde(c, const_initial(grid, 4, 1.0),
                                     ControlProcess::constant(0.0), grid, cfg,
                                     rng),
                    divergence_error);
}

TEST_CASE("a bad Lipschitz declaration fails the entry probes") {
    const TimeGrid grid = build_grid(1.0, 0.0, 0.0, 0.1);
    const RandomSource rng(7);
    CoefficientSet c = drift_only(
        [](double, double x, double, const EmpiricalLaw&, const EmpiricalLaw&,
           double, double) { return 10.0 * x; },
        /*C=*/0.1);
    ForwardConfig cfg;
    cfg.n_particles = 4;
    CHECK_THROWS_AS(simulate_gmfdsde(c, const_initial(grid, 4, 1.0),
                                     ControlProcess::constant(0.0), grid, cfg,
                                     rng),
                    config_error);
}

TEST_CASE("picard on frozen dynamics converges in one iteration") {
    const TimeGrid grid = build_grid(1.0, 0.0, 0.0, 0.1);
    const RandomSource rng(8);
    CoefficientSet c;
    c.b = [](double, double, double, const EmpiricalLaw&, const EmpiricalLaw&,
             double, double) { return 0.0; };
    c.sigma = c.b;
    c.lipschitz_C = 0.1;
    ForwardConfig cfg;
    cfg.n_particles = 8;
    const ForwardSolution sol =
        picard_solve_forward(c, const_initial(grid, 8, 1.0),
                             ControlProcess::constant(0.0), grid, cfg, rng);
    REQUIRE(sol.picard_norms.size() == 1);
    CHECK(sol.picard_norms[0] == 0.0);
}

TEST_CASE("picard iterates contract and agree with the direct scheme") {
    const TimeGrid grid = build_grid(1.0, 0.0, 0.25, 0.005);
    const RandomSource rng(9);
    CoefficientSet c;
    c.b = [](double, double x, double x_d, const EmpiricalLaw& mu,
             const EmpiricalLaw& mu_d, double, double) {
        return 0.15 * x + 0.15 * x_d + 0.1 * mu.mean() + 0.1 * mu_d.mean();
    };
    c.sigma = [](double, double x, double, const EmpiricalLaw&,
                 const EmpiricalLaw&, double, double) {
        return 0.2 + 0.05 * x;
    };
    c.lipschitz_C = 0.15;
    ForwardConfig cfg;
    cfg.n_particles = 500;
    cfg.picard_tol = 1e-9;
    cfg.picard_max_iter = 40;
    const ForwardSolution pic =
        picard_solve_forward(c, const_initial(grid, 500, 1.0),
                             ControlProcess::constant(0.0), grid, cfg, rng);
    REQUIRE(pic.picard_norms.size() >= 4);
    for (std::size_t i = 2; i + 1 < pic.picard_norms.size(); ++i) {
        const double num = pic.picard_norms[i + 1];
        const double den = pic.picard_norms[i];
        if (den > 1e-12) {
            CHECK(num * num / (den * den) <= 0.6);
        }
    }
    const ForwardSolution dir =
        simulate_gmfdsde(c, const_initial(grid, 500, 1.0),
                         ControlProcess::constant(0.0), grid, cfg, rng);
    double sup = 0.0;
    for (int k = 0; k <= grid.horizon_T_index(); ++k) {
        for (int i = 0; i < 500; ++i) {
            sup = std::max(sup, std::abs(pic.x.at(i, k) - dir.x.at(i, k)));
        }
    }
    CHECK(sup <= 10.0 * cfg.picard_tol);
}

TEST_CASE("law at the horizon tightens as the ensemble grows") {
    CoefficientSet c;
    c.b = [](double, double, double, const EmpiricalLaw& mu,
             const EmpiricalLaw&, double, double) { return mu.mean(); };
    c.sigma = [](double, double, double, const EmpiricalLaw&,
                 const EmpiricalLaw&, double, double) { return 0.2; };
    c.lipschitz_C = 1.0;
    const TimeGrid grid = build_grid(1.0, 0.0, 0.0, 0.005);
    std::vector<double> dists;
    for (int n : {1000, 4000, 16000}) {
        ForwardConfig cfg;
        cfg.n_particles = n;
        const ForwardSolution a =
            simulate_gmfdsde(c, const_initial(grid, n, 1.0),
                             ControlProcess::constant(0.0), grid, cfg,
                             RandomSource(100));
        ForwardConfig cfg2;
        cfg2.n_particles = 2 * n;
        const ForwardSolution b =
            simulate_gmfdsde(c, const_initial(grid, 2 * n, 1.0),
                             ControlProcess::constant(0.0), grid, cfg2,
                             RandomSource(101));
        dists.push_back(w2_distance_1d(a.law_at(grid.horizon_T_index()),
                                       b.law_at(grid.horizon_T_index())));
    }
    CHECK(dists[1] <= dists[0] * 1.1);
    CHECK(dists[2] <= dists[1] * 1.1);
}

TEST_CASE("generator identity holds exactly for a linear functional") {
    const TimeGrid grid = build_grid(1.0, 0.0, 0.0, 0.01);
    const RandomSource rng(10);
    CoefficientSet c;
    c.sigma = [](double, double, double, const EmpiricalLaw&,
                 const EmpiricalLaw&, double, double) { return 1.0; };
    c.lipschitz_C = 0.1;
    ForwardConfig cfg;
    cfg.n_particles = 200;
    const ForwardSolution sol =
        simulate_gmfdsde(c, const_initial(grid, 200, 0.0),
                         ControlProcess::constant(0.0), grid, cfg, rng);
    MeasureFunctional f;
    f.value = [](double x, const EmpiricalLaw&) { return x; };
    f.dx = [](double, const EmpiricalLaw&) { return 1.0; };
    f.dxx = [](double, const EmpiricalLaw&) { return 0.0; };
    const ItoReport rep = verify_ito_formula(c, f, sol, 0.5, 16);
    CHECK(rep.max_mean_residual <= 1e-12);
}

TEST_CASE("generator check rejects missing required derivatives") {
    const TimeGrid grid = build_grid(1.0, 0.0, 0.0, 0.1);
    const RandomSource rng(11);
    CoefficientSet c;
    c.sigma = [](double, double, double, const EmpiricalLaw&,
                 const EmpiricalLaw&, double, double) { return 1.0; };
    c.lipschitz_C = 0.1;
    ForwardConfig cfg;
    cfg.n_particles = 16;
    const ForwardSolution sol =
        simulate_gmfdsde(c, const_initial(grid, 16, 0.0),
                         ControlProcess::constant(0.0), grid, cfg, rng);
    MeasureFunctional f;
    f.value = [](double x, const EmpiricalLaw&) { return x; };
    CHECK_THROWS_AS(verify_ito_formula(c, f, sol, 0.0, 8), config_error);
}

TEST_CASE("quadratic functional residual is pure discretization error") {
    const TimeGrid grid = build_grid(1.0, 0.0, 0.0, 0.002);
    const RandomSource rng(12);
    CoefficientSet c;
    c.sigma = [](double, double, double, const EmpiricalLaw&,
                 const EmpiricalLaw&, double, double) { return 1.0; };
    c.lipschitz_C = 0.1;
    ForwardConfig cfg;
    cfg.n_particles = 20000;
    const ForwardSolution sol =
        simulate_gmfdsde(c, const_initial(grid, cfg.n_particles, 0.0),
                         ControlProcess::constant(0.0), grid, cfg, rng);
    MeasureFunctional f;
    f.value = [](double x, const EmpiricalLaw&) { return x * x; };
    f.dx = [](double x, const EmpiricalLaw&) { return 2.0 * x; };
    f.dxx = [](double, const EmpiricalLaw&) { return 2.0; };
    const ItoReport rep = verify_ito_formula(c, f, sol, 0.5, 16);
    CHECK(rep.max_mean_residual <= 0.02);
}
