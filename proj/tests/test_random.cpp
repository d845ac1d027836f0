#include <doctest.h>

#include <cmath>
#include <vector>

#include "mfc/paths.hpp"
#include "mfc/random.hpp"

using namespace mfc;

TEST_CASE("same seed gives bit-identical output") {
    const RandomSource a(12345), b(12345);
    for (std::uint32_t i = 0; i < 32; ++i) {
        CHECK(a.normal(StreamDomain::brownian, i, 7, 0) ==
              b.normal(StreamDomain::brownian, i, 7, 0));
        CHECK(a.uniform(StreamDomain::probe, i, 3) ==
              b.uniform(StreamDomain::probe, i, 3));
    }
    const RandomSource c(54321);
    CHECK(a.normal(StreamDomain::brownian, 0, 0) !=
          c.normal(StreamDomain::brownian, 0, 0));
}

TEST_CASE("distinct substreams are empirically uncorrelated") {
    const RandomSource rng(7);
    const int n = 1000;
    std::vector<double> a(n), b(n), c(n);
    for (int k = 0; k < n; ++k) {
        a[k] = rng.normal(StreamDomain::brownian, 0, k);
        b[k] = rng.normal(StreamDomain::brownian, 1, k);
        c[k] = rng.normal(StreamDomain::probe, 0, k);
    }
    const auto corr = [n](const std::vector<double>& x,
                          const std::vector<double>& y) {
        double mx = 0, my = 0;
        for (int i = 0; i < n; ++i) { mx += x[i]; my += y[i]; }
        mx /= n; my /= n;
        double sxy = 0, sxx = 0, syy = 0;
        for (int i = 0; i < n; ++i) {
            sxy += (x[i] - mx) * (y[i] - my);
            sxx += (x[i] - mx) * (x[i] - mx);
            syy += (y[i] - my) * (y[i] - my);
        }
        return sxy / std::sqrt(sxx * syy);
    };
    CHECK(std::abs(corr(a, b)) < 0.05);
    CHECK(std::abs(corr(a, c)) < 0.05);
    CHECK(std::abs(corr(b, c)) < 0.05);
}

TEST_CASE("per-step increment variance sits in the chi-square band") {
    const TimeGrid grid = build_grid(0.05, 0.0, 0.0, 0.01);
    const RandomSource rng(42);
    const BrownianDriver driver = sample_brownian(grid, 100000, 1, rng);
    const IncrementMoments m = increment_moments(driver, grid);
    CHECK(m.min_step_variance >= 0.0097);
    CHECK(m.max_step_variance <= 0.0103);
    CHECK(m.worst_step_mean < 6.0 * std::sqrt(0.01 / 100000));
}

TEST_CASE("sum of increments over [0,1] has variance near 1") {
    const TimeGrid grid = build_grid(1.0, 0.0, 0.0, 0.01);
    const RandomSource rng(42);
    const BrownianDriver driver = sample_brownian(grid, 100000, 1, rng);
    double s = 0, s2 = 0;
    const int n = 100000;
    for (int i = 0; i < n; ++i) {
        double bt = 0;
        for (int k = 0; k < grid.n_steps(); ++k) bt += driver.increment(i, k);
        s += bt;
        s2 += bt * bt;
    }
    const double mean = s / n;
    const double var = s2 / n - mean * mean;
    CHECK(var == doctest::Approx(1.0).epsilon(0.02));
}

TEST_CASE("path values are consistent cumulative sums") {
    const TimeGrid grid = build_grid(0.5, 0.0, 0.25, 0.25);
    const RandomSource rng(3);
    const BrownianDriver driver(grid, 10, 1, rng);
    const PathMatrix b = driver.path_values(grid);
    for (int i = 0; i < 10; ++i) {
        CHECK(b.at(i, grid.zero_index()) == 0.0);
        for (int k = 0; k < grid.n_steps(); ++k) {
            CHECK(b.at(i, k + 1) - b.at(i, k) ==
                  doctest::Approx(driver.increment(i, k)).epsilon(1e-12));
        }
    }
}
