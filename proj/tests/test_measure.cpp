#include <doctest.h>

#include <cmath>
#include <vector>

#include "mfc/lions.hpp"
#include "mfc/oracles.hpp"
#include "mfc/prime_expectation.hpp"
#include "mfc/wasserstein.hpp"

using namespace mfc;

namespace {

EmpiricalLaw normal_law(const RandomSource& rng, std::uint32_t tag, int n,
                        double mean, double sd) {
    std::vector<double> atoms(n);
    for (int i = 0; i < n; ++i) {
        atoms[i] = mean + sd * rng.normal(StreamDomain::scratch,
                                          static_cast<std::uint32_t>(i), tag);
    }
    return EmpiricalLaw(std::move(atoms), 1);
}

} // namespace

TEST_CASE("w2 of identical laws is zero") {
    const EmpiricalLaw p({1.0, 2.0, 3.0}, 1);
    CHECK(w2_distance_1d(p, p) == 0.0);
}

TEST_CASE("w2 between point masses is the distance") {
    const EmpiricalLaw p({0.0, 0.0}, 1);
    const EmpiricalLaw q({-2.5, -2.5}, 1);
    CHECK(w2_distance_1d(p, q) == doctest::Approx(2.5));
}

TEST_CASE("w2 between sampled Gaussians matches the closed form") {
    const RandomSource rng(11);
    const EmpiricalLaw p = normal_law(rng, 1, 100000, 0.0, 1.0);
    const EmpiricalLaw q = normal_law(rng, 2, 100000, 2.0, 1.0);
    const double expected = oracles::gaussian_w2(0.0, 1.0, 2.0, 1.0);
    CHECK(w2_distance_1d(p, q) == doctest::Approx(expected).epsilon(0.015));
}

TEST_CASE("w2 handles unequal atom counts by the exact quantile integral") {
    const EmpiricalLaw p({0.0}, 1);
    const EmpiricalLaw q({0.0, 1.0}, 1);
    CHECK(w2_distance_1d(p, q) == doctest::Approx(std::sqrt(0.5)));
}

TEST_CASE("w2 is a metric on random triples") {
    const RandomSource rng(5);
    for (std::uint32_t rep = 0; rep < 20; ++rep) {
        const EmpiricalLaw a = normal_law(rng, 10 + 3 * rep, 64, 0.0, 1.0);
        const EmpiricalLaw b = normal_law(rng, 11 + 3 * rep, 64, 0.5, 2.0);
        const EmpiricalLaw c = normal_law(rng, 12 + 3 * rep, 64, -1.0, 0.5);
        const double ab = w2_distance_1d(a, b);
        const double ba = w2_distance_1d(b, a);
        const double ac = w2_distance_1d(a, c);
        const double cb = w2_distance_1d(c, b);
        CHECK(ab == doctest::Approx(ba).epsilon(1e-12));
        CHECK(ab <= ac + cb + 1e-12);
        CHECK(w2_distance_1d(a, a) <= 1e-12);
    }
}

TEST_CASE("w2 scaling is exact for the sorted-atom formula") {
    const RandomSource rng(6);
    const EmpiricalLaw a = normal_law(rng, 40, 128, 0.2, 1.0);
    const EmpiricalLaw b = normal_law(rng, 41, 128, -0.3, 0.7);
    const double base = w2_distance_1d(a, b);
    for (double scale : {2.0, -1.5}) {
        std::vector<double> sa(a.atoms().begin(), a.atoms().end());
        std::vector<double> sb(b.atoms().begin(), b.atoms().end());
        for (auto& v : sa) v *= scale;
        for (auto& v : sb) v *= scale;
        const EmpiricalLaw as(std::move(sa), 1), bs(std::move(sb), 1);
        CHECK(w2_distance_1d(as, bs) ==
              doctest::Approx(std::abs(scale) * base).epsilon(1e-12));
    }
}

TEST_CASE("w2_1d rejects multi-dimensional laws") {
    const EmpiricalLaw p({0.0, 0.0, 1.0, 1.0}, 2);
    CHECK_THROWS_AS(w2_distance_1d(p, p), dispatch_error);
}

TEST_CASE("sliced w2 of identical clouds is zero") {
    const RandomSource rng(7);
    std::vector<double> atoms;
    for (int i = 0; i < 100; ++i) {
        atoms.push_back(rng.normal(StreamDomain::scratch, i, 50));
        atoms.push_back(rng.normal(StreamDomain::scratch, i, 51));
    }
    const EmpiricalLaw p(atoms, 2);
    CHECK(w2_distance_sliced(p, p, 64, rng) == doctest::Approx(0.0));
}

TEST_CASE("sliced w2 of a translated cloud recovers the shift length") {
    const RandomSource rng(8);
    std::vector<double> atoms, shifted;
    for (int i = 0; i < 500; ++i) {
        const double x = rng.normal(StreamDomain::scratch, i, 60);
        const double y = rng.normal(StreamDomain::scratch, i, 61);
        atoms.push_back(x);
        atoms.push_back(y);
        shifted.push_back(x + 3.0);
        shifted.push_back(y + 4.0);
    }
    const EmpiricalLaw p(atoms, 2), q(shifted, 2);
    const double value = w2_distance_sliced(p, q, 128, rng);
    CHECK(value == doctest::Approx(5.0).epsilon(0.02));
    const double oracle = oracles::sliced_translation_value({3.0, 4.0});
    CHECK(value == doctest::Approx(oracle).epsilon(0.02));
}

TEST_CASE("sliced w2 in one dimension equals the exact distance") {
    const RandomSource rng(9);
    const EmpiricalLaw p = normal_law(rng, 70, 256, 0.0, 1.0);
    const EmpiricalLaw q = normal_law(rng, 71, 256, 1.0, 1.5);
    CHECK(w2_distance_sliced(p, q, 1, rng) == w2_distance_1d(p, q));
}

TEST_CASE("prime expectation of a constant is the constant") {
    const EmpiricalLaw mu({1.0, 2.0, 3.0}, 1);
    const RandomSource rng(1);
    const double v = prime_expectation(
        [](double, double) { return 1.0; }, mu, 0.0, 3, rng);
    CHECK(v == doctest::Approx(1.0).epsilon(1e-15));
}

TEST_CASE("prime expectation with full budget is the arithmetic mean") {
    const EmpiricalLaw mu({1.0, 2.0, 3.0}, 1);
    const RandomSource rng(1);
    const double v = prime_expectation(
        [](double tp, double) { return tp; }, mu, 0.0, 3, rng);
    CHECK(v == doctest::Approx(2.0).epsilon(1e-15));
}

TEST_CASE("prime expectation of a product obeys the CLT bound") {
    const RandomSource rng(13);
    const EmpiricalLaw mu = normal_law(rng, 80, 100000, 0.0, 1.0);
    const double v = prime_expectation(
        [](double tp, double t) { return tp * t; }, mu, 1.0, mu.size(), rng);
    CHECK(std::abs(v) < 0.01);
}

TEST_CASE("prime expectation with full budget is permutation invariant") {
    const RandomSource rng(14);
    std::vector<double> atoms = {0.3, -1.2, 2.4, 0.9, -0.5};
    const EmpiricalLaw mu(atoms, 1);
    const double base = prime_expectation(
        [](double tp, double t) { return std::sin(tp) * t; }, mu, 0.7,
        mu.size(), rng);
    std::vector<double> perm = {2.4, 0.9, 0.3, -0.5, -1.2};
    const EmpiricalLaw mup(perm, 1);
    const double permuted = prime_expectation(
        [](double tp, double t) { return std::sin(tp) * t; }, mup, 0.7,
        mup.size(), rng);
    CHECK(base == doctest::Approx(permuted).epsilon(1e-12));
}

TEST_CASE("prime expectation rejects bad budgets") {
    const EmpiricalLaw mu({1.0, 2.0}, 1);
    const RandomSource rng(1);
    CHECK_THROWS_AS(prime_expectation([](double, double) { return 0.0; }, mu,
                                      0.0, 1, rng),
                    domain_error);
    CHECK_THROWS_AS(prime_expectation([](double, double) { return 0.0; }, mu,
                                      0.0, 3, rng),
                    domain_error);
}

TEST_CASE("seeded subsamples are deterministic and within range") {
    const RandomSource rng(15);
    std::vector<int> a(16), b(16);
    seeded_subsample(1000, 16, rng, {3, 7}, a);
    seeded_subsample(1000, 16, rng, {3, 7}, b);
    CHECK(a == b);
    for (int idx : a) {
        CHECK(idx >= 0);
        CHECK(idx < 1000);
    }
    // distinct entries
    for (std::size_t i = 0; i < a.size(); ++i) {
        for (std::size_t j = i + 1; j < a.size(); ++j) CHECK(a[i] != a[j]);
    }
}

TEST_CASE("lions derivative check on the documented functionals") {
    const RandomSource rng(16);
    const EmpiricalLaw mu = normal_law(rng, 90, 20000, 0.5, 1.0);

    SUBCASE("linear functional is exact") {
        const MeasureDerivative df{
            [](const EmpiricalLaw&, std::span<const double>,
               std::span<double> out) { out[0] = 1.0; }};
        const auto rep = check_lions_derivative(
            [](const EmpiricalLaw& m) { return m.mean(); }, df, mu, 8, rng);
        CHECK_FALSE(rep.probe_failed);
        CHECK(rep.max_relative_error <= 1e-8);
    }
    SUBCASE("squared mean has constant-in-y kernel") {
        const MeasureDerivative df{
            [](const EmpiricalLaw& m, std::span<const double>,
               std::span<double> out) { out[0] = 2.0 * m.mean(); }};
        const auto rep = check_lions_derivative(
            [](const EmpiricalLaw& m) {
                const double v = m.mean();
                return v * v;
            },
            df, mu, 8, rng);
        CHECK(rep.max_relative_error <= 1e-4);
    }
    SUBCASE("second moment has kernel 2y with linear eps decay") {
        const MeasureDerivative df{
            [](const EmpiricalLaw&, std::span<const double> y,
               std::span<double> out) { out[0] = 2.0 * y[0]; }};
        const auto rep = check_lions_derivative(
            [](const EmpiricalLaw& m) { return m.second_moment(); }, df, mu, 8,
            rng);
        CHECK(rep.max_relative_error <= 1e-4);
        CHECK(rep.error_slope >= 0.9);
    }
    SUBCASE("non-finite functional output is a probe failure, not a crash") {
        const MeasureDerivative df{
            [](const EmpiricalLaw&, std::span<const double>,
               std::span<double> out) { out[0] = 0.0; }};
        const auto rep = check_lions_derivative(
            [](const EmpiricalLaw&) {
                return std::numeric_limits<double>::quiet_NaN();
            },
            df, mu, 2, rng);
        CHECK(rep.probe_failed);
    }
}
