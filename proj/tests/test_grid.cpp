#include <doctest.h>

#include "mfc/grid.hpp"

using namespace mfc;

TEST_CASE("grid without delay window spans [0, 1]") {
    const TimeGrid g = build_grid(1.0, 0.0, 0.0, 0.01);
    CHECK(g.n_nodes() == 101);
    CHECK(g.t_start() == doctest::Approx(0.0));
    CHECK(g.t_end() == doctest::Approx(1.0));
    CHECK(g.delay_steps() == 0);
    CHECK(g.zero_index() == 0);
    CHECK(g.horizon_T_index() == 100);
}

TEST_CASE("grid with delay and window") {
    const TimeGrid g = build_grid(1.0, 0.25, 0.25, 0.25);
    CHECK(g.n_nodes() == 7);
    CHECK(g.time(0) == doctest::Approx(-0.25));
    CHECK(g.time(6) == doctest::Approx(1.25));
    CHECK(g.delay_steps() == 1);
    CHECK(g.horizon_T_index() == 5);
}

TEST_CASE("non-multiple delay is rejected") {
    CHECK_THROWS_AS(build_grid(1.0, 0.0, 0.3, 0.25), config_error);
    CHECK_THROWS_AS(build_grid(1.0, 0.1, 0.0, 0.25), config_error);
    CHECK_THROWS_AS(build_grid(0.9, 0.0, 0.0, 0.25), config_error);
    CHECK_THROWS_AS(build_grid(1.0, 0.0, 0.0, -0.1), config_error);
}

TEST_CASE("index range overflow is a capacity error") {
    CHECK_THROWS_AS(build_grid(1.0, 0.0, 0.0, 1e-9), capacity_error);
}

TEST_CASE("default anticipation maps are clamped constant shifts") {
    const TimeGrid g = build_grid(1.0, 0.25, 0.25, 0.25);
    for (int i = 0; i <= g.horizon_T_index(); ++i) {
        CHECK(g.advance_y(i) == std::min(i + 1, g.n_steps()));
        CHECK(g.advance_y(i) <= g.n_steps());
        CHECK(g.advance_y(i) >= i);
    }
}

TEST_CASE("custom anticipation maps validate offsets") {
    TimeGrid g = build_grid(1.0, 0.0, 0.0, 0.25);
    g.set_anticipation([](int) { return 2; }, [](int) { return 1; });
    CHECK(g.advance_y(0) == 2);
    CHECK(g.advance_y(3) == 4);  // clamped at the last node
    CHECK(g.advance_z(0) == 1);
    CHECK_THROWS_AS(g.set_anticipation([](int) { return -1; },
                                       [](int) { return 0; }),
                    config_error);
}

TEST_CASE("substitution bound holds for constant shifts with L = 1") {
    const TimeGrid g = build_grid(1.0, 0.25, 0.25, 0.05);
    CHECK(check_substitution_bound(g, 1.0));
}

TEST_CASE("substitution bound fails for collapsing maps") {
    TimeGrid g = build_grid(1.0, 0.0, 0.0, 0.25);
    // Everything maps to the last node: 5 preimages need L >= 5.
    g.set_anticipation([&g](int i) { return g.n_steps() - i; },
                       [](int) { return 0; });
    const auto ay = [&g](int i) { return g.advance_y(i); };
    CHECK_FALSE(check_substitution_bound(g, ay, 1.0));
    CHECK(check_substitution_bound(g, ay, 5.0));
}
