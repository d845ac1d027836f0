#pragma once

#include <functional>
#include <vector>

#include "mfc/errors.hpp"

namespace mfc {

/// Uniform discretization of [-delta, T+K]. Node i sits at
/// t_i = (i - zero_index) * dt, so t = 0 and t = T are exact.
/// Anticipation maps send a node index i (t_i <= T) to the index of
/// t_i + delta(t_i) resp. t_i + zeta(t_i), clamped at T+K.
class TimeGrid {
public:
    /// Placeholder single-step grid on [0, 1]; reassign before use.
    TimeGrid() : TimeGrid(1.0, 0.0, 0.0, 1.0) {}
    TimeGrid(double T, double K, double delta, double dt);

    double t_start() const { return time(0); }
    double t_end() const { return time(n_steps_); }
    double dt() const { return dt_; }
    double horizon_T() const { return T_; }
    double window_K() const { return K_; }
    double delay() const { return delta_; }

    /// Number of intervals; node count is n_steps() + 1.
    int n_steps() const { return n_steps_; }
    int n_nodes() const { return n_steps_ + 1; }
    int delay_steps() const { return delay_steps_; }
    int zero_index() const { return delay_steps_; }
    int horizon_T_index() const { return horizon_T_index_; }

    double time(int node) const { return (node - delay_steps_) * dt_; }

    /// Index of t_i + delta(t_i) for the Y-anticipation, defined for
    /// nodes with t_i <= T.
    int advance_y(int node) const { return advance_y_[node]; }
    /// Index of t_i + zeta(t_i) for the Z-anticipation.
    int advance_z(int node) const { return advance_z_[node]; }

    /// Replace the default constant-shift anticipation maps. Each map takes
    /// a node index i (0 <= i <= horizon_T_index) and returns an offset in
    /// steps; the result index is clamped at the last node. Offsets must be
    /// nonnegative.
    void set_anticipation(const std::function<int(int)>& delta_steps_of,
                          const std::function<int(int)>& zeta_steps_of);

private:
    double T_, K_, delta_, dt_;
    int n_steps_;
    int delay_steps_;
    int horizon_T_index_;
    std::vector<int> advance_y_, advance_z_;
};

/// Delay/anticipation description for problems with a single constant lag
/// plus optional general index maps.
struct DelaySpec {
    double delta = 0.0;
    std::function<int(int)> delta_fn; // node -> offset in steps (optional)
    std::function<int(int)> zeta_fn;
    double L_bound = 1.0;
};

/// Build a grid spanning [-delta, T+K]; anticipation maps default to the
/// constant shift by `delta` clamped at T+K. Throws config_error when any
/// of T, K, delta is not an integer multiple of dt, capacity_error when the
/// index range overflows.
TimeGrid build_grid(double T, double K, double delta, double dt);

/// Check the discrete substitution inequality
///   sum_{t_i <= T} g(t_i + shift(t_i)) dt <= L * sum_{all nodes} g dt
/// for all nonnegative grid functions g. Maximizing over indicators reduces
/// this to: no target node has more than floor(L) preimages.
bool check_substitution_bound(const TimeGrid& grid,
                              const std::function<int(int)>& advance,
                              double L);

/// Same check applied to the grid's own anticipation maps and an L bound.
bool check_substitution_bound(const TimeGrid& grid, double L);

/// True when x is an integer multiple of dt up to rounding slack.
bool is_grid_multiple(double x, double dt);

} // namespace mfc
