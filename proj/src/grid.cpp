#include "mfc/grid.hpp"

#include <cmath>
#include <limits>
#include <string>

namespace mfc {

bool is_grid_multiple(double x, double dt) {
    const double q = x / dt;
    return std::abs(q - std::round(q)) <= 1e-9 * std::max(1.0, std::abs(q));
}

namespace {

int steps_of(double x, double dt, const char* name) {
    if (!is_grid_multiple(x, dt)) {
        throw config_error(std::string(name) +
                           " is not an integer multiple of dt");
    }
    return static_cast<int>(std::llround(x / dt));
}

} // namespace

TimeGrid::TimeGrid(double T, double K, double delta, double dt)
    : T_(T), K_(K), delta_(delta), dt_(dt) {
    if (dt <= 0.0) throw config_error("dt must be positive");
    if (T <= 0.0) throw config_error("T must be positive");
    if (K < 0.0) throw config_error("K must be nonnegative");
    if (delta < 0.0) throw config_error("delta must be nonnegative");

    const int t_steps = steps_of(T, dt, "T");
    const int k_steps = steps_of(K, dt, "K");
    delay_steps_ = steps_of(delta, dt, "delta");

    const long long total = static_cast<long long>(t_steps) + k_steps + delay_steps_;
    if (total > 50'000'000LL) {
        throw capacity_error("grid would have " + std::to_string(total + 1) +
                             " nodes; index range exceeded");
    }
    n_steps_ = static_cast<int>(total);
    horizon_T_index_ = delay_steps_ + t_steps;

    // Default anticipation: constant shift by delta, clamped at T+K.
    advance_y_.resize(n_nodes());
    advance_z_.resize(n_nodes());
    for (int i = 0; i < n_nodes(); ++i) {
        advance_y_[i] = std::min(i + delay_steps_, n_steps_);
        advance_z_[i] = advance_y_[i];
    }
}

void TimeGrid::set_anticipation(const std::function<int(int)>& delta_steps_of,
                                const std::function<int(int)>& zeta_steps_of) {
    for (int i = 0; i <= horizon_T_index_; ++i) {
        const int dy = delta_steps_of ? delta_steps_of(i) : 0;
        const int dz = zeta_steps_of ? zeta_steps_of(i) : 0;
        if (dy < 0 || dz < 0) {
            throw config_error("anticipation offsets must be nonnegative");
        }
        advance_y_[i] = std::min(i + dy, n_steps_);
        advance_z_[i] = std::min(i + dz, n_steps_);
    }
}

TimeGrid build_grid(double T, double K, double delta, double dt) {
    return TimeGrid(T, K, delta, dt);
}

bool check_substitution_bound(const TimeGrid& grid,
                              const std::function<int(int)>& advance,
                              double L) {
    // For an indicator g = 1_{node a}, the inequality reads
    // (#preimages of a) * dt <= L * dt.
    std::vector<int> count(grid.n_nodes(), 0);
    for (int i = 0; i <= grid.horizon_T_index(); ++i) {
        ++count[advance(i)];
    }
    for (int c : count) {
        if (static_cast<double>(c) > L + 1e-12) return false;
    }
    return true;
}

bool check_substitution_bound(const TimeGrid& grid, double L) {
    const auto ay = [&grid](int i) { return grid.advance_y(i); };
    const auto az = [&grid](int i) { return grid.advance_z(i); };
    return check_substitution_bound(grid, ay, L) &&
           check_substitution_bound(grid, az, L);
}

} // namespace mfc
