#include "mfc/paths.hpp"

#include <cmath>
#include <string>

namespace mfc {

BrownianDriver::BrownianDriver(const TimeGrid& grid, int n_particles, int d,
                               const RandomSource& rng)
    : n_(n_particles), d_(d), sqrt_dt_(std::sqrt(grid.dt())), rng_(rng) {
    if (n_particles < 2) throw config_error("need at least 2 particles");
    if (d < 1) throw config_error("Brownian dimension must be >= 1");
}

PathMatrix BrownianDriver::path_values(const TimeGrid& grid, int j) const {
    PathMatrix b(n_, grid.n_nodes());
    const int z = grid.zero_index();
    for (int i = 0; i < n_; ++i) b.at(i, z) = 0.0;
    for (int k = z; k < grid.n_steps(); ++k) {
        for (int i = 0; i < n_; ++i) {
            b.at(i, k + 1) = b.at(i, k) + increment(i, k, j);
        }
    }
    for (int k = z - 1; k >= 0; --k) {
        for (int i = 0; i < n_; ++i) {
            b.at(i, k) = b.at(i, k + 1) - increment(i, k, j);
        }
    }
    return b;
}

IncrementMoments increment_moments(const BrownianDriver& driver,
                                   const TimeGrid& grid) {
    IncrementMoments m;
    m.min_step_variance = 1e300;
    m.max_step_variance = 0.0;
    const int n = driver.particles();
    for (int j = 0; j < driver.dimension(); ++j) {
        for (int k = 0; k < grid.n_steps(); ++k) {
            double s = 0.0, s2 = 0.0;
            for (int i = 0; i < n; ++i) {
                const double x = driver.increment(i, k, j);
                s += x;
                s2 += x * x;
            }
            const double mean = s / n;
            const double var = s2 / n - mean * mean;
            m.worst_step_mean = std::max(m.worst_step_mean, std::abs(mean));
            m.min_step_variance = std::min(m.min_step_variance, var);
            m.max_step_variance = std::max(m.max_step_variance, var);
        }
    }
    return m;
}

BrownianDriver sample_brownian(const TimeGrid& grid, int n_particles, int d,
                               const RandomSource& rng) {
    BrownianDriver driver(grid, n_particles, d, rng);
    if (n_particles >= 100) {
        // 6-sigma sanity band on the first step of each component.
        const double dt = grid.dt();
        const double mean_tol = 6.0 * std::sqrt(dt / n_particles);
        const double var_tol = 6.0 * dt * std::sqrt(2.0 / n_particles);
        for (int j = 0; j < d; ++j) {
            double s = 0.0, s2 = 0.0;
            for (int i = 0; i < n_particles; ++i) {
                const double x = driver.increment(i, 0, j);
                s += x;
                s2 += x * x;
            }
            const double mean = s / n_particles;
            const double var = s2 / n_particles - mean * mean;
            if (std::abs(mean) > mean_tol || std::abs(var - dt) > var_tol) {
                throw divergence_error(
                    "Brownian increment moments outside the 6-sigma band", 0);
            }
        }
    }
    return driver;
}

BoundaryData make_initial_boundary(
    const TimeGrid& grid, int n_particles,
    const std::function<double(int, int)>& value) {
    BoundaryData b;
    b.initial_segment = PathMatrix(n_particles, grid.zero_index() + 1);
    for (int k = 0; k <= grid.zero_index(); ++k) {
        for (int i = 0; i < n_particles; ++i) {
            const double v = value(i, k);
            if (!std::isfinite(v)) {
                throw config_error("initial segment has non-finite value");
            }
            b.initial_segment.at(i, k) = v;
        }
    }
    return b;
}

BoundaryData make_terminal_boundary(
    const TimeGrid& grid, int n_particles,
    const std::function<double(int, int)>& y_value,
    const std::function<double(int, int)>& z_value) {
    BoundaryData b;
    b.terminal_start = grid.horizon_T_index();
    const int window = grid.n_steps() - grid.horizon_T_index() + 1;
    b.terminal_Y = PathMatrix(n_particles, window);
    b.terminal_Z = PathMatrix(n_particles, window);
    for (int k = grid.horizon_T_index(); k <= grid.n_steps(); ++k) {
        for (int i = 0; i < n_particles; ++i) {
            const double y = y_value(i, k);
            const double z = z_value ? z_value(i, k) : 0.0;
            if (!std::isfinite(y) || !std::isfinite(z)) {
                throw config_error("terminal segment has non-finite value");
            }
            b.terminal_Y.at(i, k - b.terminal_start) = y;
            b.terminal_Z.at(i, k - b.terminal_start) = z;
        }
    }
    return b;
}

void check_finite_column(const PathMatrix& m, int node, const char* what) {
    for (double v : m.column(node)) {
        if (!std::isfinite(v)) {
            throw divergence_error(std::string(what) + " diverged", node);
        }
    }
}

} // namespace mfc
