#pragma once

#include <span>
#include <vector>

#include "mfc/errors.hpp"
#include "mfc/grid.hpp"
#include "mfc/random.hpp"

namespace mfc {

/// N particle values per grid node, stored node-major so that the
/// cross-section at a node is one contiguous block (this is what the
/// empirical-law and regression code iterate over).
class PathMatrix {
public:
    PathMatrix() : n_(0), nodes_(0) {}
    PathMatrix(int n_particles, int n_nodes, double fill = 0.0)
        : n_(n_particles), nodes_(n_nodes),
          data_(static_cast<std::size_t>(n_particles) * n_nodes, fill) {}

    int particles() const { return n_; }
    int nodes() const { return nodes_; }
    bool empty() const { return data_.empty(); }

    double& at(int particle, int node) {
        return data_[static_cast<std::size_t>(node) * n_ + particle];
    }
    double at(int particle, int node) const {
        return data_[static_cast<std::size_t>(node) * n_ + particle];
    }

    std::span<double> column(int node) {
        return {data_.data() + static_cast<std::size_t>(node) * n_,
                static_cast<std::size_t>(n_)};
    }
    std::span<const double> column(int node) const {
        return {data_.data() + static_cast<std::size_t>(node) * n_,
                static_cast<std::size_t>(n_)};
    }

    std::span<const double> raw() const { return data_; }
    std::span<double> raw() { return data_; }

private:
    int n_, nodes_;
    std::vector<double> data_;
};

/// One scalar path over the grid nodes.
struct SamplePath {
    std::vector<double> values;
    const TimeGrid* grid = nullptr;
};

/// Stateless Brownian increment source over a grid. The increment of
/// component j over [t_k, t_{k+1}] for particle i is a pure function of
/// (seed, i, k, j); nothing is stored, so common noise across solvers is
/// automatic whenever they share a RandomSource and grid.
class BrownianDriver {
public:
    BrownianDriver() : n_(0), d_(0), sqrt_dt_(0) {}
    BrownianDriver(const TimeGrid& grid, int n_particles, int d,
                   const RandomSource& rng);

    int particles() const { return n_; }
    int dimension() const { return d_; }

    /// Increment over [t_k, t_{k+1}] (k is a node index, 0 <= k < n_steps).
    double increment(int particle, int k, int j = 0) const {
        return sqrt_dt_ * rng_.normal(StreamDomain::brownian,
                                      static_cast<std::uint32_t>(particle),
                                      static_cast<std::uint32_t>(k),
                                      static_cast<std::uint32_t>(j));
    }

    void column(int k, int j, std::span<double> out) const {
        for (int i = 0; i < n_; ++i) out[i] = increment(i, k, j);
    }

    /// Path values B_t with B = 0 at t = 0 (node grid.zero_index()), as a
    /// PathMatrix over all grid nodes. Nodes before zero carry the two-sided
    /// extension (backward increments), which boundary-data callbacks may use.
    PathMatrix path_values(const TimeGrid& grid, int j = 0) const;

    const RandomSource& rng() const { return rng_; }

private:
    int n_, d_;
    double sqrt_dt_;
    RandomSource rng_{0};
};

/// Moment diagnostics for increments (used by the construction check).
struct IncrementMoments {
    double worst_step_mean = 0.0;     // max over (step, component) of |mean|
    double min_step_variance = 0.0;   // min over (step, component)
    double max_step_variance = 0.0;   // max over (step, component)
};

IncrementMoments increment_moments(const BrownianDriver& driver,
                                   const TimeGrid& grid);

/// N particle paths sharing one grid and one Brownian driver.
struct ParticleEnsemble {
    const TimeGrid* grid = nullptr;
    int n_particles = 0;
    PathMatrix paths;        // state values, node-major
    BrownianDriver noise;
};

/// Draw the Brownian driver for an ensemble of N particles in dimension d.
/// A loose 6-sigma moment check guards against a miswired generator; it is
/// skipped for N < 100 where the bound is meaningless.
BrownianDriver sample_brownian(const TimeGrid& grid, int n_particles, int d,
                               const RandomSource& rng);

/// Boundary data for forward and backward problems. Forward problems read
/// the initial state segment on [-delta, 0] and the initial control segment;
/// backward problems read the terminal (Y, Z) segments on [T, T+K]. Storage
/// covers only the window columns: the initial window starts at global node
/// 0, the terminal window at terminal_start (the horizon index).
struct BoundaryData {
    PathMatrix initial_segment;   // xi on [-delta, 0], columns 0..delay_steps
    PathMatrix initial_control;   // gamma on [-delta, 0]
    PathMatrix terminal_Y;        // xi_t on [T, T+K], window columns
    PathMatrix terminal_Z;        // eta_t on [T, T+K]
    int terminal_start = 0;       // global node index of the first Y/Z column

    bool has_initial() const { return !initial_segment.empty(); }
    bool has_terminal() const { return !terminal_Y.empty(); }

    double terminal_y(int particle, int global_node) const {
        return terminal_Y.at(particle, global_node - terminal_start);
    }
    double terminal_z(int particle, int global_node) const {
        return terminal_Z.at(particle, global_node - terminal_start);
    }
    std::span<const double> terminal_y_column(int global_node) const {
        return terminal_Y.column(global_node - terminal_start);
    }
    std::span<const double> terminal_z_column(int global_node) const {
        return terminal_Z.column(global_node - terminal_start);
    }
};

/// Build the forward initial segment from a callback value(particle, node).
BoundaryData make_initial_boundary(
    const TimeGrid& grid, int n_particles,
    const std::function<double(int particle, int node)>& value);

/// Build terminal (Y, Z) segments on [T, T+K] from callbacks. A null Z
/// callback means eta = 0.
BoundaryData make_terminal_boundary(
    const TimeGrid& grid, int n_particles,
    const std::function<double(int particle, int node)>& y_value,
    const std::function<double(int particle, int node)>& z_value = nullptr);

/// Throw divergence_error naming `step` when the column holds NaN/Inf.
void check_finite_column(const PathMatrix& m, int node, const char* what);

} // namespace mfc
