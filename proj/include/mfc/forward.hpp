#pragma once

#include <vector>

#include "mfc/coefficients.hpp"
#include "mfc/control_process.hpp"
#include "mfc/grid.hpp"
#include "mfc/law.hpp"
#include "mfc/paths.hpp"

namespace mfc {

struct ForwardConfig {
    int n_particles = 1000;
    /// Weight of the e^{-beta t} Picard norm; 0 selects 1 + 4 C^2 from the
    /// declared Lipschitz constant.
    double beta_forward = 0.0;
    double picard_tol = 1e-8;
    /// With picard_tol == 0 the solver runs exactly picard_max_iter sweeps
    /// and records the norm history without a convergence check.
    int picard_max_iter = 30;
    int interaction_budget = 128;
    bool validate_coeffs = true;
};

/// Particle solution of the forward dynamics on [-delta, T].
struct ForwardSolution {
    TimeGrid grid;
    PathMatrix x;            // valid on columns [0, horizon_T_index]
    BrownianDriver noise;
    std::vector<double> picard_norms;

    EmpiricalLaw law_at(int node) const {
        return EmpiricalLaw::view(x.column(node));
    }
};

/// Euler-Maruyama interacting-particle scheme: each step reads the current
/// empirical laws of the full ensemble, then advances every particle with
/// its own Brownian increment. The initial segment is copied verbatim.
ForwardSolution simulate_gmfdsde(const CoefficientSet& coeffs,
                                 const BoundaryData& boundary,
                                 const ControlProcess& control,
                                 const TimeGrid& grid,
                                 const ForwardConfig& cfg,
                                 const RandomSource& rng);

/// Picard fixed-point iteration: integrates with coefficients (and laws)
/// frozen along the previous iterate, on the same Brownian increments, and
/// records the e^{-beta t}-weighted norm of successive differences. The
/// discrete fixed point coincides with the direct Euler recursion.
ForwardSolution picard_solve_forward(const CoefficientSet& coeffs,
                                     const BoundaryData& boundary,
                                     const ControlProcess& control,
                                     const TimeGrid& grid,
                                     const ForwardConfig& cfg,
                                     const RandomSource& rng);

/// Functional of (state, law) with the derivatives entering the
/// measure-dependent generator. value, dx and dxx are required; dmu and
/// dy_dmu may be left empty to declare the measure derivative identically
/// zero (that skips the interaction sums entirely).
struct MeasureFunctional {
    std::function<double(double x, const EmpiricalLaw& mu)> value;
    std::function<double(double x, const EmpiricalLaw& mu)> dx;
    std::function<double(double x, const EmpiricalLaw& mu)> dxx;
    std::function<double(double x, const EmpiricalLaw& mu, double y)> dmu;
    std::function<double(double x, const EmpiricalLaw& mu, double y)> dy_dmu;
};

struct ItoReport {
    /// max over grid nodes of |mean over particles of (LHS - RHS)|.
    double max_mean_residual = 0.0;
    std::vector<double> node_residuals;   // one per node in [0, horizon]
};

/// Residual check of the measure-dependent generator identity along a
/// drift-diffusion solution computed without delay or control: a probe
/// ensemble started at x_probe runs on the solution's own increments and
/// laws, and both sides of the identity are accumulated node by node.
ItoReport verify_ito_formula(const CoefficientSet& coeffs,
                             const MeasureFunctional& functional,
                             const ForwardSolution& solution, double x_probe,
                             int interaction_budget);

} // namespace mfc
