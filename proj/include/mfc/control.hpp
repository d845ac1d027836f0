#pragma once

#include <vector>

#include "mfc/backward.hpp"
#include "mfc/coefficients.hpp"
#include "mfc/control_process.hpp"
#include "mfc/forward.hpp"

namespace mfc {

struct CostEstimate {
    double value = 0.0;
    double std_error = 0.0;
};

/// Monte Carlo estimate of
///   E[ int_0^T h(t, X_t, mu_t, v_t, v_{t-delta}) dt + Phi(X_T, mu_T) ]
/// with trapezoid quadrature in t and the ensemble's empirical laws.
CostEstimate cost_functional(const CoefficientSet& coeffs,
                             const ForwardSolution& solution,
                             const ControlProcess& control);

struct PerturbationReport {
    std::vector<double> thetas;
    std::vector<double> sup_errors;  // E[sup_t |X^theta_t - X^u_t|^2]
    double slope = 0.0;              // log-log slope against theta
    bool monotone = true;
};

/// Simulate the perturbed state on common noise for each theta and report
/// the quadratic sup-distance to the base state. The O(theta^2) rate shows
/// as slope ~2.
PerturbationReport perturbation_convergence_check(
    const CoefficientSet& coeffs, const BoundaryData& boundary,
    const ControlProcess& u, const ControlProcess& v, const TimeGrid& grid,
    const ForwardConfig& cfg, const RandomSource& rng,
    std::span<const double> thetas);

struct VariationalSolution {
    TimeGrid grid;
    PathMatrix K;   // zero on [-delta, 0]
};

/// Forward Euler for the linear variational dynamics with coefficients
/// frozen along the base trajectory; interaction terms via the co-particle
/// average with the configured budget.
VariationalSolution solve_variational(const CoefficientSet& coeffs,
                                      const ForwardSolution& base,
                                      const ControlProcess& u,
                                      const ControlProcess& v,
                                      const TimeGrid& grid,
                                      const ForwardConfig& cfg);

struct VariationalConsistencyReport {
    std::vector<double> thetas;
    std::vector<double> discrepancies;  // E[sup_t |(X^th - X^u)/th - K_t|^2]
    double slope = 0.0;
    bool decreasing = true;
};

/// Difference-quotient convergence to the variational process on common
/// noise over a decreasing theta sweep.
VariationalConsistencyReport variational_consistency_check(
    const CoefficientSet& coeffs, const BoundaryData& boundary,
    const ControlProcess& u, const ControlProcess& v, const TimeGrid& grid,
    const ForwardConfig& cfg, const RandomSource& rng,
    std::span<const double> thetas);

struct AdjointSolution {
    TimeGrid grid;       // extended to [-delta, T+delta]
    PathMatrix p, q;     // zero on (T, T+delta]
    std::vector<double> picard_norms;
};

/// Solve the adjoint equation by delegating to the MFABSDE solver with the
/// driver assembled from the coefficient partials along the base
/// trajectory; time-advanced terms are conditioned on node-t features from
/// the frozen iterate at the start of every sweep. Terminal value
/// Phi_x + E'[Phi_mu]; zero extension beyond T.
AdjointSolution solve_adjoint(const CoefficientSet& coeffs,
                              const ForwardSolution& base,
                              const ControlProcess& u,
                              const BackwardConfig& cfg);

struct HamiltonianEval {
    double value = 0.0;
    double H_x = 0.0, H_xd = 0.0, H_v = 0.0, H_vd = 0.0;
};

/// H = b p + sigma q + h with partials assembled by the product rule.
HamiltonianEval hamiltonian(const CoefficientSet& coeffs, double t, double x,
                            double x_d, const EmpiricalLaw& mu,
                            const EmpiricalLaw& mu_d, double v, double v_d,
                            double p, double q);

/// Measure-derivative kernels of H at probe point y.
double hamiltonian_dmu(const CoefficientSet& coeffs, double t, double x,
                       double x_d, const EmpiricalLaw& mu,
                       const EmpiricalLaw& mu_d, double v, double v_d,
                       double y, double p, double q);
double hamiltonian_dmud(const CoefficientSet& coeffs, double t, double x,
                        double x_d, const EmpiricalLaw& mu,
                        const EmpiricalLaw& mu_d, double v, double v_d,
                        double y, double p, double q);

/// Per-(particle, node) descent field H_v + E^{F_t}[H_{v_delta}|_{t+delta}]
/// along the base trajectory; the time-advanced part is regressed onto
/// node-t features and the whole field is fitted per node so control
/// updates stay adapted feedback.
PathMatrix smp_gradient_field(const CoefficientSet& coeffs,
                              const ForwardSolution& base,
                              const ControlProcess& u,
                              const AdjointSolution& adjoint,
                              const BasisSpec& basis);

struct SmpResidualReport {
    double integral = 0.0;    // E int_0^T <gradient, v - u> dt
    double std_error = 0.0;   // MC standard error of the integral
    double min_node_pairing = 0.0;  // min over nodes of mean pairing
};

/// Pairing of the descent field with a probe direction v - u.
SmpResidualReport smp_residual(const CoefficientSet& coeffs,
                               const ForwardSolution& base,
                               const ControlProcess& u,
                               const AdjointSolution& adjoint,
                               const ControlProcess& v_probe,
                               const BasisSpec& basis);

struct GateauxReport {
    double fd_value = 0.0;        // [J(u + theta (v-u)) - J(u)] / theta
    double duality_value = 0.0;   // adjoint pairing
    double relative_error = 0.0;
};

GateauxReport gateaux_consistency_check(const CoefficientSet& coeffs,
                                        const BoundaryData& boundary,
                                        const ControlProcess& u,
                                        const ControlProcess& v,
                                        const TimeGrid& grid,
                                        const ForwardConfig& fwd_cfg,
                                        const BackwardConfig& bwd_cfg,
                                        const RandomSource& rng,
                                        double theta = 1e-3);

struct OptimizerConfig {
    double step = 0.3;
    int iterations = 40;
    /// J increasing this many consecutive iterations triggers halving.
    int increase_patience = 5;
    int max_halvings = 6;
};

struct OptimizerResult {
    ControlProcess u_star;
    std::vector<double> j_history;
    double best_j = 0.0;
    bool converged = true;     // false: step halving exhausted
    bool step_halved = false;
};

/// Projected gradient descent: simulate, solve the adjoint, fit the descent
/// field, update u <- Proj_U(u - step g). Returns the best iterate by cost.
OptimizerResult optimize_control(const CoefficientSet& coeffs,
                                 const BoundaryData& boundary,
                                 const ControlProcess& u0,
                                 const TimeGrid& grid,
                                 const OptimizerConfig& opt_cfg,
                                 const ForwardConfig& fwd_cfg,
                                 const BackwardConfig& bwd_cfg,
                                 const RandomSource& rng);

} // namespace mfc
