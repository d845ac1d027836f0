#pragma once

#include <vector>

namespace mfc::oracles {

/// Closed-form data for the scalar benchmark
///   dX = u dt + dB,  J = E[ int_0^T u^2 dt + X_T^2 ],
/// whose optimal feedback is u*(t, x) = -x / (1 + T - t).
struct RiccatiLq {
    double T = 1.0;
    double x0 = 1.0;

    double p(double t) const { return 1.0 / (1.0 + T - t); }
    double feedback(double t, double x) const { return -x * p(t); }
    /// Optimal cost x0^2 / (1+T) + log(1+T).
    double optimal_cost() const;
};

/// Exact dynamic-programming value of the discrete-time delayed problem
///   X_{k+1} = X_k + u_{k-lag} dt + dB_k   (u_j = 0 for j < 0),
///   J = E[ sum_k w_k u_k^2 dt + X_n^2 ],  trapezoid weights w,
/// over adapted controls, solved by a Riccati recursion on the augmented
/// state (x, pending controls). Matches the simulator's discretization
/// node for node.
double delayed_lq_dp_value(double T, double dt, int lag_steps, double x0);

/// W2 distance between two scalar Gaussians.
double gaussian_w2(double mean1, double sd1, double mean2, double sd2);

/// Value of the sliced-W2 translation integral: for laws differing by a
/// pure shift s in R^m the rescaled sliced distance equals |s|; this
/// evaluates the direction integral numerically as an independent check.
double sliced_translation_value(const std::vector<double>& shift,
                                int n_quadrature = 4096);

} // namespace mfc::oracles
