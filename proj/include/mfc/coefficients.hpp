#pragma once

#include <functional>
#include <string>

#include "mfc/law.hpp"
#include "mfc/random.hpp"

namespace mfc {

/// Scalar-state coefficient evaluators for the controlled dynamics
///   dX = b(t, X_t, X_{t-delta}, mu_t, mu_{t-delta}, v_t, v_{t-delta}) dt
///      + sigma(...) dB
/// with running cost h(t, x, mu, v, v_delta) and terminal cost Phi(x, mu).
/// A default-constructed (empty) evaluator means "identically zero"; solvers
/// use that to skip whole terms, so leave partials empty rather than binding
/// zero lambdas when a coefficient has no such dependence.
struct CoefficientSet {
    using StateFn = std::function<double(double t, double x, double x_d,
                                         const EmpiricalLaw& mu,
                                         const EmpiricalLaw& mu_d, double v,
                                         double v_d)>;
    using StateMeasureFn = std::function<double(double t, double x, double x_d,
                                                const EmpiricalLaw& mu,
                                                const EmpiricalLaw& mu_d,
                                                double v, double v_d,
                                                double y)>;
    using CostFn = std::function<double(double t, double x,
                                        const EmpiricalLaw& mu, double v,
                                        double v_d)>;
    using CostMeasureFn = std::function<double(double t, double x,
                                               const EmpiricalLaw& mu,
                                               double v, double v_d,
                                               double y)>;
    using TerminalFn = std::function<double(double x, const EmpiricalLaw& mu)>;
    using TerminalMeasureFn =
        std::function<double(double x, const EmpiricalLaw& mu, double y)>;

    StateFn b, sigma;
    CostFn h;
    TerminalFn Phi;

    StateFn b_x, b_xd, b_v, b_vd;
    StateMeasureFn b_mu, b_mud;
    StateFn sigma_x, sigma_xd, sigma_v, sigma_vd;
    StateMeasureFn sigma_mu, sigma_mud;
    CostFn h_x, h_v, h_vd;
    CostMeasureFn h_mu;
    TerminalFn Phi_x;
    TerminalMeasureFn Phi_mu;

    double lipschitz_C = 1.0;

    bool has_mu_partials() const {
        return static_cast<bool>(b_mu) || static_cast<bool>(b_mud) ||
               static_cast<bool>(sigma_mu) || static_cast<bool>(sigma_mud) ||
               static_cast<bool>(h_mu) || static_cast<bool>(Phi_mu);
    }
    bool has_delay_partials() const {
        return static_cast<bool>(b_xd) || static_cast<bool>(sigma_xd) ||
               static_cast<bool>(b_mud) || static_cast<bool>(sigma_mud);
    }
};

struct ProbeReport {
    bool passed = true;
    double worst_relative_error = 0.0;
    std::string detail;
};

/// Centered-difference check of the declared x/x_delta/v/v_delta partials
/// of b, sigma, h, Phi at random probe tuples (step 1e-5, relative
/// tolerance per argument). Measure partials are exercised through the
/// lifted derivative in the lions module, not here.
ProbeReport verify_partials(const CoefficientSet& coeffs,
                            const RandomSource& rng, int n_probes = 100,
                            double tol = 1e-4);

/// Sampled Lipschitz check of b and sigma against the declared constant:
/// |f(theta) - f(theta')| <= C (|dx| + |dx_d| + W2(mu,mu') + W2(mu_d,mu_d'))
/// on random probe pairs (controls held fixed).
ProbeReport probe_lipschitz(const CoefficientSet& coeffs,
                            const RandomSource& rng, int n_probes = 32);

/// Finiteness of b, sigma at the origin arguments over a set of times
/// (the growth condition probe).
ProbeReport probe_origin_bound(const CoefficientSet& coeffs, double t_max);

} // namespace mfc
