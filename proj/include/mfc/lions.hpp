#pragma once

#include <functional>
#include <span>
#include <vector>

#include "mfc/law.hpp"
#include "mfc/random.hpp"

namespace mfc {

/// Derivative of a functional of a probability measure, represented by its
/// kernel (mu, y) -> R^dim evaluated at probe points y.
struct MeasureDerivative {
    std::function<void(const EmpiricalLaw& mu, std::span<const double> y,
                       std::span<double> out)>
        evaluator;
};

struct LionsCheckReport {
    /// max over directions of |FD - pairing| / (1 + |pairing|) at the
    /// smallest epsilon.
    double max_relative_error = 0.0;
    /// Log-log slope of the error against epsilon over the sweep; NaN when
    /// errors reach rounding level and no slope is measurable.
    double error_slope = 0.0;
    /// One error per (epsilon, direction), epsilon-major.
    std::vector<double> errors;
    std::vector<double> epsilons;
    bool probe_failed = false;     // non-finite functional output observed
};

/// Verify a measure derivative against the lifted finite difference:
/// perturb every atom by eps * eta for random L2-normalized direction
/// fields eta, compare [f(law of v + eps eta) - f(law of v)] / eps against
/// the pairing (1/N) sum_i <df(mu, atom_i), eta_i>.
LionsCheckReport check_lions_derivative(
    const std::function<double(const EmpiricalLaw&)>& f,
    const MeasureDerivative& df, const EmpiricalLaw& mu, int directions,
    const RandomSource& rng,
    std::span<const double> epsilons = std::span<const double>());

} // namespace mfc
