#pragma once

#include <functional>
#include <span>

#include "mfc/law.hpp"
#include "mfc/random.hpp"

namespace mfc {

/// Identifies the prime_expectation call site so that repeated calls draw
/// reproducible, schedule-independent subsamples.
struct SubsampleId {
    std::uint32_t node = 0;
    std::uint32_t particle = 0;
};

/// E'[f(theta', theta)]: average of f over atoms of the co-particle law,
/// holding the own value fixed. With budget M == N all atoms are used (and
/// the result is permutation-invariant up to rounding); with M < N a seeded
/// subsample without replacement of size M is drawn from substream
/// (id.node, id.particle).
double prime_expectation(
    const std::function<double(std::span<const double> theta_prime,
                               std::span<const double> theta)>& f,
    const EmpiricalLaw& law, std::span<const double> own_value,
    int interaction_budget, const RandomSource& rng, SubsampleId id = {});

/// Scalar-law convenience overload.
double prime_expectation(const std::function<double(double, double)>& f,
                         const EmpiricalLaw& law, double own_value,
                         int interaction_budget, const RandomSource& rng,
                         SubsampleId id = {});

/// Fill `out` with a seeded size-M subsample of {0, ..., n-1} without
/// replacement (partial Fisher-Yates). M == n yields the identity.
void seeded_subsample(int n, int m, const RandomSource& rng, SubsampleId id,
                      std::span<int> out);

} // namespace mfc
