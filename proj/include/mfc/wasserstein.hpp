#pragma once

#include "mfc/law.hpp"
#include "mfc/random.hpp"

namespace mfc {

/// Exact 2-Wasserstein distance between one-dimensional empirical laws via
/// the sorted quantile coupling. For equal atom counts this is the root
/// mean squared difference of sorted atoms; unequal counts are handled by
/// the exact piecewise-constant quantile integral (equivalent to resampling
/// both laws to a common refinement).
double w2_distance_1d(const EmpiricalLaw& p, const EmpiricalLaw& q);

/// Sliced 2-Wasserstein surrogate for laws on R^m:
///   sqrt( m * mean over unit directions u of W2(p.u, q.u)^2 ).
/// The factor m makes the value exact for pure translations. Directions are
/// seeded; for m == 1 the single projection is the identity and the result
/// equals w2_distance_1d exactly. For m == 2 directions are stratified
/// angles with a random offset, otherwise normalized Gaussian draws.
double w2_distance_sliced(const EmpiricalLaw& p, const EmpiricalLaw& q,
                          int n_projections, const RandomSource& rng);

} // namespace mfc
