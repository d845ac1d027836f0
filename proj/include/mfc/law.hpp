#pragma once

#include <span>
#include <vector>

#include "mfc/errors.hpp"

namespace mfc {

/// Uniform-weight empirical measure on R^dim with N atoms. A law can own
/// its atoms or view an external contiguous block (the cross-section of a
/// node-major PathMatrix, for dim == 1).
class EmpiricalLaw {
public:
    EmpiricalLaw() : dim_(1) {}

    /// Owning constructor; atoms are row-major (atom index major).
    EmpiricalLaw(std::vector<double> atoms, int dim);

    /// Non-owning view over scalar atoms. The caller keeps the block alive.
    static EmpiricalLaw view(std::span<const double> atoms);

    int dim() const { return dim_; }
    int size() const { return static_cast<int>(atoms_.size()) / dim_; }

    double atom1(int i) const { return atoms_[i]; }
    std::span<const double> atom(int i) const {
        return atoms_.subspan(static_cast<std::size_t>(i) * dim_, dim_);
    }
    std::span<const double> atoms() const { return atoms_; }

    /// Mean of one coordinate. Cached after the first call, so coefficient
    /// evaluators may use it per particle without an O(N) penalty each time.
    double mean(int coord = 0) const;
    /// Mean squared norm of the atoms (second moment). Cached.
    double second_moment() const;

private:
    std::vector<double> storage_;
    std::span<const double> atoms_;
    int dim_;
    mutable std::vector<double> mean_cache_;
    mutable double m2_cache_ = -1.0;
};

} // namespace mfc
