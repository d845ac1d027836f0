#include "mfc/law.hpp"

#include <cmath>

namespace mfc {

EmpiricalLaw::EmpiricalLaw(std::vector<double> atoms, int dim)
    : storage_(std::move(atoms)), dim_(dim) {
    if (dim < 1) throw domain_error("law dimension must be >= 1");
    if (storage_.empty() || storage_.size() % dim != 0) {
        throw domain_error("empirical law needs a nonempty multiple-of-dim atom block");
    }
    for (double v : storage_) {
        if (!std::isfinite(v)) throw domain_error("law atom is not finite");
    }
    atoms_ = storage_;
}

EmpiricalLaw EmpiricalLaw::view(std::span<const double> atoms) {
    EmpiricalLaw law;
    if (atoms.empty()) throw domain_error("empirical law needs atoms");
    law.atoms_ = atoms;
    law.dim_ = 1;
    return law;
}

double EmpiricalLaw::mean(int coord) const {
    if (mean_cache_.empty()) {
        mean_cache_.assign(dim_, 0.0);
        const int n = size();
        for (int i = 0; i < n; ++i) {
            for (int c = 0; c < dim_; ++c) {
                mean_cache_[c] += atoms_[static_cast<std::size_t>(i) * dim_ + c];
            }
        }
        for (double& v : mean_cache_) v /= n;
    }
    return mean_cache_[coord];
}

double EmpiricalLaw::second_moment() const {
    if (m2_cache_ < 0.0) {
        double s = 0.0;
        for (double v : atoms_) s += v * v;
        m2_cache_ = s / size();
    }
    return m2_cache_;
}

} // namespace mfc
