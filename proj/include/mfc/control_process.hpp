#pragma once

#include <functional>
#include <limits>
#include <memory>

#include "mfc/paths.hpp"

namespace mfc {

/// Admissible set U: a box by default, optionally a custom convex
/// projection. apply() is idempotent.
struct Projection {
    double lo = -std::numeric_limits<double>::infinity();
    double hi = std::numeric_limits<double>::infinity();
    std::function<double(double)> custom;

    double apply(double u) const {
        if (custom) return custom(u);
        return u < lo ? lo : (u > hi ? hi : u);
    }
};

/// Adapted control path on [-delta, T], per particle. Either matrix-backed
/// (values projected into U at construction) or backed by a callback
/// value(particle, node) for controls that are cheap to evaluate lazily;
/// callback outputs are projected at evaluation.
class ControlProcess {
public:
    ControlProcess() = default;

    static ControlProcess constant(double c, Projection proj = {});
    static ControlProcess from_matrix(PathMatrix values, Projection proj = {});
    static ControlProcess from_callback(std::function<double(int, int)> fn,
                                        Projection proj = {});

    double value(int particle, int node) const {
        const auto& im = *impl_;
        if (im.fn) return im.proj.apply(im.fn(particle, node));
        return im.values.at(particle, node);
    }

    const Projection& projection() const { return impl_->proj; }
    bool matrix_backed() const { return impl_ && !impl_->fn; }
    const PathMatrix& matrix() const { return impl_->values; }

private:
    struct Impl {
        PathMatrix values;
        std::function<double(int, int)> fn;
        Projection proj;
    };
    std::shared_ptr<const Impl> impl_;
};

/// Convex perturbation u + theta (v - u); admissible by convexity of U.
/// theta outside [0,1] is a domain error.
ControlProcess perturb_control(const ControlProcess& u, const ControlProcess& v,
                               double theta);

} // namespace mfc
