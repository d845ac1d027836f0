#include "mfc/control_process.hpp"

namespace mfc {

ControlProcess ControlProcess::constant(double c, Projection proj) {
    const double pc = proj.apply(c);
    auto impl = std::make_shared<Impl>();
    impl->fn = [pc](int, int) { return pc; };
    impl->proj = std::move(proj);
    ControlProcess cp;
    cp.impl_ = std::move(impl);
    return cp;
}

ControlProcess ControlProcess::from_matrix(PathMatrix values, Projection proj) {
    for (int k = 0; k < values.nodes(); ++k) {
        for (double& v : values.column(k)) v = proj.apply(v);
    }
    auto impl = std::make_shared<Impl>();
    impl->values = std::move(values);
    impl->proj = std::move(proj);
    ControlProcess cp;
    cp.impl_ = std::move(impl);
    return cp;
}

ControlProcess ControlProcess::from_callback(std::function<double(int, int)> fn,
                                             Projection proj) {
    auto impl = std::make_shared<Impl>();
    impl->fn = std::move(fn);
    impl->proj = std::move(proj);
    ControlProcess cp;
    cp.impl_ = std::move(impl);
    return cp;
}

ControlProcess perturb_control(const ControlProcess& u, const ControlProcess& v,
                               double theta) {
    if (!(theta >= 0.0 && theta <= 1.0)) {
        throw domain_error("perturbation parameter must lie in [0,1]");
    }
    return ControlProcess::from_callback(
        [u, v, theta](int i, int k) {
            const double a = u.value(i, k);
            return a + theta * (v.value(i, k) - a);
        },
        u.projection());
}

} // namespace mfc
