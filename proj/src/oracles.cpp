#include "mfc/oracles.hpp"

#include <Eigen/Dense>
#include <cmath>

#include "mfc/errors.hpp"

namespace mfc::oracles {

double RiccatiLq::optimal_cost() const {
    return x0 * x0 / (1.0 + T) + std::log(1.0 + T);
}

double delayed_lq_dp_value(double T, double dt, int lag_steps, double x0) {
    const int n = static_cast<int>(std::llround(T / dt));
    if (std::abs(n * dt - T) > 1e-9) {
        throw config_error("T must be an integer multiple of dt");
    }
    const int dim = 1 + lag_steps;  // [x, u_{k-lag}, ..., u_{k-1}]

    // Transition s+ = A s + B u (noise enters the x component only):
    //   x+ = x + dt * pipe[0]; pipe shifts left and appends u.
    Eigen::MatrixXd A = Eigen::MatrixXd::Zero(dim, dim);
    Eigen::VectorXd B = Eigen::VectorXd::Zero(dim);
    A(0, 0) = 1.0;
    if (lag_steps > 0) {
        A(0, 1) = dt;
        for (int r = 1; r + 1 < dim; ++r) A(r, r + 1) = 1.0;
        B(dim - 1) = 1.0;
    } else {
        B(0) = dt;
    }

    // V_n = x^2; u_n only pays cost, so the optimal u_n is zero and V_n
    // stands. Backward: V_k(s) = min_u [w_k u^2 dt + E V_{k+1}(As + Bu + xi)]
    // with the noise contributing dt * P_{k+1}(0,0) per step.
    Eigen::MatrixXd P = Eigen::MatrixXd::Zero(dim, dim);
    P(0, 0) = 1.0;
    double c = 0.0;
    for (int k = n - 1; k >= 0; --k) {
        c += dt * P(0, 0);
        const double w = (k == 0) ? 0.5 : 1.0;  // trapezoid weight at node k
        const double r = w * dt + B.dot(P * B);
        const Eigen::VectorXd cross = A.transpose() * (P * B);
        P = A.transpose() * (P * A) - cross * cross.transpose() / r;
        P = 0.5 * (P + P.transpose());
    }

    Eigen::VectorXd s0 = Eigen::VectorXd::Zero(dim);
    s0(0) = x0;
    return s0.dot(P * s0) + c;
}

double gaussian_w2(double mean1, double sd1, double mean2, double sd2) {
    const double dm = mean1 - mean2;
    const double ds = sd1 - sd2;
    return std::sqrt(dm * dm + ds * ds);
}

double sliced_translation_value(const std::vector<double>& shift,
                                int n_quadrature) {
    const int m = static_cast<int>(shift.size());
    if (m != 2) {
        // General m reduces to |s| analytically; quadrature is only done in
        // the planar case where the stratified directions live.
        double s2 = 0.0;
        for (double v : shift) s2 += v * v;
        return std::sqrt(s2);
    }
    double acc = 0.0;
    for (int l = 0; l < n_quadrature; ++l) {
        const double theta = 2.0 * 3.14159265358979323846 *
                             (l + 0.5) / n_quadrature;
        const double proj = shift[0] * std::cos(theta) + shift[1] * std::sin(theta);
        acc += proj * proj;
    }
    return std::sqrt(static_cast<double>(m) * acc / n_quadrature);
}

} // namespace mfc::oracles
