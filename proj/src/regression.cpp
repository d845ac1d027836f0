#include "mfc/regression.hpp"

#include <Eigen/Dense>
#include <cmath>

namespace mfc {

NodeRegression::NodeRegression(std::span<const double> x,
                               std::span<const double> xlag,
                               const BasisSpec& basis)
    : n_(static_cast<int>(x.size())), basis_(basis), x_(x), xlag_(xlag) {
    if (basis_.with_lag && xlag.size() != x.size()) {
        throw config_error("lagged feature length mismatch");
    }
    double s = 0, s2 = 0;
    for (double v : x_) { s += v; s2 += v * v; }
    mean_x_ = s / n_;
    const double var = std::max(s2 / n_ - mean_x_ * mean_x_, 0.0);
    inv_std_x_ = var > 1e-24 ? 1.0 / std::sqrt(var) : 0.0;
    if (basis_.with_lag) {
        s = 0; s2 = 0;
        for (double v : xlag_) { s += v; s2 += v * v; }
        mean_lag_ = s / n_;
        const double lvar = std::max(s2 / n_ - mean_lag_ * mean_lag_, 0.0);
        inv_std_lag_ = lvar > 1e-24 ? 1.0 / std::sqrt(lvar) : 0.0;
    }

    const int nb = basis_.size();
    Eigen::MatrixXd a = Eigen::MatrixXd::Zero(nb, nb);
    std::vector<double> row(nb);
    for (int i = 0; i < n_; ++i) {
        design_row(i, row);
        for (int r = 0; r < nb; ++r) {
            for (int c = r; c < nb; ++c) a(r, c) += row[r] * row[c];
        }
    }
    for (int r = 0; r < nb; ++r) {
        for (int c = 0; c < r; ++c) a(r, c) = a(c, r);
    }

    Eigen::LDLT<Eigen::MatrixXd> ldlt(a);
    bool ok = ldlt.info() == Eigen::Success && ldlt.isPositive();
    if (ok) {
        const auto& d = ldlt.vectorD();
        const double dmax = d.maxCoeff();
        if (d.minCoeff() <= dmax * 1e-12) ok = false;
    }
    if (!ok) {
        ridge_used_ = true;
        const double lambda = 1e-8 * a.trace() / nb + 1e-300;
        a.diagonal().array() += lambda;
        ldlt.compute(a);
    }
    // Store the factor as the full inverse-applied form: keep A and use
    // LDLT solves per RHS.
    chol_.resize(static_cast<std::size_t>(nb) * nb);
    Eigen::Map<Eigen::MatrixXd>(chol_.data(), nb, nb) = a;
}

void NodeRegression::design_row(int i, std::span<double> row) const {
    const double xs = (x_[i] - mean_x_) * inv_std_x_;
    row[0] = 1.0;
    double p = 1.0;
    for (int d = 1; d <= basis_.degree; ++d) {
        p *= xs;
        row[d] = p;
    }
    if (basis_.with_lag) {
        const double ls = (xlag_[i] - mean_lag_) * inv_std_lag_;
        double q = 1.0;
        for (int d = 1; d <= basis_.degree; ++d) {
            q *= ls;
            row[basis_.degree + d] = q;
        }
    }
}

void NodeRegression::fit(std::span<const double> targets,
                         std::span<double> fitted) {
    const int nb = basis_.size();
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(nb);
    std::vector<double> row(nb);
    for (int i = 0; i < n_; ++i) {
        design_row(i, row);
        for (int r = 0; r < nb; ++r) rhs(r) += row[r] * targets[i];
    }
    const Eigen::Map<const Eigen::MatrixXd> a(chol_.data(), nb, nb);
    Eigen::LDLT<Eigen::MatrixXd> ldlt(a);
    Eigen::VectorXd beta = ldlt.solve(rhs);

    double sse = 0.0;
    for (int i = 0; i < n_; ++i) {
        design_row(i, row);
        double v = 0.0;
        for (int r = 0; r < nb; ++r) v += row[r] * beta(r);
        fitted[i] = v;
        const double e = targets[i] - v;
        sse += e * e;
    }
    last_rmse_ = std::sqrt(sse / n_);
}

RateReport contraction_rate(std::span<const double> norm_history) {
    RateReport report;
    if (norm_history.size() < 3) return report;
    report.sufficient = true;
    for (double v : norm_history) {
        if (v == 0.0) {
            report.rate = 0.0;
            return report;
        }
    }
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    const int n = static_cast<int>(norm_history.size());
    for (int i = 0; i < n; ++i) {
        const double y = 2.0 * std::log(norm_history[i]);
        sx += i; sy += y; sxx += static_cast<double>(i) * i; sxy += i * y;
    }
    const double slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
    report.rate = std::exp(slope);
    return report;
}

} // namespace mfc
