#pragma once

#include <span>
#include <vector>

#include "mfc/paths.hpp"

namespace mfc {

/// Polynomial regression basis: {1, x, ..., x^degree} in the standardized
/// primary feature, plus {xlag, ..., xlag^degree} when a lagged feature is
/// active. No cross terms.
struct BasisSpec {
    int degree = 2;
    bool with_lag = false;

    int size() const { return 1 + degree + (with_lag ? degree : 0); }
};

/// Least-squares fit at one grid node: projects particle targets onto the
/// basis evaluated at that node's features. Features are standardized per
/// node; rank-deficient normal equations fall back to a trace-scaled ridge
/// and set a flag. Fitted values realize the conditional expectation
/// E[target | features] within the basis.
class NodeRegression {
public:
    NodeRegression(std::span<const double> x, std::span<const double> xlag,
                   const BasisSpec& basis);

    /// Fit targets and write fitted values (same length as targets).
    void fit(std::span<const double> targets, std::span<double> fitted);

    bool ridge_used() const { return ridge_used_; }
    /// Root-mean-square regression residual of the last fit.
    double last_rmse() const { return last_rmse_; }
    int n() const { return n_; }

private:
    void design_row(int i, std::span<double> row) const;

    int n_;
    BasisSpec basis_;
    std::span<const double> x_, xlag_;
    double mean_x_ = 0, inv_std_x_ = 1, mean_lag_ = 0, inv_std_lag_ = 1;
    std::vector<double> chol_;      // factorized normal matrix
    bool ridge_used_ = false;
    double last_rmse_ = 0;
};

/// Geometric rate of a norm-difference history: least-squares slope of
/// log(norm^2) per iteration, exp-transformed. Histories shorter than 3
/// report insufficient data; exact zeros anywhere report rate 0.
struct RateReport {
    bool sufficient = false;
    double rate = 0.0;
};

RateReport contraction_rate(std::span<const double> norm_history);

} // namespace mfc
