#pragma once

#include <Eigen/Dense>

namespace semimix::detail {

struct QuantileLpResult {
  Eigen::VectorXd beta;
  int iterations = 0;
  bool converged = false;
};

// argmin_b sum_i w_i check_tau(y_i - x_i'b), w_i > 0.
// Mehrotra predictor-corrector on the bounded dual LP, then a basic solution
// through the p smallest residuals is kept if it does not worsen the objective.
QuantileLpResult weighted_quantile_regression(const Eigen::MatrixXd& x,
                                              const Eigen::VectorXd& y,
                                              const Eigen::VectorXd& w, double tau);

double check_objective(const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                       const Eigen::VectorXd& w, double tau, const Eigen::VectorXd& beta);

}  // namespace semimix::detail
