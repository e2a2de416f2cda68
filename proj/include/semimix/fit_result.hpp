#pragma once

#include <Eigen/Dense>

#include <string>
#include <vector>

#include "semimix/model.hpp"

namespace semimix {

// Output shared by every estimator. coeffs is empty (K deltas, no gamma)
// when only X was clustered.
struct FitResult {
  Eigen::VectorXd pi;
  RegressionCoefficients coeffs;
  // Responsibilities the returned parameters were built from (pi is their
  // column mean). One step behind the posterior at those parameters.
  Responsibilities t;
  // Objective after every parameter update, the first entry being the
  // parameters built from the initial responsibilities.
  std::vector<double> trajectory;
  bool converged = false;
  int iterations = 0;
  int best_start = 0;
  int restarts = 0;
  std::vector<std::string> warnings;

  double objective() const { return trajectory.empty() ? 0.0 : trajectory.back(); }
  std::vector<int> labels() const { return map_labels(t); }
};

}  // namespace semimix
