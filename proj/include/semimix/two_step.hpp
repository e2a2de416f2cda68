#pragma once

// Two-step baseline: cluster X alone, then fit the weighted regression with
// the clustering responsibilities frozen. Y never informs the partition.

#include <optional>

#include "semimix/fit_result.hpp"
#include "semimix/parametric_em.hpp"
#include "semimix/semiparametric_mm.hpp"

namespace semimix {

enum class ClusterMode { Parametric, SemiParametric };

struct TwoStepSettings {
  EMSettings em;
  MMSettings mm;
  // Replace the fuzzy responsibilities by their argmax before the regression.
  bool hard = false;
};

struct ClusterResult {
  Responsibilities t;
  std::vector<double> trajectory;
  bool converged = false;
};

// Parametric: diagonal Gaussian mixture on X by EM. SemiParametric: the MM
// algorithm on X without the residual factor. Returns fuzzy
// responsibilities.
ClusterResult cluster_x(const Dataset& data, std::size_t k, ClusterMode mode,
                        const TwoStepSettings& settings = {});

// Regression step on given clustering responsibilities (hardened when
// settings.hard). result.t holds exactly the weights used.
FitResult two_step_regression(const Dataset& data, const ClusterResult& clustering,
                              const LossSpec& loss, bool hard = false);

FitResult two_step_fit(const Dataset& data, std::size_t k, const LossSpec& loss,
                       ClusterMode mode, const TwoStepSettings& settings = {});

}  // namespace semimix
