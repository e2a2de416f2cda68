#include "semimix/two_step.hpp"

namespace semimix {

ClusterResult cluster_x(const Dataset& data, std::size_t k, ClusterMode mode,
                        const TwoStepSettings& settings) {
  ClusterResult out;
  if (mode == ClusterMode::Parametric) {
    EmFit fit = em_fit_x(data, k, settings.em);
    out.t = std::move(fit.result.t);
    out.trajectory = std::move(fit.result.trajectory);
    out.converged = fit.result.converged;
  } else {
    MmFit fit = mm_fit_x(data, k, settings.mm);
    out.t = std::move(fit.result.t);
    out.trajectory = std::move(fit.result.trajectory);
    out.converged = fit.result.converged;
  }
  return out;
}

FitResult two_step_regression(const Dataset& data, const ClusterResult& clustering,
                              const LossSpec& loss, bool hard) {
  const std::size_t k = static_cast<std::size_t>(clustering.t.cols());
  FitResult result;
  result.t = hard ? hard_responsibilities(map_labels(clustering.t), k) : clustering.t;
  result.pi = result.t.colwise().mean().transpose();
  const LossFit fit = weighted_loss_fit(data.u, data.y, result.t, loss);
  result.coeffs = fit.coeffs;
  result.trajectory = clustering.trajectory;
  result.converged = clustering.converged && fit.converged;
  result.iterations = static_cast<int>(clustering.trajectory.size()) - 1;
  if (!fit.converged) result.warnings.push_back("regression step reached its iteration limit");
  return result;
}

FitResult two_step_fit(const Dataset& data, std::size_t k, const LossSpec& loss,
                       ClusterMode mode, const TwoStepSettings& settings) {
  return two_step_regression(data, cluster_x(data, k, mode, settings), loss, settings.hard);
}

}  // namespace semimix
