#pragma once

// Maximum smoothed likelihood for the semi-parametric joint model
//   f(x, y | u) = sum_k pi_k prod_j f_kj(x_j) f_eps(y - u'gamma - delta_k)
// with f_kj and f_eps weighted Gaussian kernel estimates, fitted by the
// majorization-minorization algorithm:
//   t_ik  ∝ pi_k prod_j (N f_kj)(x_ij) (N f_eps)(r_ik)
//   pi_k  = mean_i t_ik
//   beta  = argmin sum_ik t_ik L(r_ik)
//   f_kj  = (1 / (n pi_k)) sum_i t_ik K_h(x_ij - .)
//   f_eps = (1 / n) sum_ik t_ik K_h(r_ik - .)      (residuals at the new beta)
// Categorical columns use Laplace-smoothed weighted level frequencies and
// are not smoothed.

#include <Eigen/Dense>

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "semimix/fit_result.hpp"
#include "semimix/kernel_smoothing.hpp"
#include "semimix/model.hpp"

namespace semimix {

inline constexpr double kLevelPseudoCount = 0.5;

struct MMSettings {
  int max_iter = 300;
  double rel_tol = 1e-6;
  int n_starts = 5;
  std::uint64_t seed = 0;
  KernelConfig kernel;
  // Fresh random starts tried when a start degenerates.
  int max_restarts = 3;
  std::size_t grid_size = kDefaultGridSize;
  // Hold beta at these values instead of refitting it. The pi and density
  // updates alone maximise the minorizer, so ell then never decreases.
  std::optional<RegressionCoefficients> fixed_coeffs;
};

struct SemiParamModel {
  Eigen::VectorXd pi;
  RegressionCoefficients coeffs;
  LossSpec loss;
  double h = 1.0;
  std::size_t grid_size = kDefaultGridSize;
  // [k][j]; ContinuousKde over the training column or CategoricalPmf.
  std::vector<std::vector<UnivariateDensityRep>> components;
  // Residual density; support is the n*K residuals (row i, class k at
  // index i*K + k). Empty when only X was clustered.
  ContinuousKde noise;

  // ln f on quadrature grids, built by refresh_caches(); entries for
  // categorical columns stay empty.
  std::vector<std::vector<SmoothedLogDensity>> smoothed_components;
  SmoothedLogDensity smoothed_noise;

  std::size_t k() const { return static_cast<std::size_t>(pi.size()); }
  bool has_noise() const { return !noise.support.empty(); }
  void refresh_caches();
};

struct MmFit {
  FitResult result;
  SemiParamModel model;
};

// Joint fit. Start 0 uses `initial` when given and otherwise the
// responsibilities of the semi-parametric clustering of X alone; further
// starts draw random responsibilities. Starts whose smallest pi_k falls
// below 1/(10K) are restarted from fresh draws up to max_restarts times.
MmFit mm_fit(const Dataset& data, std::size_t k, const LossSpec& loss,
             const MMSettings& settings = {},
             const std::optional<Responsibilities>& initial = {});

// The same algorithm on X alone (no residual factor, no regression).
// Start 0 is a k-means partition unless `initial` is given.
MmFit mm_fit_x(const Dataset& data, std::size_t k, const MMSettings& settings = {},
               const std::optional<Responsibilities>& initial = {});

// (N f_k)(w_i | u_i) for every class; categorical columns contribute
// their unsmoothed mass.
Eigen::VectorXd smoothed_component_density(const SemiParamModel& model, const Dataset& data,
                                           std::size_t row);

// sum_i ln sum_k pi_k (N f_k)(w_i | u_i).
double smoothed_loglik(const Dataset& data, const SemiParamModel& model);

// Posterior t_ik ∝ pi_k (N f_k)(w_i | u_i).
Responsibilities smoothed_posterior(const Dataset& data, const SemiParamModel& model);

// (1/n) sum_i t_ik rho(y_i - u_i'gamma - delta_k) for each k.
Eigen::VectorXd moment_residual(const Dataset& data, const Responsibilities& t,
                                const RegressionCoefficients& coeffs, const LossSpec& loss);
// Same with the responsibilities the fit's parameters were built from.
Eigen::VectorXd moment_residual(const Dataset& data, const MmFit& fit);

// Class weights from X alone, w_k(x) ∝ pi_k prod_j f_kj(x_j), unsmoothed.
Responsibilities x_posterior(const SemiParamModel& model, const Dataset& data);

// Loss-matched location of f_eps: mean (Quadratic, Huber, LogCosh),
// median (Absolute), tau-quantile or tau-expectile.
double noise_location(const SemiParamModel& model);

// y_hat_i = sum_k w_k(x_i) (u_i'gamma + delta_k + m_eps). Throws
// InvalidLevel for an unseen categorical level.
Eigen::VectorXd predict(const SemiParamModel& model, const Dataset& data);

struct KSelectionRow {
  std::size_t k = 0;
  double smoothed_loglik = 0.0;
  double cv_prediction_mse = 0.0;
  std::string error;  // empty when the fits succeeded
};

inline constexpr std::size_t kCvFolds = 5;

// Fits every K on the full data (smoothed log-likelihood) and by seeded
// 5-fold cross-validation (prediction MSE). Fit errors are recorded per row.
std::vector<KSelectionRow> select_k(const Dataset& data, std::span<const std::size_t> k_range,
                                    const LossSpec& loss, const MMSettings& settings = {});

// Smallest K after which the log-likelihood gain drops by at least
// `factor`; the largest K when no such drop occurs.
std::size_t elbow_k(std::span<const KSelectionRow> table, double factor = 3.0);

}  // namespace semimix
