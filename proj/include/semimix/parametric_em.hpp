#pragma once

// Maximum likelihood for the fully parametric joint model: diagonal
// Gaussian components on X and a noise family matched to the loss, fitted
// by EM with several starts.

#include <Eigen/Dense>

#include <cstdint>
#include <optional>
#include <vector>

#include "semimix/fit_result.hpp"
#include "semimix/model.hpp"

namespace semimix {

inline constexpr double kVarianceFloor = 1e-8;

struct GaussianComponent {
  Eigen::VectorXd means;
  Eigen::VectorXd variances;

  double log_density(const Dataset& data, std::size_t i) const;
};

enum class NoiseFamily { Gaussian, AsymmetricLaplace, AsymmetricNormal };

struct ParametricNoise {
  NoiseFamily family = NoiseFamily::Gaussian;
  double tau = 0.5;    // asymmetric families only
  double scale = 1.0;  // standard deviation for Gaussian

  static ParametricNoise gaussian(double sd = 1.0) { return {NoiseFamily::Gaussian, 0.5, sd}; }
  static ParametricNoise asymmetric_laplace(double tau, double scale = 1.0);
  static ParametricNoise asymmetric_normal(double tau, double scale = 1.0);
  // Gaussian for Quadratic, asymmetric Laplace for Absolute/Quantile,
  // asymmetric normal for Expectile. Throws InvalidArgument otherwise.
  static ParametricNoise matching(const LossSpec& loss);

  // Loss whose weighted minimiser is the maximum likelihood location.
  LossSpec loss() const;
  double log_density(double r) const;
  // Scale maximising the likelihood given weighted residuals (weights sum to n).
  double scale_mle(const Eigen::MatrixXd& residuals, const Eigen::MatrixXd& t) const;
};

struct ParametricModel {
  Eigen::VectorXd pi;
  RegressionCoefficients coeffs;
  std::vector<GaussianComponent> components;
  ParametricNoise noise;
};

struct EMSettings {
  int max_iter = 500;
  double rel_tol = 1e-8;
  int n_starts = 10;
  std::uint64_t seed = 0;
  // Retries of a start that degenerates, each from a fresh random draw.
  int max_restarts = 3;
};

struct EmFit {
  FitResult result;
  ParametricModel model;
};

// Joint fit. When `initial` is given it replaces the k-means start.
// Throws UnsupportedColumnType for categorical X, DegenerateComponent when
// every start degenerates.
EmFit em_fit(const Dataset& data, std::size_t k, const ParametricNoise& noise,
             const EMSettings& settings = {},
             const std::optional<Responsibilities>& initial = {});

// Gaussian mixture on X alone (the clustering step of the two-step method).
// result.coeffs holds no coefficients; model.noise is unused.
EmFit em_fit_x(const Dataset& data, std::size_t k, const EMSettings& settings = {},
               const std::optional<Responsibilities>& initial = {});

// sum_i ln sum_k pi_k f_k(x_i) f_eps(y_i - u_i'gamma - delta_k).
double em_loglik(const Dataset& data, const ParametricModel& model);

// Exact posterior class probabilities under the model.
Responsibilities em_posterior(const Dataset& data, const ParametricModel& model);

}  // namespace semimix
