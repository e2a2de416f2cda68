#pragma once

// Evaluation of fits against a known truth: partition agreement, label
// alignment, coefficient errors, and the asymptotic two-step bias predicted
// from the overlap of the true X-rule posteriors.

#include <Eigen/Dense>

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "semimix/fit_result.hpp"
#include "semimix/model.hpp"
#include "semimix/simulation.hpp"

namespace semimix {

// Pair-counting ARI. A constant partition against anything scores 0 (and
// two constant partitions score 1). Throws LengthMismatch.
double adjusted_rand_index(std::span<const int> a, std::span<const int> b);

// perm[k] is the estimated class matched to reference class k.
using Permutation = std::vector<int>;

// Minimises sum_k (delta_hat[perm[k]] - delta[k])^2; exhaustive for K <= 10,
// Hungarian assignment above.
Permutation align_labels(const Eigen::VectorXd& delta_hat, const Eigen::VectorXd& delta);

// Maximises sum_k sum_i t_hat(i, perm[k]) t_ref(i, k).
Permutation align_by_overlap(const Responsibilities& t_hat, const Responsibilities& t_ref);

// Minimum-cost assignment; row r gets column result[r].
std::vector<int> hungarian(const Eigen::MatrixXd& cost);

RegressionCoefficients apply_permutation(const RegressionCoefficients& beta, const Permutation& perm);
Responsibilities apply_permutation(const Responsibilities& t, const Permutation& perm);
Eigen::VectorXd apply_permutation(const Eigen::VectorXd& v, const Permutation& perm);

struct CoefficientError {
  double mse = 0.0;                 // pooled over gamma and delta
  Eigen::VectorXd per_coefficient;  // signed errors, gamma first
};

CoefficientError coefficient_mse(const RegressionCoefficients& beta_hat,
                                 const RegressionCoefficients& beta_true,
                                 const Permutation& perm);

// Delta_kl = E[r_k(X) r_l(X)] under the true X rule, by Monte Carlo.
Eigen::MatrixXd overlap_matrix(const SimDesign& design, std::size_t n_mc, std::uint64_t seed);

// Limit of the fuzzy two-step delta: sum_l Delta_kl delta_l / sum_h Delta_kh.
Eigen::VectorXd two_step_delta_limit(const Eigen::MatrixXd& overlap, const Eigen::VectorXd& delta);

// Predicted asymptotic bias of the two-step delta for each class.
Eigen::VectorXd lemma2_bias_oracle(const SimDesign& design, std::size_t n_mc, std::uint64_t seed);

struct EvalReport {
  std::string method;
  std::size_t replication = 0;
  double ari = 0.0;
  double beta_mse = 0.0;
  Eigen::VectorXd per_coefficient_errors;
  std::optional<double> prediction_mse;
  // (empirical, predicted) bias per class
  std::vector<std::pair<double, double>> bias_table;
  Permutation alignment;

  nlohmann::json to_json() const;
  static std::string csv_header(std::size_t n_coefficients);
  std::string csv_row() const;
};

// ARI of argmax t against true labels and aligned coefficient errors.
EvalReport evaluate(const FitResult& fit, const Dataset& data,
                    const RegressionCoefficients& truth, const std::string& method = "");

}  // namespace semimix
