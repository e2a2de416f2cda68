#pragma once

// Domain types shared by every estimator: datasets with typed proxy columns,
// regression losses, coefficient containers and the weighted loss fit used
// by the regression steps.

#include <Eigen/Dense>

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "semimix/error.hpp"

namespace semimix {

enum class ColumnType { Continuous, Categorical };

struct XColumn {
  std::string name;
  ColumnType type = ColumnType::Continuous;
  std::vector<double> values;  // Continuous
  std::vector<int> levels;     // Categorical, each in [0, cardinality)
  int cardinality = 0;
  std::vector<std::string> level_names;

  static XColumn continuous(std::string name, std::vector<double> values);
  static XColumn categorical(std::string name, std::vector<int> levels,
                             int cardinality,
                             std::vector<std::string> level_names = {});

  std::size_t size() const {
    return type == ColumnType::Continuous ? values.size() : levels.size();
  }
  bool is_continuous() const { return type == ColumnType::Continuous; }
};

// Observed (U, X, Y) records. true_z holds 0-based class labels when the
// generating partition is known (simulation only).
struct Dataset {
  Eigen::MatrixXd u;
  std::vector<XColumn> x;
  Eigen::VectorXd y;
  std::optional<std::vector<int>> true_z;
  std::vector<std::string> u_names;
  std::string y_name = "y";

  std::size_t n() const { return static_cast<std::size_t>(y.size()); }
  std::size_t d_u() const { return static_cast<std::size_t>(u.cols()); }
  std::size_t d_x() const { return x.size(); }
  bool all_continuous() const;

  // Throws Error(InvalidArgument / InvalidLevel / LengthMismatch).
  void validate() const;
  Dataset subset(std::span<const std::size_t> rows) const;
};

enum class LossKind { Quadratic, Absolute, Huber, LogCosh, Quantile, Expectile };

struct LossSpec {
  LossKind kind = LossKind::Quadratic;
  double param = 0.0;  // Huber threshold c, or tau for Quantile/Expectile

  static LossSpec quadratic() { return {LossKind::Quadratic, 0.0}; }
  static LossSpec absolute() { return {LossKind::Absolute, 0.0}; }
  static LossSpec huber(double c);
  static LossSpec logcosh() { return {LossKind::LogCosh, 0.0}; }
  static LossSpec quantile(double tau);
  static LossSpec expectile(double tau);

  // "quadratic", "absolute", "huber:1", "logcosh", "quantile:0.75",
  // "expectile:0.9".
  static LossSpec parse(std::string_view text);
  std::string name() const;
  void validate() const;

  bool is_piecewise_linear() const {
    return kind == LossKind::Absolute || kind == LossKind::Quantile;
  }
  bool operator==(const LossSpec&) const = default;
};

double loss_value(const LossSpec& spec, double t);
double loss_derivative(const LossSpec& spec, double t);

// beta = (gamma, delta). No global intercept: delta carries it per class.
struct RegressionCoefficients {
  Eigen::VectorXd gamma;
  Eigen::VectorXd delta;

  std::size_t d_u() const { return static_cast<std::size_t>(gamma.size()); }
  std::size_t k() const { return static_cast<std::size_t>(delta.size()); }
  Eigen::VectorXd stacked() const;
  static RegressionCoefficients from_stacked(const Eigen::VectorXd& beta,
                                             std::size_t d_u);
};

// n x K posterior class probabilities; rows sum to one.
using Responsibilities = Eigen::MatrixXd;

void check_responsibilities(const Responsibilities& t, double tol = 1e-10);
Responsibilities hard_responsibilities(std::span<const int> labels,
                                       std::size_t k);
std::vector<int> map_labels(const Responsibilities& t);

// Residual y_i - u_i'gamma - delta_k as an n x K matrix.
Eigen::MatrixXd residual_matrix(const Eigen::MatrixXd& u,
                                const Eigen::VectorXd& y,
                                const RegressionCoefficients& beta);

// sum_i sum_k t_ik L(y_i - u_i'gamma - delta_k)
double weighted_loss_objective(const Eigen::MatrixXd& u,
                               const Eigen::VectorXd& y,
                               const Responsibilities& t,
                               const LossSpec& spec,
                               const RegressionCoefficients& beta);

struct LossFitOptions {
  int max_iter = 500;
  double tol = 1e-11;  // on the coefficient step, relative
};

struct LossFit {
  RegressionCoefficients coeffs;
  double objective = 0.0;
  int iterations = 0;
  bool converged = true;
};

// argmin_beta sum_ik t_ik L(y_i - u_i'gamma - delta_k).
// Quadratic: closed-form weighted least squares. Huber, LogCosh, Expectile:
// IRLS with backtracking so the objective never increases. Absolute and
// Quantile: primal-dual interior point on the linear program followed by a
// basic-solution refinement. Throws Error(SingularDesign) when the weighted
// normal matrix is rank deficient.
LossFit weighted_loss_fit(const Eigen::MatrixXd& u, const Eigen::VectorXd& y,
                          const Responsibilities& t, const LossSpec& spec,
                          const std::optional<RegressionCoefficients>& init = {},
                          const LossFitOptions& options = {});

// Weighted least squares on the replicated design with per-cell weights
// w_ik. Exposed for the EM M-step and for tests.
RegressionCoefficients weighted_least_squares(const Eigen::MatrixXd& u,
                                              const Eigen::VectorXd& y,
                                              const Eigen::MatrixXd& w);

}  // namespace semimix
