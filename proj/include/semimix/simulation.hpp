#pragma once

// Synthetic designs with two latent classes, four proxy columns and two
// covariates:
//   Z ~ Bernoulli(1/2), X_ij = mu_z + eta_ij with mu_0 = -xi, mu_1 = +xi,
//   U ~ N(0, I_2), Y = delta_z + U'gamma + eps, delta = (-1, 1), gamma = (1, 1).
// xi defaults to the value giving a Bayes error of 0.10 for the rule on X.

#include <Eigen/Dense>

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "semimix/model.hpp"

namespace semimix {

enum class SimCase {
  Case1,           // eta, eps ~ N(0, 1)
  Case2,           // eta ~ N(0, 1), eps ~ Exp(1) - 1
  Case3,           // eta ~ t3, eps ~ N(0, 1)
  Case4,           // eta, eps ~ t3
  RobustStudent3,  // same draws as Case4
  Asym,            // eta ~ N(0, 1), eps ~ N(-c_tau, 1)
};

enum class EtaFamily { Gaussian, Student3 };
enum class EpsFamily { Gaussian, CenteredExp, Student3 };

SimCase parse_sim_case(const std::string& text);
std::string to_string(SimCase c);

inline constexpr double kDefaultTargetError = 0.10;

struct SimDesign {
  SimCase sim_case = SimCase::Case1;
  // Quantile(tau) or Expectile(tau); Asym only.
  LossSpec asym_target = LossSpec::quantile(0.75);
  std::size_t n = 2000;
  std::uint64_t seed = 0;
  std::optional<double> xi;

  static constexpr std::size_t kClasses = 2;
  static constexpr std::size_t kDx = 4;
  static constexpr std::size_t kDu = 2;

  EtaFamily eta_family() const;
  EpsFamily eps_family() const;
  double separation() const;
  // Location of eps: -c_tau for Asym, 0 otherwise.
  double eps_shift() const;
  RegressionCoefficients beta_true() const;
  Eigen::VectorXd pi_true() const { return Eigen::VectorXd::Constant(2, 0.5); }
  double class_mean(int z) const { return z == 0 ? -separation() : separation(); }
  void validate() const;
};

// xi such that the Bayes rule on X misclassifies with probability
// target_error. Closed form for Gaussian eta; Monte Carlo bisection with
// common random numbers (10^6 draws, cached) for t3. Throws NoRoot when
// the target cannot be bracketed.
double calibrate_xi(EtaFamily family, double target_error);

// Monte Carlo misclassification of the Bayes rule on X on fresh draws.
double x_rule_error(EtaFamily family, double xi, std::size_t draws, std::uint64_t seed);

// tau-quantile or tau-expectile of N(0, 1).
double compute_c_tau(const LossSpec& target);

Dataset generate(const SimDesign& design);

// True posterior rules and the conditional-mean predictor of the design.
class BayesRules {
 public:
  explicit BayesRules(const SimDesign& design);

  double log_eta_density(double e) const;
  double log_eps_density(double e) const;  // density of eps, shift included

  Eigen::Vector2d x_rule(std::span<const double> x) const;
  Eigen::Vector2d xy_rule(std::span<const double> x, std::span<const double> u, double y) const;
  // E[Y | U = u, X = x].
  double optimal_predictor(std::span<const double> x, std::span<const double> u) const;

 private:
  SimDesign design_;
  RegressionCoefficients beta_;
  double xi_;
  double eps_mean_;
};

// Mixed-type design used by the CLI workflow: three classes, two
// continuous and two categorical proxy columns with known class profiles.
struct MixedDesign {
  std::size_t n = 2000;
  std::uint64_t seed = 0;

  static constexpr std::size_t kClasses = 3;
  Eigen::VectorXd pi_true() const;
  RegressionCoefficients beta_true() const;
  // [class][level] masses of categorical column c (0 or 1).
  std::vector<std::vector<double>> level_probs(std::size_t column) const;
  std::vector<double> continuous_means(std::size_t column) const;
};

Dataset generate(const MixedDesign& design);

}  // namespace semimix
