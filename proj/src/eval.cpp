#include "semimix/eval.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <sstream>

#include "init.hpp"

namespace semimix {

double adjusted_rand_index(std::span<const int> a, std::span<const int> b) {
  if (a.size() != b.size()) throw Error(ErrorKind::LengthMismatch, "partitions differ in length");
  if (a.empty()) throw Error(ErrorKind::InvalidArgument, "partitions are empty");
  std::vector<int> la(a.begin(), a.end()), lb(b.begin(), b.end());
  auto compact = [](std::vector<int>& v) {
    std::vector<int> keys = v;
    std::sort(keys.begin(), keys.end());
    keys.erase(std::unique(keys.begin(), keys.end()), keys.end());
    for (int& x : v) x = static_cast<int>(std::lower_bound(keys.begin(), keys.end(), x) - keys.begin());
    return keys.size();
  };
  const std::size_t ra = compact(la), rb = compact(lb);
  Eigen::MatrixXd table = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(ra), static_cast<Eigen::Index>(rb));
  for (std::size_t i = 0; i < la.size(); ++i) table(la[i], lb[i]) += 1.0;
  auto pairs = [](double m) { return 0.5 * m * (m - 1.0); };
  double index = 0.0, sa = 0.0, sb = 0.0;
  for (Eigen::Index r = 0; r < table.rows(); ++r) {
    for (Eigen::Index c = 0; c < table.cols(); ++c) index += pairs(table(r, c));
  }
  for (Eigen::Index r = 0; r < table.rows(); ++r) sa += pairs(table.row(r).sum());
  for (Eigen::Index c = 0; c < table.cols(); ++c) sb += pairs(table.col(c).sum());
  const double total = pairs(static_cast<double>(la.size()));
  const double expected = sa * sb / total;
  const double max_index = 0.5 * (sa + sb);
  if (max_index == expected) return ra == rb ? 1.0 : 0.0;
  return (index - expected) / (max_index - expected);
}

std::vector<int> hungarian(const Eigen::MatrixXd& cost) {
  // Shortest augmenting path (Jonker-Volgenant style potentials), square input.
  const auto n = static_cast<int>(cost.rows());
  if (cost.cols() != cost.rows()) throw Error(ErrorKind::InvalidArgument, "cost must be square");
  constexpr double inf = std::numeric_limits<double>::infinity();
  std::vector<double> u(static_cast<std::size_t>(n + 1)), v(static_cast<std::size_t>(n + 1));
  std::vector<int> p(static_cast<std::size_t>(n + 1)), way(static_cast<std::size_t>(n + 1));
  for (int i = 1; i <= n; ++i) {
    p[0] = i;
    int j0 = 0;
    std::vector<double> minv(static_cast<std::size_t>(n + 1), inf);
    std::vector<char> used(static_cast<std::size_t>(n + 1), 0);
    do {
      used[static_cast<std::size_t>(j0)] = 1;
      const int i0 = p[static_cast<std::size_t>(j0)];
      double delta = inf;
      int j1 = 0;
      for (int j = 1; j <= n; ++j) {
        if (used[static_cast<std::size_t>(j)]) continue;
        const double cur = cost(i0 - 1, j - 1) - u[static_cast<std::size_t>(i0)] - v[static_cast<std::size_t>(j)];
        if (cur < minv[static_cast<std::size_t>(j)]) {
          minv[static_cast<std::size_t>(j)] = cur;
          way[static_cast<std::size_t>(j)] = j0;
        }
        if (minv[static_cast<std::size_t>(j)] < delta) {
          delta = minv[static_cast<std::size_t>(j)];
          j1 = j;
        }
      }
      for (int j = 0; j <= n; ++j) {
        if (used[static_cast<std::size_t>(j)]) {
          u[static_cast<std::size_t>(p[static_cast<std::size_t>(j)])] += delta;
          v[static_cast<std::size_t>(j)] -= delta;
        } else {
          minv[static_cast<std::size_t>(j)] -= delta;
        }
      }
      j0 = j1;
    } while (p[static_cast<std::size_t>(j0)] != 0);
    do {
      const int j1 = way[static_cast<std::size_t>(j0)];
      p[static_cast<std::size_t>(j0)] = p[static_cast<std::size_t>(j1)];
      j0 = j1;
    } while (j0 != 0);
  }
  std::vector<int> result(static_cast<std::size_t>(n));
  for (int j = 1; j <= n; ++j) result[static_cast<std::size_t>(p[static_cast<std::size_t>(j)] - 1)] = j - 1;
  return result;
}

namespace {

// perm[k] = estimated class for reference class k, minimising sum_k cost(k, perm[k]).
Permutation best_assignment(const Eigen::MatrixXd& cost) {
  const auto k = static_cast<int>(cost.rows());
  if (k > 10) return hungarian(cost);
  Permutation perm(static_cast<std::size_t>(k));
  std::iota(perm.begin(), perm.end(), 0);
  Permutation best = perm;
  double best_cost = std::numeric_limits<double>::infinity();
  do {
    double c = 0.0;
    for (int r = 0; r < k; ++r) c += cost(r, perm[static_cast<std::size_t>(r)]);
    if (c < best_cost) {
      best_cost = c;
      best = perm;
    }
  } while (std::next_permutation(perm.begin(), perm.end()));
  return best;
}

}  // namespace

Permutation align_labels(const Eigen::VectorXd& delta_hat, const Eigen::VectorXd& delta) {
  if (delta_hat.size() != delta.size()) throw Error(ErrorKind::LengthMismatch, "K differs");
  Eigen::MatrixXd cost(delta.size(), delta.size());
  for (Eigen::Index r = 0; r < delta.size(); ++r) {
    for (Eigen::Index c = 0; c < delta.size(); ++c) cost(r, c) = std::pow(delta_hat(c) - delta(r), 2);
  }
  return best_assignment(cost);
}

Permutation align_by_overlap(const Responsibilities& t_hat, const Responsibilities& t_ref) {
  if (t_hat.rows() != t_ref.rows() || t_hat.cols() != t_ref.cols()) {
    throw Error(ErrorKind::LengthMismatch, "responsibility shapes differ");
  }
  const Eigen::MatrixXd overlap = t_ref.transpose() * t_hat;  // (ref k, est l)
  return best_assignment(-overlap);
}

RegressionCoefficients apply_permutation(const RegressionCoefficients& beta, const Permutation& perm) {
  RegressionCoefficients out = beta;
  out.delta = apply_permutation(beta.delta, perm);
  return out;
}

Eigen::VectorXd apply_permutation(const Eigen::VectorXd& v, const Permutation& perm) {
  Eigen::VectorXd out(static_cast<Eigen::Index>(perm.size()));
  for (std::size_t k = 0; k < perm.size(); ++k) out(static_cast<Eigen::Index>(k)) = v(perm[k]);
  return out;
}

Responsibilities apply_permutation(const Responsibilities& t, const Permutation& perm) {
  Responsibilities out(t.rows(), t.cols());
  for (std::size_t k = 0; k < perm.size(); ++k) out.col(static_cast<Eigen::Index>(k)) = t.col(perm[k]);
  return out;
}

CoefficientError coefficient_mse(const RegressionCoefficients& beta_hat,
                                 const RegressionCoefficients& beta_true, const Permutation& perm) {
  if (beta_hat.d_u() != beta_true.d_u() || beta_hat.k() != beta_true.k() ||
      perm.size() != beta_true.k()) {
    throw Error(ErrorKind::LengthMismatch, "coefficient shapes differ");
  }
  CoefficientError out;
  out.per_coefficient = apply_permutation(beta_hat, perm).stacked() - beta_true.stacked();
  out.mse = out.per_coefficient.squaredNorm() / static_cast<double>(out.per_coefficient.size());
  return out;
}

Eigen::MatrixXd overlap_matrix(const SimDesign& design, std::size_t n_mc, std::uint64_t seed) {
  const BayesRules rules(design);
  auto rng = detail::make_rng(seed, 0x1e22u);
  std::bernoulli_distribution coin(0.5);
  std::normal_distribution<double> nd;
  std::student_t_distribution<double> t3(3.0);
  Eigen::Matrix2d acc = Eigen::Matrix2d::Zero();
  std::array<double, SimDesign::kDx> x{};
  const double mu[2] = {design.class_mean(0), design.class_mean(1)};
  const bool gaussian = design.eta_family() == EtaFamily::Gaussian;
  for (std::size_t d = 0; d < n_mc; ++d) {
    const int z = coin(rng) ? 1 : 0;
    for (double& v : x) {
      v = mu[z] + (gaussian ? nd(rng) : t3(rng));
    }
    const Eigen::Vector2d r = rules.x_rule(x);
    acc += r * r.transpose();
  }
  return acc / static_cast<double>(n_mc);
}

Eigen::VectorXd two_step_delta_limit(const Eigen::MatrixXd& overlap, const Eigen::VectorXd& delta) {
  return (overlap * delta).cwiseQuotient(overlap.rowwise().sum());
}

Eigen::VectorXd lemma2_bias_oracle(const SimDesign& design, std::size_t n_mc, std::uint64_t seed) {
  const Eigen::VectorXd delta = design.beta_true().delta;
  return two_step_delta_limit(overlap_matrix(design, n_mc, seed), delta) - delta;
}

nlohmann::json EvalReport::to_json() const {
  nlohmann::json j;
  j["method"] = method;
  j["replication"] = replication;
  j["ari"] = ari;
  j["beta_mse"] = beta_mse;
  j["per_coefficient_errors"] = std::vector<double>(per_coefficient_errors.data(),
                                                    per_coefficient_errors.data() + per_coefficient_errors.size());
  j["prediction_mse"] = prediction_mse ? nlohmann::json(*prediction_mse) : nlohmann::json(nullptr);
  nlohmann::json bias = nlohmann::json::array();
  for (const auto& [emp, pred] : bias_table) bias.push_back({{"empirical", emp}, {"predicted", pred}});
  j["bias_table"] = bias;
  j["alignment"] = alignment;
  return j;
}

std::string EvalReport::csv_header(std::size_t n_coefficients) {
  std::string h = "method,replication,ari,beta_mse,prediction_mse";
  for (std::size_t c = 0; c < n_coefficients; ++c) h += ",err" + std::to_string(c + 1);
  return h;
}

std::string EvalReport::csv_row() const {
  std::ostringstream out;
  out.precision(17);
  out << method << ',' << replication << ',' << ari << ',' << beta_mse << ',';
  if (prediction_mse) out << *prediction_mse;
  for (Eigen::Index c = 0; c < per_coefficient_errors.size(); ++c) out << ',' << per_coefficient_errors(c);
  return out.str();
}

EvalReport evaluate(const FitResult& fit, const Dataset& data, const RegressionCoefficients& truth,
                    const std::string& method) {
  if (!data.true_z) throw Error(ErrorKind::InvalidArgument, "evaluation needs true labels");
  EvalReport report;
  report.method = method;
  report.ari = adjusted_rand_index(fit.labels(), *data.true_z);
  report.alignment = align_labels(fit.coeffs.delta, truth.delta);
  const CoefficientError err = coefficient_mse(fit.coeffs, truth, report.alignment);
  report.beta_mse = err.mse;
  report.per_coefficient_errors = err.per_coefficient;
  return report;
}

}  // namespace semimix
