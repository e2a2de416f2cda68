#include "semimix/simulation.hpp"

#include <cmath>
#include <map>
#include <mutex>
#include <numbers>
#include <random>

#include "init.hpp"
#include "semimix/stats.hpp"

namespace semimix {

SimCase parse_sim_case(const std::string& text) {
  if (text == "case1") return SimCase::Case1;
  if (text == "case2") return SimCase::Case2;
  if (text == "case3") return SimCase::Case3;
  if (text == "case4") return SimCase::Case4;
  if (text == "robust-student3") return SimCase::RobustStudent3;
  if (text == "asym") return SimCase::Asym;
  throw Error(ErrorKind::InvalidArgument, "unknown simulation case '" + text + "'");
}

std::string to_string(SimCase c) {
  switch (c) {
    case SimCase::Case1: return "case1";
    case SimCase::Case2: return "case2";
    case SimCase::Case3: return "case3";
    case SimCase::Case4: return "case4";
    case SimCase::RobustStudent3: return "robust-student3";
    case SimCase::Asym: return "asym";
  }
  return "?";
}

EtaFamily SimDesign::eta_family() const {
  switch (sim_case) {
    case SimCase::Case3:
    case SimCase::Case4:
    case SimCase::RobustStudent3: return EtaFamily::Student3;
    default: return EtaFamily::Gaussian;
  }
}

EpsFamily SimDesign::eps_family() const {
  switch (sim_case) {
    case SimCase::Case2: return EpsFamily::CenteredExp;
    case SimCase::Case4:
    case SimCase::RobustStudent3: return EpsFamily::Student3;
    default: return EpsFamily::Gaussian;
  }
}

double SimDesign::separation() const {
  return xi ? *xi : calibrate_xi(eta_family(), kDefaultTargetError);
}

double SimDesign::eps_shift() const {
  return sim_case == SimCase::Asym ? -compute_c_tau(asym_target) : 0.0;
}

RegressionCoefficients SimDesign::beta_true() const {
  RegressionCoefficients b;
  b.gamma = Eigen::Vector2d(1.0, 1.0);
  b.delta = Eigen::Vector2d(-1.0, 1.0);
  return b;
}

void SimDesign::validate() const {
  if (n < 50) throw Error(ErrorKind::InvalidArgument, "simulated n must be at least 50");
  if (xi && !(*xi > 0.0)) throw Error(ErrorKind::InvalidArgument, "xi must be positive");
  if (sim_case == SimCase::Asym) {
    asym_target.validate();
    if (asym_target.kind != LossKind::Quantile && asym_target.kind != LossKind::Expectile) {
      throw Error(ErrorKind::InvalidArgument, "asymmetric design needs a quantile or expectile target");
    }
  }
}

namespace {

double log_t3(double e) { return stats::student_t_log_pdf(e, 3.0); }

// Misclassification of class 0 by the X rule, given eta draws (rows of 4).
// The rule picks class 1 when prod_j f(x_j - xi) > prod_j f(x_j + xi); for t3
// that is prod_j (3 + (x_j - xi)^2) < prod_j (3 + (x_j + xi)^2).
double t3_error(const std::vector<double>& eta, double xi) {
  const std::size_t draws = eta.size() / SimDesign::kDx;
  std::size_t wrong = 0;
  for (std::size_t d = 0; d < draws; ++d) {
    double to_one = 1.0, to_zero = 1.0;
    for (std::size_t j = 0; j < SimDesign::kDx; ++j) {
      const double x = -xi + eta[d * SimDesign::kDx + j];
      to_one *= 3.0 + (x - xi) * (x - xi);
      to_zero *= 3.0 + (x + xi) * (x + xi);
    }
    if (to_one < to_zero) ++wrong;
  }
  return static_cast<double>(wrong) / static_cast<double>(draws);
}

std::vector<double> t3_draws(std::size_t draws, std::uint64_t seed) {
  auto rng = detail::make_rng(seed, 0x7133u);
  std::student_t_distribution<double> t3(3.0);
  std::vector<double> eta(draws * SimDesign::kDx);
  for (double& e : eta) e = t3(rng);
  return eta;
}

}  // namespace

double calibrate_xi(EtaFamily family, double target_error) {
  if (!(target_error > 0.0 && target_error < 0.5)) {
    if (target_error == 0.5) return 0.0;
    throw Error(ErrorKind::InvalidArgument, "target error must lie in (0, 0.5)");
  }
  if (family == EtaFamily::Gaussian) {
    // sum_j X_j ~ N(+-4 xi, 4): error = Phi(-xi sqrt(d_X)).
    return stats::normal_quantile(1.0 - target_error) / std::sqrt(static_cast<double>(SimDesign::kDx));
  }
  static std::mutex mutex;
  static std::map<double, double> cache;
  const std::lock_guard lock(mutex);
  if (auto it = cache.find(target_error); it != cache.end()) return it->second;

  const std::vector<double> eta = t3_draws(1000000, 20240601u);
  double lo = 0.0, hi = 5.0;
  if (t3_error(eta, hi) > target_error) {
    throw Error(ErrorKind::NoRoot, "target error not reachable with xi <= 5");
  }
  while (hi - lo > 1e-7) {
    const double mid = 0.5 * (lo + hi);
    if (t3_error(eta, mid) > target_error) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  const double xi = 0.5 * (lo + hi);
  cache.emplace(target_error, xi);
  return xi;
}

double x_rule_error(EtaFamily family, double xi, std::size_t draws, std::uint64_t seed) {
  if (family == EtaFamily::Student3) return t3_error(t3_draws(draws, seed), xi);
  auto rng = detail::make_rng(seed, 0x9a55u);
  std::normal_distribution<double> nd;
  std::size_t wrong = 0;
  for (std::size_t d = 0; d < draws; ++d) {
    double s = 0.0;
    for (std::size_t j = 0; j < SimDesign::kDx; ++j) s += -xi + nd(rng);
    if (s > 0.0) ++wrong;
  }
  return static_cast<double>(wrong) / static_cast<double>(draws);
}

double compute_c_tau(const LossSpec& target) {
  target.validate();
  const double tau = target.param;
  if (target.kind == LossKind::Quantile) return stats::normal_quantile(tau);
  if (target.kind != LossKind::Expectile) {
    throw Error(ErrorKind::InvalidArgument, "c_tau needs a quantile or expectile target");
  }
  // Root of tau E[(Z - m)_+] = (1 - tau) E[(m - Z)_+], decreasing in m.
  double lo = -40.0, hi = 40.0;
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    const double g =
        tau * stats::normal_upper_partial(mid) - (1.0 - tau) * stats::normal_lower_partial(mid);
    if (g > 0.0) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return 0.5 * (lo + hi);
}

Dataset generate(const SimDesign& design) {
  design.validate();
  const double xi = design.separation();
  const double shift = design.eps_shift();
  const RegressionCoefficients beta = design.beta_true();
  auto rng = detail::make_rng(design.seed, 0x51a0u);
  std::bernoulli_distribution coin(0.5);
  std::normal_distribution<double> nd;
  std::student_t_distribution<double> t3(3.0);
  std::exponential_distribution<double> expo(1.0);

  const std::size_t n = design.n;
  Dataset data;
  data.u.resize(static_cast<Eigen::Index>(n), 2);
  data.y.resize(static_cast<Eigen::Index>(n));
  std::vector<std::vector<double>> x(SimDesign::kDx, std::vector<double>(n));
  std::vector<int> z(n);
  for (std::size_t i = 0; i < n; ++i) {
    const int zi = coin(rng) ? 1 : 0;
    z[i] = zi;
    const double mu = zi == 0 ? -xi : xi;
    for (std::size_t j = 0; j < SimDesign::kDx; ++j) {
      const double eta = design.eta_family() == EtaFamily::Gaussian ? nd(rng) : t3(rng);
      x[j][i] = mu + eta;
    }
    const auto ii = static_cast<Eigen::Index>(i);
    data.u(ii, 0) = nd(rng);
    data.u(ii, 1) = nd(rng);
    double eps = 0.0;
    switch (design.eps_family()) {
      case EpsFamily::Gaussian: eps = nd(rng) + shift; break;
      case EpsFamily::CenteredExp: eps = expo(rng) - 1.0; break;
      case EpsFamily::Student3: eps = t3(rng); break;
    }
    data.y(ii) = beta.delta(zi) + data.u.row(ii).dot(beta.gamma) + eps;
  }
  for (std::size_t j = 0; j < SimDesign::kDx; ++j) {
    data.x.push_back(XColumn::continuous("x" + std::to_string(j + 1), std::move(x[j])));
  }
  data.u_names = {"u1", "u2"};
  data.true_z = std::move(z);
  return data;
}

BayesRules::BayesRules(const SimDesign& design)
    : design_(design), beta_(design.beta_true()), xi_(design.separation()) {
  eps_mean_ = design.eps_shift();  // every eps family is centred before the shift
}

double BayesRules::log_eta_density(double e) const {
  if (design_.eta_family() == EtaFamily::Student3) return log_t3(e);
  return std::log(stats::normal_pdf(e));
}

double BayesRules::log_eps_density(double e) const {
  switch (design_.eps_family()) {
    case EpsFamily::Gaussian: return -0.5 * std::log(2.0 * std::numbers::pi) - 0.5 * (e - eps_mean_) * (e - eps_mean_);
    case EpsFamily::CenteredExp: return e > -1.0 ? -(e + 1.0) : -INFINITY;
    case EpsFamily::Student3: return log_t3(e);
  }
  return 0.0;
}

namespace {

Eigen::Vector2d normalize_pair(double a, double b) {
  const double m = std::max(a, b);
  const double ea = std::exp(a - m), eb = std::exp(b - m);
  return Eigen::Vector2d(ea / (ea + eb), eb / (ea + eb));
}

}  // namespace

Eigen::Vector2d BayesRules::x_rule(std::span<const double> x) const {
  double l0 = 0.0, l1 = 0.0;
  for (double v : x) {
    l0 += log_eta_density(v + xi_);
    l1 += log_eta_density(v - xi_);
  }
  return normalize_pair(l0, l1);
}

Eigen::Vector2d BayesRules::xy_rule(std::span<const double> x, std::span<const double> u,
                                     double y) const {
  double l0 = 0.0, l1 = 0.0;
  for (double v : x) {
    l0 += log_eta_density(v + xi_);
    l1 += log_eta_density(v - xi_);
  }
  double fit = 0.0;
  for (std::size_t j = 0; j < u.size(); ++j) fit += u[j] * beta_.gamma(static_cast<Eigen::Index>(j));
  l0 += log_eps_density(y - fit - beta_.delta(0));
  l1 += log_eps_density(y - fit - beta_.delta(1));
  return normalize_pair(l0, l1);
}

double BayesRules::optimal_predictor(std::span<const double> x, std::span<const double> u) const {
  const Eigen::Vector2d r = x_rule(x);
  double fit = eps_mean_;
  for (std::size_t j = 0; j < u.size(); ++j) fit += u[j] * beta_.gamma(static_cast<Eigen::Index>(j));
  return fit + r(0) * beta_.delta(0) + r(1) * beta_.delta(1);
}

Eigen::VectorXd MixedDesign::pi_true() const { return Eigen::Vector3d(0.3, 0.4, 0.3); }

RegressionCoefficients MixedDesign::beta_true() const {
  RegressionCoefficients b;
  b.gamma = Eigen::Vector2d(1.0, -0.5);
  b.delta = Eigen::Vector3d(-2.0, 0.0, 2.5);
  return b;
}

std::vector<std::vector<double>> MixedDesign::level_probs(std::size_t column) const {
  if (column == 0) return {{0.7, 0.2, 0.1}, {0.2, 0.6, 0.2}, {0.1, 0.2, 0.7}};
  return {{0.8, 0.2}, {0.5, 0.5}, {0.2, 0.8}};
}

std::vector<double> MixedDesign::continuous_means(std::size_t column) const {
  if (column == 0) return {-2.0, 0.0, 2.0};
  return {1.0, -1.0, 0.5};
}

Dataset generate(const MixedDesign& design) {
  if (design.n < 50) throw Error(ErrorKind::InvalidArgument, "simulated n must be at least 50");
  auto rng = detail::make_rng(design.seed, 0x3a1du);
  const Eigen::VectorXd pi = design.pi_true();
  const RegressionCoefficients beta = design.beta_true();
  std::discrete_distribution<int> cls(pi.data(), pi.data() + pi.size());
  std::normal_distribution<double> nd;
  const std::size_t n = design.n;

  Dataset data;
  data.u.resize(static_cast<Eigen::Index>(n), 2);
  data.y.resize(static_cast<Eigen::Index>(n));
  std::vector<std::vector<double>> cont(2, std::vector<double>(n));
  std::vector<std::vector<int>> cat(2, std::vector<int>(n));
  std::vector<int> z(n);
  for (std::size_t i = 0; i < n; ++i) {
    const int zi = cls(rng);
    z[i] = zi;
    for (std::size_t c = 0; c < 2; ++c) {
      cont[c][i] = design.continuous_means(c)[static_cast<std::size_t>(zi)] + nd(rng);
    }
    for (std::size_t c = 0; c < 2; ++c) {
      const auto probs = design.level_probs(c)[static_cast<std::size_t>(zi)];
      std::discrete_distribution<int> lev(probs.begin(), probs.end());
      cat[c][i] = lev(rng);
    }
    const auto ii = static_cast<Eigen::Index>(i);
    data.u(ii, 0) = nd(rng);
    data.u(ii, 1) = nd(rng);
    data.y(ii) = beta.delta(zi) + data.u.row(ii).dot(beta.gamma) + nd(rng);
  }
  data.x.push_back(XColumn::continuous("activity", std::move(cont[0])));
  data.x.push_back(XColumn::continuous("fitness", std::move(cont[1])));
  data.x.push_back(XColumn::categorical("screen_time", std::move(cat[0]), 3, {"low", "mid", "high"}));
  data.x.push_back(XColumn::categorical("walks", std::move(cat[1]), 2, {"no", "yes"}));
  data.u_names = {"u1", "u2"};
  data.true_z = std::move(z);
  return data;
}

}  // namespace semimix
