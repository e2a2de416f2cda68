#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <vector>

#include "semimix/model.hpp"

using namespace semimix;

namespace {

std::vector<LossSpec> all_losses() {
  return {LossSpec::quadratic(), LossSpec::absolute(),    LossSpec::huber(1.0),
          LossSpec::logcosh(),   LossSpec::quantile(0.3), LossSpec::expectile(0.8)};
}

// Replicated design with class-indicator columns, solved by QR.
Eigen::VectorXd replicated_wls(const Eigen::MatrixXd& u, const Eigen::VectorXd& y,
                               const Eigen::MatrixXd& t) {
  const Eigen::Index n = y.size(), du = u.cols(), k = t.cols();
  Eigen::MatrixXd design = Eigen::MatrixXd::Zero(n * k, du + k);
  Eigen::VectorXd rhs(n * k);
  for (Eigen::Index kk = 0; kk < k; ++kk) {
    for (Eigen::Index i = 0; i < n; ++i) {
      const double sw = std::sqrt(t(i, kk));
      design.row(kk * n + i).head(du) = sw * u.row(i);
      design(kk * n + i, du + kk) = sw;
      rhs(kk * n + i) = sw * y(i);
    }
  }
  return design.colPivHouseholderQr().solve(rhs);
}

Eigen::MatrixXd random_responsibilities(std::mt19937_64& rng, Eigen::Index n, Eigen::Index k) {
  std::gamma_distribution<double> g(1.0, 1.0);
  Eigen::MatrixXd t(n, k);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index kk = 0; kk < k; ++kk) t(i, kk) = g(rng);
    t.row(i) /= t.row(i).sum();
  }
  return t;
}

// Exhaustive search over basic solutions of the weighted check-loss LP.
Eigen::VectorXd brute_force_quantile(const Eigen::MatrixXd& u, const Eigen::VectorXd& y,
                                     const Eigen::MatrixXd& t, const LossSpec& loss) {
  const Eigen::Index n = y.size(), du = u.cols(), k = t.cols(), p = du + k;
  std::vector<Eigen::VectorXd> rows;
  std::vector<double> resp;
  for (Eigen::Index kk = 0; kk < k; ++kk) {
    for (Eigen::Index i = 0; i < n; ++i) {
      Eigen::VectorXd r = Eigen::VectorXd::Zero(p);
      r.head(du) = u.row(i).transpose();
      r(du + kk) = 1.0;
      rows.push_back(r);
      resp.push_back(y(i));
    }
  }
  const auto m = rows.size();
  std::vector<bool> pick(m, false);
  std::fill(pick.begin(), pick.begin() + p, true);
  double best = INFINITY;
  Eigen::VectorXd best_beta;
  do {
    Eigen::MatrixXd a(p, p);
    Eigen::VectorXd b(p);
    Eigen::Index r = 0;
    for (std::size_t j = 0; j < m; ++j) {
      if (pick[j]) {
        a.row(r) = rows[j].transpose();
        b(r++) = resp[j];
      }
    }
    Eigen::FullPivLU<Eigen::MatrixXd> lu(a);
    if (lu.rank() < p) continue;
    const Eigen::VectorXd beta = lu.solve(b);
    const double obj = weighted_loss_objective(u, y, t, loss,
                                               RegressionCoefficients::from_stacked(beta, du));
    if (obj < best) {
      best = obj;
      best_beta = beta;
    }
  } while (std::prev_permutation(pick.begin(), pick.end()));
  return best_beta;
}

}  // namespace

TEST_CASE("loss values") {
  CHECK(loss_value(LossSpec::quadratic(), 2.0) == doctest::Approx(4.0));
  CHECK(loss_value(LossSpec::quantile(0.5), 0.0) == 0.0);
  CHECK(loss_value(LossSpec::huber(1.0), 3.0) == doctest::Approx(2.5));

  // Huber(1) at 3 from integrating its derivative.
  double integral = 0.0;
  const int steps = 300000;
  for (int s = 0; s < steps; ++s) {
    const double a = 3.0 * (s + 0.5) / steps;
    integral += loss_derivative(LossSpec::huber(1.0), a) * 3.0 / steps;
  }
  CHECK(integral == doctest::Approx(2.5).epsilon(1e-9));
}

TEST_CASE("loss derivatives") {
  CHECK(loss_derivative(LossSpec::quadratic(), 3.0) == doctest::Approx(6.0));
  CHECK(loss_derivative(LossSpec::quantile(0.75), -0.1) == doctest::Approx(-0.25));
  for (double t : {-2.0, -0.3, 0.0, 0.7, 5.0}) {
    CHECK(loss_derivative(LossSpec::expectile(0.5), t) == doctest::Approx(2.0 * t * 0.5));
  }
  // Left limit at a kink.
  CHECK(loss_derivative(LossSpec::quantile(0.25), 0.0) == doctest::Approx(-0.75));
  CHECK(loss_derivative(LossSpec::absolute(), 0.0) == -1.0);
}

TEST_CASE("loss invariants: positivity and finite differences") {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> dist(-4.0, 4.0);
  for (const auto& loss : all_losses()) {
    CAPTURE(loss.name());
    CHECK(loss_value(loss, 0.0) == doctest::Approx(0.0).epsilon(1e-15));
    for (int s = 0; s < 100; ++s) {
      const double t = dist(rng);
      if (std::abs(t) < 1e-3) continue;
      CHECK(loss_value(loss, t) > 0.0);
      if (loss.kind == LossKind::Huber && std::abs(std::abs(t) - loss.param) < 1e-3) continue;
      const double h = 1e-6;
      const double fd = (loss_value(loss, t + h) - loss_value(loss, t - h)) / (2 * h);
      CHECK(std::abs(fd - loss_derivative(loss, t)) < 1e-6);
    }
    // Monotone derivative.
    double prev = -INFINITY;
    for (double t = -5.0; t <= 5.0; t += 0.01) {
      const double d = loss_derivative(loss, t);
      CHECK(d >= prev - 1e-15);
      prev = d;
    }
  }
}

TEST_CASE("loss parsing") {
  CHECK(LossSpec::parse("huber:1") == LossSpec::huber(1.0));
  CHECK(LossSpec::parse("quantile:0.75") == LossSpec::quantile(0.75));
  CHECK(LossSpec::parse("median") == LossSpec::absolute());
  CHECK_THROWS_AS(LossSpec::parse("quantile:1.5"), Error);
  CHECK_THROWS_AS(LossSpec::parse("quantile"), Error);
  CHECK_THROWS_AS(LossSpec::parse("bogus"), Error);
  CHECK(LossSpec::parse(LossSpec::expectile(0.9).name()) == LossSpec::expectile(0.9));
}

TEST_CASE("quadratic fit equals replicated weighted least squares") {
  std::mt19937_64 rng(11);
  std::normal_distribution<double> nd;
  for (int rep = 0; rep < 20; ++rep) {
    const Eigen::Index n = 50;
    Eigen::MatrixXd u(n, 2);
    Eigen::VectorXd y(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      u(i, 0) = nd(rng);
      u(i, 1) = nd(rng);
      y(i) = nd(rng) * 2.0 + u(i, 0);
    }
    const Eigen::MatrixXd t = random_responsibilities(rng, n, 2);
    const auto fit = weighted_loss_fit(u, y, t, LossSpec::quadratic());
    const Eigen::VectorXd oracle = replicated_wls(u, y, t);
    CHECK((fit.coeffs.stacked() - oracle).lpNorm<Eigen::Infinity>() < 1e-8);
  }
}

TEST_CASE("single class reduces to OLS with an intercept column") {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> nd;
  const Eigen::Index n = 40;
  Eigen::MatrixXd u(n, 2);
  Eigen::VectorXd y(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    u(i, 0) = nd(rng);
    u(i, 1) = nd(rng);
    y(i) = 1.0 + 0.5 * u(i, 0) + nd(rng);
  }
  Eigen::MatrixXd design(n, 3);
  design << u, Eigen::VectorXd::Ones(n);
  const Eigen::VectorXd ols = design.colPivHouseholderQr().solve(y);
  const auto fit = weighted_loss_fit(u, y, Eigen::MatrixXd::Ones(n, 1), LossSpec::quadratic());
  CHECK((fit.coeffs.stacked() - ols).norm() < 1e-10);
}

TEST_CASE("noiseless data with true hard labels is recovered exactly") {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> nd;
  const Eigen::Index n = 30;
  Eigen::MatrixXd u(n, 2);
  Eigen::VectorXd y(n);
  std::vector<int> z(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    z[i] = static_cast<int>(i % 2);
    u(i, 0) = nd(rng);
    u(i, 1) = nd(rng);
    y(i) = u(i, 0) + u(i, 1) + (z[i] == 0 ? -1.0 : 1.0);
  }
  const auto t = hard_responsibilities(z, 2);
  for (const auto& loss : all_losses()) {
    CAPTURE(loss.name());
    const auto fit = weighted_loss_fit(u, y, t, loss);
    Eigen::VectorXd truth(4);
    truth << 1.0, 1.0, -1.0, 1.0;
    CHECK((fit.coeffs.stacked() - truth).lpNorm<Eigen::Infinity>() < 1e-6);
  }
}

TEST_CASE("weighted median by grid search") {
  Eigen::VectorXd y(5);
  y << 0.3, -1.2, 2.5, 0.9, 4.0;
  Eigen::MatrixXd t(5, 1);
  t << 0.1, 0.35, 0.2, 0.15, 0.2;
  const Eigen::MatrixXd u(5, 0);
  const auto fit = weighted_loss_fit(u, y, t, LossSpec::quantile(0.5));
  double best = INFINITY, arg = 0.0;
  for (double d = -2.0; d <= 5.0; d += 1e-5) {
    double obj = 0.0;
    for (int i = 0; i < 5; ++i) obj += t(i, 0) * std::abs(y(i) - d);
    if (obj < best) {
      best = obj;
      arg = d;
    }
  }
  CHECK(std::abs(fit.coeffs.delta(0) - arg) < 1e-4);
  CHECK(std::abs(fit.coeffs.delta(0) - 0.9) < 1e-12);
}

TEST_CASE("weighted quantile fit matches exhaustive basic solutions") {
  std::mt19937_64 rng(17);
  std::normal_distribution<double> nd;
  for (int rep = 0; rep < 12; ++rep) {
    const Eigen::Index n = 4 + rep % 4;  // 4..7
    const Eigen::Index k = 1 + rep % 2;
    Eigen::MatrixXd u(n, 1);
    Eigen::VectorXd y(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      u(i, 0) = nd(rng);
      y(i) = 0.5 * u(i, 0) + nd(rng);
    }
    const Eigen::MatrixXd t = random_responsibilities(rng, n, k);
    const LossSpec loss = rep % 3 == 0 ? LossSpec::absolute() : LossSpec::quantile(0.3 + 0.1 * (rep % 4));
    CAPTURE(loss.name());
    const auto fit = weighted_loss_fit(u, y, t, loss);
    const Eigen::VectorXd oracle = brute_force_quantile(u, y, t, loss);
    const double obj_fit = fit.objective;
    const double obj_oracle = weighted_loss_objective(
        u, y, t, loss, RegressionCoefficients::from_stacked(oracle, 1));
    CHECK(obj_fit <= obj_oracle + 1e-12);
    CHECK((fit.coeffs.stacked() - oracle).lpNorm<Eigen::Infinity>() < 1e-4);
  }
}

TEST_CASE("iterative fits never increase the objective relative to init") {
  std::mt19937_64 rng(23);
  std::normal_distribution<double> nd;
  std::student_t_distribution<double> td(2.0);
  for (const auto& loss : all_losses()) {
    CAPTURE(loss.name());
    const Eigen::Index n = 60;
    Eigen::MatrixXd u(n, 2);
    Eigen::VectorXd y(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      u(i, 0) = nd(rng);
      u(i, 1) = nd(rng);
      y(i) = u(i, 0) - u(i, 1) + td(rng);
    }
    const Eigen::MatrixXd t = random_responsibilities(rng, n, 3);
    RegressionCoefficients init{Eigen::Vector2d(0.3, -0.2), Eigen::Vector3d(1.0, 0.0, -1.0)};
    const double before = weighted_loss_objective(u, y, t, loss, init);
    const auto fit = weighted_loss_fit(u, y, t, loss, init);
    CHECK(fit.objective <= before);
    CHECK(fit.converged);
    // Stationarity: weighted moment of rho per class and per U column.
    if (!loss.is_piecewise_linear()) {
      const Eigen::MatrixXd r = residual_matrix(u, y, fit.coeffs);
      for (Eigen::Index kk = 0; kk < 3; ++kk) {
        double g = 0.0;
        for (Eigen::Index i = 0; i < n; ++i) g += t(i, kk) * loss_derivative(loss, r(i, kk));
        CHECK(std::abs(g) < 1e-6);
      }
    }
  }
}

TEST_CASE("rank-deficient design is reported") {
  Eigen::MatrixXd u(6, 1);
  u << 1, 1, 1, 1, 1, 1;  // collinear with the class indicator
  Eigen::VectorXd y(6);
  y << 1, 2, 3, 4, 5, 6;
  const Eigen::MatrixXd t = Eigen::MatrixXd::Ones(6, 1);
  try {
    weighted_loss_fit(u, y, t, LossSpec::quadratic());
    FAIL("expected SingularDesign");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::SingularDesign);
  }
}

TEST_CASE("dataset validation") {
  Dataset d;
  d.u = Eigen::MatrixXd::Zero(3, 1);
  d.y = Eigen::VectorXd::Zero(3);
  d.x.push_back(XColumn::categorical("c", {0, 1, 2}, 2));
  CHECK_THROWS_AS(d.validate(), Error);
  d.x[0] = XColumn::categorical("c", {0, 1, 1}, 2);
  CHECK_NOTHROW(d.validate());
  d.x.push_back(XColumn::continuous("v", {1.0, 2.0}));
  CHECK_THROWS_AS(d.validate(), Error);
  const std::vector<std::size_t> rows{2, 0};
  d.x.pop_back();
  const Dataset s = d.subset(rows);
  CHECK(s.n() == 2);
  CHECK(s.x[0].levels == std::vector<int>{1, 0});
}
