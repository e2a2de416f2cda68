#include <doctest.h>

#include <cmath>
#include <random>

#include "semimix/eval.hpp"
#include "semimix/simulation.hpp"
#include "semimix/stats.hpp"
#include "semimix/two_step.hpp"

using namespace semimix;

namespace {

// Diagonal Gaussian mixture EM on X written independently of the library.
struct PlainGmm {
  Eigen::VectorXd pi;
  Eigen::MatrixXd mean, var;  // K x d
};

PlainGmm plain_m_step(const Eigen::MatrixXd& x, const Eigen::MatrixXd& t) {
  PlainGmm g;
  const Eigen::Index k = t.cols(), d = x.cols();
  g.pi = t.colwise().mean().transpose();
  g.mean.resize(k, d);
  g.var.resize(k, d);
  for (Eigen::Index c = 0; c < k; ++c) {
    const double mass = t.col(c).sum();
    for (Eigen::Index j = 0; j < d; ++j) {
      const double m = t.col(c).dot(x.col(j)) / mass;
      g.mean(c, j) = m;
      g.var(c, j) = std::max(t.col(c).dot((x.col(j).array() - m).square().matrix()) / mass, 1e-8);
    }
  }
  return g;
}

Eigen::MatrixXd plain_e_step(const Eigen::MatrixXd& x, const PlainGmm& g) {
  Eigen::MatrixXd t(x.rows(), g.pi.size());
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    Eigen::VectorXd lw(g.pi.size());
    for (Eigen::Index c = 0; c < g.pi.size(); ++c) {
      lw(c) = std::log(g.pi(c));
      for (Eigen::Index j = 0; j < x.cols(); ++j) {
        const double z = x(i, j) - g.mean(c, j);
        lw(c) += -0.5 * z * z / g.var(c, j) - 0.5 * std::log(2.0 * M_PI * g.var(c, j));
      }
    }
    const double mx = lw.maxCoeff();
    const Eigen::VectorXd w = (lw.array() - mx).exp();
    t.row(i) = w.transpose() / w.sum();
  }
  return t;
}

Eigen::MatrixXd x_matrix(const Dataset& data) {
  Eigen::MatrixXd x(data.n(), data.d_x());
  for (std::size_t j = 0; j < data.d_x(); ++j) {
    for (std::size_t i = 0; i < data.n(); ++i) x(i, j) = data.x[j].values[i];
  }
  return x;
}

}  // namespace

TEST_CASE("single cluster is a column of ones") {
  SimDesign d;
  d.n = 100;
  const Dataset data = generate(d);
  for (ClusterMode mode : {ClusterMode::Parametric, ClusterMode::SemiParametric}) {
    const ClusterResult c = cluster_x(data, 1, mode);
    CHECK(c.t.cols() == 1);
    CHECK((c.t.array() == 1.0).all());
  }
}

TEST_CASE("parametric clustering equals an independent EM on X") {
  SimDesign d;
  d.n = 300;
  d.seed = 4;
  const Dataset data = generate(d);
  const Eigen::MatrixXd x = x_matrix(data);
  std::mt19937_64 rng(1);
  std::gamma_distribution<double> gd(1.0, 1.0);
  Responsibilities t0(300, 2);
  for (Eigen::Index i = 0; i < 300; ++i) {
    t0(i, 0) = gd(rng);
    t0(i, 1) = gd(rng);
    t0.row(i) /= t0.row(i).sum();
  }
  EMSettings s;
  s.n_starts = 1;
  s.max_iter = 25;
  s.rel_tol = 0.0;
  const EmFit fit = em_fit_x(data, 2, s, t0);
  // parameters are rebuilt max_iter + 1 times from t0
  Eigen::MatrixXd t = t0, used = t0;
  PlainGmm g;
  for (int it = 0; it <= s.max_iter; ++it) {
    used = t;
    g = plain_m_step(x, t);
    t = plain_e_step(x, g);
  }
  CHECK((fit.result.t - used).cwiseAbs().maxCoeff() < 1e-10);
  CHECK((fit.model.pi - g.pi).cwiseAbs().maxCoeff() < 1e-10);
  for (int c = 0; c < 2; ++c) {
    CHECK((fit.model.components[c].means - g.mean.row(c).transpose()).cwiseAbs().maxCoeff() < 1e-10);
  }
}

TEST_CASE("X clustering on case-1 data") {
  SimDesign d;
  d.seed = 12;
  const Dataset data = generate(d);
  for (ClusterMode mode : {ClusterMode::Parametric, ClusterMode::SemiParametric}) {
    TwoStepSettings s;
    s.em.n_starts = 2;
    s.mm.n_starts = 1;
    const ClusterResult c = cluster_x(data, 2, mode, s);
    CHECK(adjusted_rand_index(map_labels(c.t), *data.true_z) >= 0.55);
    CHECK((c.t.rowwise().sum().array() - 1.0).abs().maxCoeff() < 1e-10);
  }
}

TEST_CASE("regression step uses the clustering weights unchanged") {
  SimDesign d;
  d.n = 500;
  d.seed = 2;
  const Dataset data = generate(d);
  TwoStepSettings s;
  s.em.n_starts = 2;
  const ClusterResult c = cluster_x(data, 2, ClusterMode::Parametric, s);
  const FitResult fuzzy = two_step_regression(data, c, LossSpec::quadratic());
  CHECK((fuzzy.t.array() == c.t.array()).all());
  const FitResult hard = two_step_regression(data, c, LossSpec::quadratic(), true);
  CHECK((hard.t.array() == hard_responsibilities(map_labels(c.t), 2).array()).all());
  const FitResult whole = two_step_fit(data, 2, LossSpec::quadratic(), ClusterMode::Parametric, s);
  CHECK((whole.t.array() == c.t.array()).all());
  CHECK((whole.coeffs.stacked() - fuzzy.coeffs.stacked()).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("true hard clusters and noiseless responses give exact coefficients") {
  SimDesign d;
  d.n = 200;
  d.seed = 3;
  Dataset data = generate(d);
  const RegressionCoefficients truth = d.beta_true();
  for (std::size_t i = 0; i < data.n(); ++i) {
    data.y(i) = data.u.row(i).dot(truth.gamma) + truth.delta((*data.true_z)[i]);
  }
  ClusterResult c;
  c.t = hard_responsibilities(*data.true_z, 2);
  for (const LossSpec& loss : {LossSpec::quadratic(), LossSpec::absolute(), LossSpec::huber(0.5)}) {
    const FitResult fit = two_step_regression(data, c, loss, true);
    CHECK((fit.coeffs.stacked() - truth.stacked()).cwiseAbs().maxCoeff() < 1e-7);
  }
}

TEST_CASE("fuzzy two-step intercepts shrink toward their mean") {
  SimDesign d;
  d.seed = 21;
  const Dataset data = generate(d);
  TwoStepSettings s;
  s.em.n_starts = 2;
  const FitResult fit = two_step_fit(data, 2, LossSpec::quadratic(), ClusterMode::Parametric, s);
  const Permutation p = align_labels(fit.coeffs.delta, d.beta_true().delta);
  const Eigen::VectorXd delta = apply_permutation(fit.coeffs.delta, p);
  CHECK(delta(0) > -1.0);
  CHECK(delta(1) < 1.0);
  const Eigen::VectorXd limit = d.beta_true().delta + lemma2_bias_oracle(d, 200000, 5);
  CHECK(std::abs(delta(0) - limit(0)) < 0.15);
  CHECK(std::abs(delta(1) - limit(1)) < 0.15);
}
