#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "semimix/eval.hpp"
#include "semimix/parametric_em.hpp"
#include "semimix/simulation.hpp"
#include "semimix/stats.hpp"

using namespace semimix;

namespace {

Dataset small_case(SimCase c, std::size_t n, std::uint64_t seed) {
  SimDesign d;
  d.sim_case = c;
  d.n = n;
  d.seed = seed;
  return generate(d);
}

// Direct mixture log-likelihood with Gaussian noise, written out by hand.
double naive_loglik(const Dataset& data, const ParametricModel& m) {
  double total = 0.0;
  for (std::size_t i = 0; i < data.n(); ++i) {
    double mix = 0.0;
    for (std::size_t k = 0; k < m.pi.size(); ++k) {
      double f = m.pi(k);
      for (std::size_t j = 0; j < data.d_x(); ++j) {
        const double sd = std::sqrt(m.components[k].variances(j));
        f *= stats::normal_pdf((data.x[j].values[i] - m.components[k].means(j)) / sd) / sd;
      }
      const double r = data.y(i) - data.u.row(i).dot(m.coeffs.gamma) - m.coeffs.delta(k);
      f *= stats::normal_pdf(r / m.noise.scale) / m.noise.scale;
      mix += f;
    }
    total += std::log(mix);
  }
  return total;
}

ParametricModel permuted(const ParametricModel& m, const Permutation& p) {
  ParametricModel out = m;
  out.pi = apply_permutation(m.pi, p);
  out.coeffs = apply_permutation(m.coeffs, p);
  for (std::size_t k = 0; k < p.size(); ++k) out.components[k] = m.components[p[k]];
  return out;
}

}  // namespace

TEST_CASE("single component collapses to sample moments and OLS") {
  const Dataset data = small_case(SimCase::Case1, 300, 4);
  EMSettings s;
  s.n_starts = 1;
  const EmFit fit = em_fit(data, 1, ParametricNoise::gaussian(), s);
  CHECK(fit.result.pi(0) == doctest::Approx(1.0));
  for (std::size_t j = 0; j < data.d_x(); ++j) {
    const Eigen::Map<const Eigen::VectorXd> x(data.x[j].values.data(), 300);
    const double mean = x.mean();
    const double var = (x.array() - mean).square().mean();
    CHECK(fit.model.components[0].means(j) == doctest::Approx(mean).epsilon(1e-12));
    CHECK(fit.model.components[0].variances(j) == doctest::Approx(var).epsilon(1e-10));
  }
  Eigen::MatrixXd design(300, 3);
  design << data.u, Eigen::VectorXd::Ones(300);
  const Eigen::VectorXd ols = design.colPivHouseholderQr().solve(data.y);
  CHECK(std::abs(fit.result.coeffs.gamma(0) - ols(0)) < 1e-9);
  CHECK(std::abs(fit.result.coeffs.gamma(1) - ols(1)) < 1e-9);
  CHECK(std::abs(fit.result.coeffs.delta(0) - ols(2)) < 1e-9);
}

TEST_CASE("em_loglik on a single standard point") {
  Dataset data;
  data.u = Eigen::MatrixXd::Zero(1, 1);
  data.y = Eigen::VectorXd::Constant(1, 0.7);
  data.x.push_back(XColumn::continuous("x", {0.3}));
  ParametricModel m;
  m.pi = Eigen::VectorXd::Ones(1);
  m.coeffs.gamma = Eigen::VectorXd::Zero(1);
  m.coeffs.delta = Eigen::VectorXd::Constant(1, 0.7);
  m.components.push_back({Eigen::VectorXd::Zero(1), Eigen::VectorXd::Ones(1)});
  m.noise = ParametricNoise::gaussian(1.0);
  const double expected = std::log(stats::normal_pdf(0.3)) + std::log(stats::normal_pdf(0.0));
  CHECK(em_loglik(data, m) == doctest::Approx(expected).epsilon(1e-14));
}

TEST_CASE("em_loglik matches a naive evaluation and ignores labels") {
  const Dataset data = small_case(SimCase::Case3, 200, 8);
  EMSettings s;
  s.n_starts = 2;
  s.max_iter = 20;
  const EmFit fit = em_fit(data, 2, ParametricNoise::gaussian(), s);
  const double direct = naive_loglik(data, fit.model);
  CHECK(em_loglik(data, fit.model) == doctest::Approx(direct).epsilon(1e-12));
  CHECK(em_loglik(data, permuted(fit.model, {1, 0})) == doctest::Approx(direct).epsilon(1e-12));
}

TEST_CASE("EM log-likelihood never decreases") {
  const std::vector<ParametricNoise> families = {
      ParametricNoise::gaussian(), ParametricNoise::asymmetric_laplace(0.75),
      ParametricNoise::asymmetric_normal(0.9)};
  const SimCase cases[] = {SimCase::Case1, SimCase::Case2, SimCase::Case3, SimCase::Case4};
  double worst = 0.0;
  int fits = 0;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    const Dataset data = small_case(cases[seed % 4], 120, 100 + seed);
    EMSettings s;
    s.n_starts = 1;
    s.seed = seed;
    s.max_iter = 200;
    const EmFit fit = em_fit(data, 2 + seed % 2, families[seed % 3], s);
    const auto& traj = fit.result.trajectory;
    for (std::size_t r = 1; r < traj.size(); ++r) worst = std::min(worst, traj[r] - traj[r - 1]);
    ++fits;
  }
  CHECK(fits == 100);
  CHECK(worst >= -1e-10);
}

TEST_CASE("E-step matches a direct Bayes computation") {
  const Dataset data = small_case(SimCase::Case2, 150, 21);
  EMSettings s;
  s.n_starts = 1;
  const EmFit fit = em_fit(data, 2, ParametricNoise::gaussian(), s);
  const Responsibilities t = em_posterior(data, fit.model);
  for (std::size_t i = 0; i < data.n(); ++i) {
    double joint[2];
    for (int k = 0; k < 2; ++k) {
      double f = fit.model.pi(k);
      for (std::size_t j = 0; j < data.d_x(); ++j) {
        const double sd = std::sqrt(fit.model.components[k].variances(j));
        f *= stats::normal_pdf((data.x[j].values[i] - fit.model.components[k].means(j)) / sd) / sd;
      }
      const double r = data.y(i) - data.u.row(i).dot(fit.model.coeffs.gamma) - fit.model.coeffs.delta(k);
      f *= stats::normal_pdf(r / fit.model.noise.scale) / fit.model.noise.scale;
      joint[k] = f;
    }
    CHECK(std::abs(t(i, 0) - joint[0] / (joint[0] + joint[1])) < 1e-12);
    CHECK(std::abs(t(i, 0) + t(i, 1) - 1.0) < 1e-12);
  }
  // pi is the mean of the responsibilities the parameters came from
  CHECK((fit.result.t.colwise().mean().transpose() - fit.result.pi).cwiseAbs().maxCoeff() < 1e-14);
}

TEST_CASE("EM recovers case-1 coefficients at n=2000") {
  int good = 0;
  const int seeds = 10;
  for (int seed = 0; seed < seeds; ++seed) {
    SimDesign d;
    d.seed = 500 + static_cast<std::uint64_t>(seed);
    const Dataset data = generate(d);
    EMSettings s;
    s.seed = static_cast<std::uint64_t>(seed);
    s.n_starts = 3;
    const EmFit fit = em_fit(data, 2, ParametricNoise::gaussian(), s);
    const RegressionCoefficients truth = d.beta_true();
    const Permutation p = align_labels(fit.result.coeffs.delta, truth.delta);
    const Eigen::VectorXd err = apply_permutation(fit.result.coeffs, p).stacked() - truth.stacked();
    if (err.cwiseAbs().maxCoeff() < 0.15) ++good;
    const Eigen::VectorXd pi = apply_permutation(fit.result.pi, p);
    CHECK(std::abs(pi(0) - 0.5) < 0.05);
  }
  CHECK(good >= 9);
}

TEST_CASE("relabelled initialisation relabels the fit") {
  const Dataset data = small_case(SimCase::Case1, 300, 33);
  std::mt19937_64 rng(3);
  std::gamma_distribution<double> g(1.0, 1.0);
  Responsibilities t0(300, 3);
  for (Eigen::Index i = 0; i < 300; ++i) {
    for (Eigen::Index k = 0; k < 3; ++k) t0(i, k) = g(rng);
    t0.row(i) /= t0.row(i).sum();
  }
  const Permutation p = {2, 0, 1};
  EMSettings s;
  s.n_starts = 1;
  s.max_iter = 50;
  const EmFit a = em_fit(data, 3, ParametricNoise::gaussian(), s, t0);
  const EmFit b = em_fit(data, 3, ParametricNoise::gaussian(), s, apply_permutation(t0, p));
  CHECK((apply_permutation(a.result.coeffs.delta, p) - b.result.coeffs.delta).cwiseAbs().maxCoeff() < 1e-9);
  CHECK((apply_permutation(a.result.pi, p) - b.result.pi).cwiseAbs().maxCoeff() < 1e-9);
  CHECK((a.result.coeffs.gamma - b.result.coeffs.gamma).cwiseAbs().maxCoeff() < 1e-9);
}

TEST_CASE("categorical proxies are rejected") {
  MixedDesign md;
  md.n = 100;
  const Dataset data = generate(md);
  try {
    em_fit(data, 2, ParametricNoise::gaussian());
    FAIL("expected UnsupportedColumnType");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::UnsupportedColumnType);
  }
}

TEST_CASE("noise families") {
  CHECK(ParametricNoise::matching(LossSpec::quadratic()).family == NoiseFamily::Gaussian);
  CHECK(ParametricNoise::matching(LossSpec::quantile(0.9)).family == NoiseFamily::AsymmetricLaplace);
  CHECK(ParametricNoise::matching(LossSpec::absolute()).tau == doctest::Approx(0.5));
  CHECK(ParametricNoise::matching(LossSpec::expectile(0.75)).family == NoiseFamily::AsymmetricNormal);
  CHECK_THROWS_AS(ParametricNoise::matching(LossSpec::huber(1.0)), Error);
  // each asymmetric density integrates to one
  for (const ParametricNoise& nz : {ParametricNoise::asymmetric_laplace(0.8, 1.3),
                                    ParametricNoise::asymmetric_normal(0.25, 0.7)}) {
    double total = 0.0;
    const double step = 1e-3;
    for (double r = -300.0; r < 300.0; r += step) total += std::exp(nz.log_density(r)) * step;
    CHECK(total == doctest::Approx(1.0).epsilon(1e-6));
  }
}
