#include <doctest.h>

#include <boost/math/distributions/normal.hpp>
#include <boost/math/tools/roots.hpp>

#include <algorithm>
#include <cmath>
#include <random>

#include "semimix/simulation.hpp"

using namespace semimix;

namespace {

Eigen::VectorXd noise_of(const Dataset& data, const RegressionCoefficients& beta) {
  Eigen::VectorXd eps(data.n());
  for (std::size_t i = 0; i < data.n(); ++i) {
    eps(i) = data.y(i) - data.u.row(i).dot(beta.gamma) - beta.delta((*data.true_z)[i]);
  }
  return eps;
}

}  // namespace

TEST_CASE("xi calibration for Gaussian proxies") {
  const double xi = calibrate_xi(EtaFamily::Gaussian, 0.10);
  boost::math::normal_distribution<double> normal;
  CHECK(std::abs(xi - boost::math::quantile(normal, 0.90) / 2.0) < 1e-12);
  CHECK(xi == doctest::Approx(0.6408).epsilon(1e-4));
  CHECK(calibrate_xi(EtaFamily::Gaussian, 0.5) < 1e-12);
  const double achieved = x_rule_error(EtaFamily::Gaussian, xi, 1000000, 77);
  CHECK(std::abs(achieved - 0.10) < 0.003);
}

TEST_CASE("xi calibration for Student proxies") {
  const double xi = calibrate_xi(EtaFamily::Student3, 0.10);
  CHECK(xi > 0.0);
  const double achieved = x_rule_error(EtaFamily::Student3, xi, 1000000, 12345);
  CHECK(achieved >= 0.098);
  CHECK(achieved <= 0.102);
}

TEST_CASE("c_tau") {
  boost::math::normal_distribution<double> normal;
  CHECK(std::abs(compute_c_tau(LossSpec::quantile(0.75)) - boost::math::quantile(normal, 0.75)) < 1e-12);
  CHECK(compute_c_tau(LossSpec::quantile(0.75)) == doctest::Approx(0.6745).epsilon(1e-4));
  CHECK(std::abs(compute_c_tau(LossSpec::quantile(0.5))) < 1e-14);
  CHECK(std::abs(compute_c_tau(LossSpec::expectile(0.5))) < 1e-10);
  // tau-expectile e solves tau E(Z - e)_+ = (1 - tau) E(e - Z)_+, written
  // here through boost's cdf and pdf and solved by TOMS 748.
  for (double tau : {0.75, 0.9}) {
    auto identity = [&](double e) {
      const double upper = boost::math::pdf(normal, e) - e * boost::math::cdf(complement(normal, e));
      const double lower = e * boost::math::cdf(normal, e) + boost::math::pdf(normal, e);
      return tau * upper - (1.0 - tau) * lower;
    };
    std::uintmax_t iters = 200;
    const auto root = boost::math::tools::toms748_solve(identity, -5.0, 5.0,
                                                        boost::math::tools::eps_tolerance<double>(50), iters);
    const double expected = 0.5 * (root.first + root.second);
    CHECK(std::abs(compute_c_tau(LossSpec::expectile(tau)) - expected) < 1e-10);
  }
}

TEST_CASE("generation is deterministic and balanced") {
  SimDesign d;
  d.n = 4000;
  d.seed = 5;
  const Dataset a = generate(d), b = generate(d);
  CHECK(a.y == b.y);
  CHECK(a.u == b.u);
  CHECK(*a.true_z == *b.true_z);
  CHECK(a.x[2].values == b.x[2].values);
  const double ones = std::count(a.true_z->begin(), a.true_z->end(), 1);
  CHECK(std::abs(ones / 4000.0 - 0.5) < 3.0 * std::sqrt(0.25 / 4000.0));
  d.seed = 6;
  CHECK(generate(d).y != a.y);
  CHECK(a.d_x() == 4);
  CHECK(a.d_u() == 2);
}

TEST_CASE("class means and noise moments at n = 1e6") {
  SimDesign d;
  d.n = 1000000;
  d.seed = 99;
  const Dataset data = generate(d);
  double sum = 0.0;
  std::size_t count = 0;
  for (std::size_t i = 0; i < data.n(); ++i) {
    if ((*data.true_z)[i] != 0) continue;
    sum += data.x[0].values[i];
    ++count;
  }
  CHECK(std::abs(sum / static_cast<double>(count) + d.separation()) < 0.005);

  d.sim_case = SimCase::Case2;
  const Dataset c2 = generate(d);
  CHECK(std::abs(noise_of(c2, d.beta_true()).mean()) < 0.005);

  d.sim_case = SimCase::Asym;
  d.asym_target = LossSpec::quantile(0.75);
  const Dataset asym = generate(d);
  Eigen::VectorXd eps = noise_of(asym, d.beta_true());
  // eps ~ N(-c_tau, 1), so its tau-quantile sits at zero
  std::vector<double> sorted(eps.data(), eps.data() + eps.size());
  const auto q = sorted.begin() + static_cast<std::ptrdiff_t>(0.75 * sorted.size());
  std::nth_element(sorted.begin(), q, sorted.end());
  CHECK(std::abs(*q) < 0.01);
  CHECK(std::abs(eps.mean() + compute_c_tau(d.asym_target)) < 0.005);
}

TEST_CASE("Bayes rules") {
  SimDesign d;
  const BayesRules rules(d);
  const std::array<double, 4> axis = {0.3, -0.3, 1.1, -1.1};
  const Eigen::Vector2d r = rules.x_rule(axis);
  CHECK(r(0) == doctest::Approx(0.5).epsilon(1e-14));

  std::mt19937_64 rng(8);
  std::normal_distribution<double> nd;
  for (int draw = 0; draw < 1000; ++draw) {
    std::array<double, 4> x{};
    double s = 0.0;
    for (double& v : x) {
      v = nd(rng);
      s += v;
    }
    const Eigen::Vector2d w = rules.x_rule(x);
    CHECK((w(1) > 0.5) == (s > 0.0));
    // direct density ratio
    double l0 = 0.0, l1 = 0.0;
    for (double v : x) {
      l0 += -0.5 * std::pow(v + d.separation(), 2);
      l1 += -0.5 * std::pow(v - d.separation(), 2);
    }
    CHECK(w(1) == doctest::Approx(1.0 / (1.0 + std::exp(l0 - l1))).epsilon(1e-12));
  }

  // using Y as well classifies better than X alone
  d.n = 100000;
  d.seed = 3;
  const Dataset data = generate(d);
  double agree_x = 0.0, agree_xy = 0.0;
  for (std::size_t i = 0; i < data.n(); ++i) {
    const std::array<double, 4> x = {data.x[0].values[i], data.x[1].values[i], data.x[2].values[i],
                                     data.x[3].values[i]};
    const std::array<double, 2> u = {data.u(i, 0), data.u(i, 1)};
    const int z = (*data.true_z)[i];
    agree_x += rules.x_rule(x)(z);
    agree_xy += rules.xy_rule(x, u, data.y(i))(z);
  }
  CHECK(agree_xy > agree_x);
}

TEST_CASE("design parsing and validation") {
  CHECK(parse_sim_case("case3") == SimCase::Case3);
  CHECK(parse_sim_case("robust-student3") == SimCase::RobustStudent3);
  CHECK(to_string(SimCase::Asym) == "asym");
  CHECK_THROWS_AS(parse_sim_case("case9"), Error);
  SimDesign d;
  d.n = 10;
  CHECK_THROWS_AS(generate(d), Error);
}

TEST_CASE("mixed design") {
  MixedDesign md;
  md.n = 3000;
  md.seed = 1;
  const Dataset data = generate(md);
  CHECK(data.d_x() == 4);
  CHECK(data.x[0].is_continuous());
  CHECK(!data.x[2].is_continuous());
  CHECK(data.x[2].cardinality == 3);
  CHECK(data.x[3].cardinality == 2);
  // level frequencies of class 0 in the first categorical column
  std::array<double, 3> counts{};
  double total = 0.0;
  for (std::size_t i = 0; i < data.n(); ++i) {
    if ((*data.true_z)[i] != 0) continue;
    counts[static_cast<std::size_t>(data.x[2].levels[i])] += 1.0;
    total += 1.0;
  }
  const auto probs = md.level_probs(0);
  for (int l = 0; l < 3; ++l) CHECK(std::abs(counts[l] / total - probs[0][l]) < 0.05);
}
