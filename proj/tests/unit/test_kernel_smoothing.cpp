#include <doctest.h>

#include <boost/math/distributions/normal.hpp>
#include <boost/math/distributions/students_t.hpp>

#include <cmath>
#include <numbers>
#include <random>

#include "semimix/kernel_smoothing.hpp"
#include "semimix/parallel_kernels.hpp"
#include "semimix/stats.hpp"

using namespace semimix;

namespace {

GridFunction sampled(double lo, double hi, std::size_t size, auto&& f) {
  GridFunction out;
  for (std::size_t g = 0; g < size; ++g) {
    const double a = lo + (hi - lo) * static_cast<double>(g) / static_cast<double>(size - 1);
    out.grid.push_back(a);
    out.values.push_back(f(a));
  }
  return out;
}

}  // namespace

TEST_CASE("kernel_density_at") {
  const UnivariateDensityRep one = ContinuousKde{{0.0}, {1.0}, 1.0};
  CHECK(kernel_density_at(one, 0.0) == doctest::Approx(0.3989422804014327).epsilon(1e-14));

  const UnivariateDensityRep pmf = CategoricalPmf{{0.3, 0.7}};
  CHECK(kernel_density_at(pmf, 1.0) == doctest::Approx(0.7));
  try {
    kernel_density_at(pmf, 2.0);
    FAIL("expected InvalidLevel");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::InvalidLevel);
  }

  const UnivariateDensityRep two = ContinuousKde{{-1.0, 1.0}, {0.5, 0.5}, 1.0};
  const double phi1 = std::exp(-0.5) / std::sqrt(2.0 * std::numbers::pi);
  CHECK(kernel_density_at(two, 0.0) == doctest::Approx(phi1).epsilon(1e-14));
  CHECK(kernel_density_at(two, 0.0) == doctest::Approx(0.24197).epsilon(1e-5));
  CHECK(kernel_density_at(two, 40.0) == 0.0);  // underflows in double
}

TEST_CASE("select_bandwidth") {
  CHECK(select_bandwidth(100000, KernelConfig::fixed_power(-0.2)) ==
        doctest::Approx(0.1).epsilon(1e-12));
  CHECK(select_bandwidth(1, KernelConfig::explicit_bandwidth(0.5)) == 0.5);
  CHECK(select_bandwidth(32, KernelConfig::fixed_power()) == doctest::Approx(0.5).epsilon(1e-12));
  CHECK_THROWS_AS(select_bandwidth(1, KernelConfig::fixed_power()), Error);
  CHECK_THROWS_AS(select_bandwidth(10, KernelConfig::explicit_bandwidth(-1.0)), Error);
}

TEST_CASE("kernel estimate integrates to one on its grid") {
  std::mt19937_64 rng(1);
  std::normal_distribution<double> nd;
  ContinuousKde rep;
  rep.h = 0.3;
  std::gamma_distribution<double> gd(1.0, 1.0);
  double total = 0.0;
  for (int i = 0; i < 200; ++i) {
    rep.support.push_back(nd(rng) * 2.0);
    rep.weights.push_back(gd(rng));
    total += rep.weights.back();
  }
  for (double& w : rep.weights) w /= total;
  const UniformGrid grid = UniformGrid::covering(rep.support, rep.h);
  CHECK(grid.size >= 256);
  std::vector<double> values;
  for (double a : grid.points()) values.push_back(kernel_density_at(rep, a));
  const double integral = trapezoid(grid.points(), values);
  CHECK(integral >= 0.995);
  CHECK(integral <= 1.005);
  const SmoothedLogDensity s = smooth_log_density(rep);
  CHECK(s.mass() == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(rep.cdf(rep.quantile(0.3)) == doctest::Approx(0.3).epsilon(1e-10));
}

TEST_CASE("log_smooth of a standard normal is log-quadratic") {
  const double h = 0.3;
  const auto f = sampled(-10.0, 10.0, 2001, [](double a) { return stats::normal_pdf(a); });
  const GridFunction nf = log_smooth(f, h);
  for (std::size_t g = 0; g < nf.grid.size(); ++g) {
    const double a = nf.grid[g];
    if (std::abs(a) > 10.0 - 8.0 * h) continue;
    const double expected = -0.5 * (a * a + h * h) - 0.5 * std::log(2.0 * std::numbers::pi);
    CHECK(std::log(nf.values[g]) == doctest::Approx(expected).epsilon(1e-9));
  }
}

TEST_CASE("log_smooth approaches the identity as h shrinks") {
  const auto f = sampled(-10.0, 10.0, 4001, [](double a) { return stats::normal_pdf(a); });
  double previous = INFINITY;
  for (double h : {0.5, 0.25, 0.1}) {
    const GridFunction nf = log_smooth(f, h);
    double sup = 0.0;
    for (std::size_t g = 0; g < nf.grid.size(); ++g) {
      if (std::abs(nf.grid[g]) > 5.0) continue;
      sup = std::max(sup, std::abs(nf.values[g] - f.values[g]));
    }
    CHECK(sup < previous);
    previous = sup;
  }
  CHECK(previous < 0.01);
}

TEST_CASE("log_smooth preserves constants in the interior") {
  const double h = 0.4;
  const auto f = sampled(-10.0, 10.0, 2001, [](double) { return 0.05; });
  const GridFunction nf = log_smooth(f, h);
  for (std::size_t g = 0; g < nf.grid.size(); ++g) {
    if (std::abs(nf.grid[g]) > 10.0 - 9.0 * h) continue;
    CHECK(std::abs(nf.values[g] - 0.05) < 1e-8);
  }
}

TEST_CASE("smoothing a kernel estimate matches direct quadrature of the true integral") {
  // f is a 3-point kernel estimate; the reference integrates
  // K_h(a - b) ln f(b) with a fine midpoint rule over a wide range.
  // Points stay inside the data range, where grid truncation is negligible.
  ContinuousKde rep{{-0.7, 0.2, 1.5}, {0.2, 0.5, 0.3}, 0.4};
  const SmoothedLogDensity s = smooth_log_density(rep);
  for (double a : {-0.7, 0.0, 0.2, 1.0, 1.5}) {
    double ref = 0.0;
    const int steps = 400000;
    const double lo = a - 12.0 * rep.h, hi = a + 12.0 * rep.h;
    const double db = (hi - lo) / steps;
    for (int j = 0; j < steps; ++j) {
      const double b = lo + (j + 0.5) * db;
      ref += gaussian_kernel(a - b, rep.h) * std::log(kernel_density_at(rep, b)) * db;
    }
    CHECK(s.smoothed_log_at(a) == doctest::Approx(ref).epsilon(1e-7));
  }
}

TEST_CASE("parallel kernels agree with the serial reference") {
  std::mt19937_64 rng(9);
  std::normal_distribution<double> nd;
  std::vector<double> points, weights;
  for (int i = 0; i < 3000; ++i) {
    points.push_back(nd(rng) * 3.0);
    weights.push_back(std::abs(nd(rng)));
  }
  const double h = 0.2;
  const UniformGrid grid = UniformGrid::covering(points, h);

  const auto kp = kernels::kernel_matrix(points, grid, h);
  const auto ks = kernels::serial::kernel_matrix(points, grid, h);
  CHECK((kp - ks).cwiseAbs().maxCoeff() < 1e-10 * ks.cwiseAbs().maxCoeff());

  std::vector<double> dp(grid.size), ds(grid.size);
  kernels::grid_density(points, weights, grid, h, dp);
  kernels::serial::grid_density(points, weights, grid, h, ds);
  for (std::size_t g = 0; g < grid.size; ++g) CHECK(dp[g] == doctest::Approx(ds[g]).epsilon(1e-10));

  std::vector<double> wl(grid.size);
  for (std::size_t g = 0; g < grid.size; ++g) wl[g] = grid.trapezoid_weight(g) * std::log(ds[g] + 1e-300);
  std::vector<double> sp(points.size()), ss(points.size());
  kernels::smooth_at(points, grid, h, wl, sp);
  kernels::serial::smooth_at(points, grid, h, wl, ss);
  for (std::size_t i = 0; i < points.size(); ++i) CHECK(sp[i] == doctest::Approx(ss[i]).epsilon(1e-10));

  Eigen::MatrixXd scores = Eigen::MatrixXd::Random(500, 3) * 50.0;
  Eigen::MatrixXd tp, ts;
  const double lp = kernels::normalize_log_scores(scores, tp);
  const double ls = kernels::serial::normalize_log_scores(scores, ts);
  CHECK(lp == doctest::Approx(ls).epsilon(1e-13));
  CHECK((tp - ts).cwiseAbs().maxCoeff() < 1e-14);
}

TEST_CASE("normal quantile and Student density against boost") {
  boost::math::normal_distribution<double> normal;
  for (double p : {1e-12, 1e-5, 0.01, 0.1, 0.25, 0.5, 0.75, 0.9, 0.975, 0.999999}) {
    const double expected = boost::math::quantile(normal, p);
    CHECK(std::abs(stats::normal_quantile(p) - expected) < 1e-12 * (1.0 + std::abs(expected)));
  }
  boost::math::students_t_distribution<double> t3(3.0);
  for (double t : {-4.0, -0.5, 0.0, 1.3, 10.0}) {
    CHECK(stats::student_t_pdf(t, 3.0) == doctest::Approx(boost::math::pdf(t3, t)).epsilon(1e-12));
  }
}
