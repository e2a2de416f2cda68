#include "semimix/kernel_smoothing.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

#include "semimix/parallel_kernels.hpp"
#include "semimix/stats.hpp"

namespace semimix {

double select_bandwidth(std::size_t n, const KernelConfig& rule) {
  double h = 0.0;
  if (rule.rule == KernelConfig::Rule::Explicit) {
    h = rule.value;
  } else {
    if (n < 2) throw Error(ErrorKind::InvalidArgument, "bandwidth rule needs n >= 2");
    h = std::pow(static_cast<double>(n), rule.value);
  }
  if (!(h > 0.0) || !std::isfinite(h)) {
    throw Error(ErrorKind::InvalidArgument, "bandwidth must be positive");
  }
  return h;
}

double gaussian_kernel(double a, double h) {
  const double z = a / h;
  return std::exp(-0.5 * z * z) / (h * std::sqrt(2.0 * std::numbers::pi));
}

void validate(const ContinuousKde& rep) {
  if (rep.support.empty() || rep.support.size() != rep.weights.size()) {
    throw Error(ErrorKind::InvalidArgument, "kernel estimate needs matching support and weights");
  }
  if (!(rep.h > 0.0)) throw Error(ErrorKind::InvalidArgument, "bandwidth must be positive");
  double total = 0.0;
  for (double w : rep.weights) {
    if (w < 0.0) throw Error(ErrorKind::InvalidArgument, "negative kernel weight");
    total += w;
  }
  if (std::abs(total - 1.0) > 1e-10) {
    throw Error(ErrorKind::InvalidArgument, "kernel weights do not sum to one");
  }
}

void validate(const CategoricalPmf& rep) {
  double total = 0.0;
  for (double p : rep.probs) {
    if (p < 0.0) throw Error(ErrorKind::InvalidArgument, "negative probability");
    total += p;
  }
  if (rep.probs.empty() || std::abs(total - 1.0) > 1e-10) {
    throw Error(ErrorKind::InvalidArgument, "probabilities do not sum to one");
  }
}

double kernel_density_at(const ContinuousKde& rep, double a) {
  double s = 0.0;
  for (std::size_t i = 0; i < rep.support.size(); ++i) {
    s += rep.weights[i] * gaussian_kernel(a - rep.support[i], rep.h);
  }
  return s;
}

double kernel_density_at(const CategoricalPmf& rep, int level) {
  if (level < 0 || static_cast<std::size_t>(level) >= rep.probs.size()) {
    throw Error(ErrorKind::InvalidLevel, "level " + std::to_string(level) + " out of range");
  }
  return rep.probs[static_cast<std::size_t>(level)];
}

double kernel_density_at(const UnivariateDensityRep& rep, double a) {
  if (const auto* kde = std::get_if<ContinuousKde>(&rep)) return kernel_density_at(*kde, a);
  const double level = std::round(a);
  if (level != a) throw Error(ErrorKind::InvalidLevel, "categorical level must be an integer");
  return kernel_density_at(std::get<CategoricalPmf>(rep), static_cast<int>(level));
}

double ContinuousKde::mean() const {
  double m = 0.0;
  for (std::size_t i = 0; i < support.size(); ++i) m += weights[i] * support[i];
  return m;
}

double ContinuousKde::cdf(double a) const {
  double c = 0.0;
  for (std::size_t i = 0; i < support.size(); ++i) {
    c += weights[i] * stats::normal_cdf((a - support[i]) / h);
  }
  return c;
}

namespace {

template <typename F>
double bisect_decreasing(F&& f, double lo, double hi) {
  for (int it = 0; it < 200 && hi - lo > 1e-13 * (1.0 + std::abs(lo) + std::abs(hi)); ++it) {
    const double mid = 0.5 * (lo + hi);
    if (f(mid) > 0.0) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return 0.5 * (lo + hi);
}

}  // namespace

double ContinuousKde::quantile(double tau) const {
  const auto [mn, mx] = std::minmax_element(support.begin(), support.end());
  return bisect_decreasing([&](double m) { return tau - cdf(m); }, *mn - 40.0 * h,
                           *mx + 40.0 * h);
}

double ContinuousKde::expectile(double tau) const {
  const auto [mn, mx] = std::minmax_element(support.begin(), support.end());
  auto balance = [&](double m) {
    double upper = 0.0, lower = 0.0;
    for (std::size_t i = 0; i < support.size(); ++i) {
      const double z = (m - support[i]) / h;
      upper += weights[i] * h * stats::normal_upper_partial(z);
      lower += weights[i] * h * stats::normal_lower_partial(z);
    }
    return tau * upper - (1.0 - tau) * lower;
  };
  return bisect_decreasing(balance, *mn - 40.0 * h, *mx + 40.0 * h);
}

UniformGrid UniformGrid::covering(std::span<const double> points, double h, std::size_t size,
                                  double margin) {
  if (points.empty()) throw Error(ErrorKind::InvalidArgument, "grid needs at least one point");
  if (size < 2) throw Error(ErrorKind::InvalidArgument, "grid needs at least two nodes");
  const auto [mn, mx] = std::minmax_element(points.begin(), points.end());
  UniformGrid grid;
  grid.lo = *mn - margin * h;
  const double hi = *mx + margin * h;
  const double max_step = kMaxGridStepBandwidths * h;
  grid.size = std::max(size, static_cast<std::size_t>(std::ceil((hi - grid.lo) / max_step)) + 1);
  grid.step = (hi - grid.lo) / static_cast<double>(grid.size - 1);
  return grid;
}

std::vector<double> UniformGrid::points() const {
  std::vector<double> out(size);
  for (std::size_t g = 0; g < size; ++g) out[g] = point(g);
  return out;
}

SmoothedLogDensity::SmoothedLogDensity(UniformGrid grid, std::span<const double> density,
                                       double h)
    : grid_(grid), h_(h), log_f_(grid.size), weighted_log_f_(grid.size) {
  if (density.size() != grid.size) {
    throw Error(ErrorKind::LengthMismatch, "density values do not match the grid");
  }
  mass_ = 0.0;
  for (std::size_t g = 0; g < grid.size; ++g) mass_ += grid.trapezoid_weight(g) * density[g];
  if (!(mass_ > 0.0)) throw Error(ErrorKind::InvalidArgument, "density has no mass on the grid");
  const double log_mass = std::log(mass_);
  for (std::size_t g = 0; g < grid.size; ++g) {
    const double lf = density[g] > 0.0 ? std::log(density[g]) - log_mass : kLogDensityFloor;
    log_f_[g] = std::max(lf, kLogDensityFloor);
    weighted_log_f_[g] = grid.trapezoid_weight(g) * log_f_[g];
  }
}

double SmoothedLogDensity::smoothed_log_at(double a) const {
  double out = 0.0;
  kernels::smooth_at(std::span<const double>(&a, 1), grid_, h_, weighted_log_f_,
                     std::span<double>(&out, 1));
  return out;
}

double SmoothedLogDensity::smoothed_at(double a) const { return std::exp(smoothed_log_at(a)); }

SmoothedLogDensity smooth_log_density(const ContinuousKde& rep, std::size_t grid_size) {
  validate(rep);
  const UniformGrid grid = UniformGrid::covering(rep.support, rep.h, grid_size);
  std::vector<double> values(grid.size);
  kernels::grid_density(rep.support, rep.weights, grid, rep.h, values);
  return SmoothedLogDensity(grid, values, rep.h);
}

double trapezoid(std::span<const double> grid, std::span<const double> values) {
  double total = 0.0;
  for (std::size_t g = 1; g < grid.size(); ++g) {
    total += 0.5 * (grid[g] - grid[g - 1]) * (values[g] + values[g - 1]);
  }
  return total;
}

GridFunction log_smooth(const GridFunction& density, double h) {
  const std::size_t size = density.grid.size();
  if (size < 2 || density.values.size() != size) {
    throw Error(ErrorKind::InvalidArgument, "log_smooth needs a sampled density");
  }
  for (std::size_t g = 1; g < size; ++g) {
    if (!(density.grid[g] > density.grid[g - 1])) {
      throw Error(ErrorKind::InvalidArgument, "grid must be strictly increasing");
    }
  }
  std::vector<double> weighted(size);
  for (std::size_t g = 0; g < size; ++g) {
    const double left = g > 0 ? density.grid[g] - density.grid[g - 1] : 0.0;
    const double right = g + 1 < size ? density.grid[g + 1] - density.grid[g] : 0.0;
    const double lf = density.values[g] > 0.0 ? std::log(density.values[g]) : kLogDensityFloor;
    weighted[g] = 0.5 * (left + right) * std::max(lf, kLogDensityFloor);
  }
  GridFunction out{density.grid, std::vector<double>(size)};
  for (std::size_t g = 0; g < size; ++g) {
    double s = 0.0;
    for (std::size_t j = 0; j < size; ++j) {
      s += gaussian_kernel(density.grid[g] - density.grid[j], h) * weighted[j];
    }
    out.values[g] = std::exp(s);
  }
  return out;
}

GridFunction log_smooth(const ContinuousKde& rep, std::size_t grid_size) {
  const SmoothedLogDensity smoothed = smooth_log_density(rep, grid_size);
  GridFunction out{smoothed.grid().points(), std::vector<double>(smoothed.grid().size)};
  const auto pts = out.grid;
  kernels::smooth_at(pts, smoothed.grid(), smoothed.bandwidth(),
                     smoothed.weighted_log_density(), out.values);
  for (double& v : out.values) v = std::exp(v);
  return out;
}

}  // namespace semimix
