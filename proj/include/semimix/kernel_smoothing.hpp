#pragma once

// Gaussian kernel density estimates and the smoothing operators used by the
// maximum smoothed likelihood fit:
//   (S g)(a) = int K_h(a - b) g(b) db,    (N f)(a) = exp{(S ln f)(a)}.
// Integrals are trapezoid sums on a uniform grid covering the data with a
// margin of kGridMarginBandwidths * h on both sides. The grid gets more nodes
// than requested when needed to keep the spacing at most h / 2; at that
// spacing the trapezoid error on Gaussian-smooth integrands is far below
// double precision, so values do not depend on where the grid sits.

#include <cstddef>
#include <span>
#include <variant>
#include <vector>

#include "semimix/error.hpp"

namespace semimix {

inline constexpr std::size_t kDefaultGridSize = 512;
inline constexpr double kGridMarginBandwidths = 8.0;
inline constexpr double kMaxGridStepBandwidths = 0.5;
inline constexpr double kLogDensityFloor = -700.0;

struct KernelConfig {
  enum class Rule { FixedPower, Explicit };
  Rule rule = Rule::FixedPower;
  double value = -0.2;  // exponent for FixedPower, h for Explicit

  static KernelConfig fixed_power(double exponent = -0.2) { return {Rule::FixedPower, exponent}; }
  static KernelConfig explicit_bandwidth(double h) { return {Rule::Explicit, h}; }
};

double select_bandwidth(std::size_t n, const KernelConfig& rule);

double gaussian_kernel(double a, double h);

struct ContinuousKde {
  std::vector<double> support;
  std::vector<double> weights;  // nonnegative, sum to one
  double h = 1.0;

  double mean() const;
  double cdf(double a) const;
  double quantile(double tau) const;
  double expectile(double tau) const;
};

struct CategoricalPmf {
  std::vector<double> probs;
};

using UnivariateDensityRep = std::variant<ContinuousKde, CategoricalPmf>;

// Density (continuous) or mass (categorical, a is the level index).
double kernel_density_at(const UnivariateDensityRep& rep, double a);
double kernel_density_at(const ContinuousKde& rep, double a);
double kernel_density_at(const CategoricalPmf& rep, int level);

void validate(const ContinuousKde& rep);
void validate(const CategoricalPmf& rep);

struct UniformGrid {
  double lo = 0.0;
  double step = 1.0;
  std::size_t size = 0;

  // Covers [min - margin*h, max + margin*h] with at least `size` nodes.
  static UniformGrid covering(std::span<const double> points, double h,
                              std::size_t size = kDefaultGridSize,
                              double margin = kGridMarginBandwidths);
  double point(std::size_t g) const { return lo + step * static_cast<double>(g); }
  double hi() const { return point(size - 1); }
  double trapezoid_weight(std::size_t g) const {
    return (g == 0 || g + 1 == size) ? 0.5 * step : step;
  }
  std::vector<double> points() const;
};

struct GridFunction {
  std::vector<double> grid;
  std::vector<double> values;
};

// ln f on a grid, with f rescaled so its trapezoid integral is one, ready
// to be smoothed at arbitrary points.
class SmoothedLogDensity {
 public:
  SmoothedLogDensity() = default;
  SmoothedLogDensity(UniformGrid grid, std::span<const double> density, double h);

  const UniformGrid& grid() const { return grid_; }
  double bandwidth() const { return h_; }
  std::span<const double> log_density() const { return log_f_; }
  // trapezoid weight times ln f at each grid point
  std::span<const double> weighted_log_density() const { return weighted_log_f_; }
  // trapezoid integral of the density before rescaling
  double mass() const { return mass_; }

  // (S ln f)(a) and (N f)(a).
  double smoothed_log_at(double a) const;
  double smoothed_at(double a) const;

 private:
  UniformGrid grid_;
  double h_ = 1.0;
  double mass_ = 1.0;
  std::vector<double> log_f_;
  std::vector<double> weighted_log_f_;
};

SmoothedLogDensity smooth_log_density(const ContinuousKde& rep,
                                      std::size_t grid_size = kDefaultGridSize);

// N f on the grid of a density given by grid values, and on the data-covering
// grid of a kernel estimate.
GridFunction log_smooth(const GridFunction& density, double h);
GridFunction log_smooth(const ContinuousKde& rep, std::size_t grid_size = kDefaultGridSize);

// Trapezoid integral of a function sampled on a strictly increasing grid.
double trapezoid(std::span<const double> grid, std::span<const double> values);

}  // namespace semimix
