#include "semimix/parallel_kernels.hpp"

#include <omp.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <vector>

namespace semimix::kernels {

namespace {

// Below this many kernel evaluations a parallel region costs more than it saves.
constexpr long kParallelWork = 1L << 15;

// Fills out_g = K_h(point - grid_g) with two multiplications per grid point:
// consecutive Gaussian ratios form a geometric sequence with factor exp(-step^2/h^2).
void gaussian_row(double point, const UniformGrid& grid, double h, double* out) {
  const std::size_t size = grid.size;
  const double step = grid.step;
  const double inv_h2 = 1.0 / (h * h);
  const double norm = 1.0 / (h * std::sqrt(2.0 * std::numbers::pi));
  const double d = point - grid.lo;
  const double c_real = std::clamp(std::round(d / step), 0.0, static_cast<double>(size - 1));
  const auto c = static_cast<std::size_t>(c_real);
  const double off = d - c_real * step;
  const double decay = std::exp(-step * step * inv_h2);
  constexpr double kTiny = 1e-300;

  const double vc = std::exp(-0.5 * off * off * inv_h2);
  out[c] = vc * norm;

  double v = vc;
  double q = std::exp((off * step - 0.5 * step * step) * inv_h2);
  std::size_t g = c + 1;
  for (; g < size && v > kTiny; ++g) {
    v *= q;
    q *= decay;
    out[g] = v * norm;
  }
  for (; g < size; ++g) out[g] = 0.0;

  v = vc;
  q = std::exp((-off * step - 0.5 * step * step) * inv_h2);
  std::size_t gg = c;
  for (; gg > 0 && v > kTiny; --gg) {
    v *= q;
    q *= decay;
    out[gg - 1] = v * norm;
  }
  for (; gg > 0; --gg) out[gg - 1] = 0.0;
}

int thread_budget(long work) { return work >= kParallelWork ? omp_get_max_threads() : 1; }

}  // namespace

KernelMatrix kernel_matrix(std::span<const double> points, const UniformGrid& grid, double h) {
  const auto n = static_cast<Eigen::Index>(points.size());
  const auto g = static_cast<Eigen::Index>(grid.size);
  KernelMatrix k(n, g);
  const long work = static_cast<long>(n) * g;
#pragma omp parallel for schedule(static) num_threads(thread_budget(work))
  for (Eigen::Index i = 0; i < n; ++i) {
    gaussian_row(points[static_cast<std::size_t>(i)], grid, h, k.row(i).data());
  }
  return k;
}

void grid_density(std::span<const double> points, std::span<const double> weights,
                  const UniformGrid& grid, double h, std::span<double> out) {
  const std::size_t n = points.size();
  const std::size_t size = grid.size;
  const long work = static_cast<long>(n * size);
  const int threads = thread_budget(work);
  std::vector<std::vector<double>> partial(static_cast<std::size_t>(threads));
#pragma omp parallel num_threads(threads)
  {
    const auto tid = static_cast<std::size_t>(omp_get_thread_num());
    std::vector<double> acc(size, 0.0);
    std::vector<double> row(size);
#pragma omp for schedule(static)
    for (std::size_t i = 0; i < n; ++i) {
      if (weights[i] == 0.0) continue;
      gaussian_row(points[i], grid, h, row.data());
      const double w = weights[i];
      for (std::size_t g = 0; g < size; ++g) acc[g] += w * row[g];
    }
    partial[tid] = std::move(acc);
  }
  std::fill(out.begin(), out.end(), 0.0);
  for (const auto& acc : partial) {
    if (acc.empty()) continue;
    for (std::size_t g = 0; g < size; ++g) out[g] += acc[g];
  }
}

void smooth_at(std::span<const double> points, const UniformGrid& grid, double h,
               std::span<const double> weighted_log_f, std::span<double> out) {
  const std::size_t n = points.size();
  const std::size_t size = grid.size;
  const long work = static_cast<long>(n * size);
#pragma omp parallel num_threads(thread_budget(work))
  {
    std::vector<double> row(size);
#pragma omp for schedule(static)
    for (std::size_t i = 0; i < n; ++i) {
      gaussian_row(points[i], grid, h, row.data());
      double s = 0.0;
      for (std::size_t g = 0; g < size; ++g) s += row[g] * weighted_log_f[g];
      out[i] = s;
    }
  }
}

double normalize_log_scores(const Eigen::MatrixXd& scores, Eigen::MatrixXd& t) {
  const Eigen::Index n = scores.rows();
  const Eigen::Index k = scores.cols();
  t.resize(n, k);
  std::vector<double> row_ll(static_cast<std::size_t>(n));
  const long work = static_cast<long>(n) * k * 16;
#pragma omp parallel for schedule(static) num_threads(thread_budget(work))
  for (Eigen::Index i = 0; i < n; ++i) {
    const double m = scores.row(i).maxCoeff();
    double s = 0.0;
    for (Eigen::Index kk = 0; kk < k; ++kk) {
      const double e = std::exp(scores(i, kk) - m);
      t(i, kk) = e;
      s += e;
    }
    t.row(i) /= s;
    row_ll[static_cast<std::size_t>(i)] = m + std::log(s);
  }
  double total = 0.0;
  for (double v : row_ll) total += v;
  return total;
}

namespace serial {

KernelMatrix kernel_matrix(std::span<const double> points, const UniformGrid& grid, double h) {
  KernelMatrix k(points.size(), grid.size);
  for (std::size_t i = 0; i < points.size(); ++i) {
    for (std::size_t g = 0; g < grid.size; ++g) {
      k(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(g)) =
          gaussian_kernel(points[i] - grid.point(g), h);
    }
  }
  return k;
}

void grid_density(std::span<const double> points, std::span<const double> weights,
                  const UniformGrid& grid, double h, std::span<double> out) {
  for (std::size_t g = 0; g < grid.size; ++g) {
    double s = 0.0;
    for (std::size_t i = 0; i < points.size(); ++i) {
      s += weights[i] * gaussian_kernel(points[i] - grid.point(g), h);
    }
    out[g] = s;
  }
}

void smooth_at(std::span<const double> points, const UniformGrid& grid, double h,
               std::span<const double> weighted_log_f, std::span<double> out) {
  for (std::size_t i = 0; i < points.size(); ++i) {
    double s = 0.0;
    for (std::size_t g = 0; g < grid.size; ++g) {
      s += gaussian_kernel(points[i] - grid.point(g), h) * weighted_log_f[g];
    }
    out[i] = s;
  }
}

double normalize_log_scores(const Eigen::MatrixXd& scores, Eigen::MatrixXd& t) {
  t.resize(scores.rows(), scores.cols());
  double total = 0.0;
  for (Eigen::Index i = 0; i < scores.rows(); ++i) {
    const double m = scores.row(i).maxCoeff();
    const Eigen::RowVectorXd e = (scores.row(i).array() - m).exp().matrix();
    const double s = e.sum();
    t.row(i) = e / s;
    total += m + std::log(s);
  }
  return total;
}

}  // namespace serial

}  // namespace semimix::kernels
