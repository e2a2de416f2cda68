#pragma once

// Data-parallel inner loops of the smoothed likelihood fit. Each kernel has
// an OpenMP implementation in semimix::kernels and a plain serial reference
// in semimix::kernels::serial that evaluates every exponential directly.
// Tests compare the two; bench/ times them.

#include <Eigen/Dense>

#include <span>

#include "semimix/kernel_smoothing.hpp"

namespace semimix::kernels {

using KernelMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// K(i, g) = K_h(points_i - grid_g).
KernelMatrix kernel_matrix(std::span<const double> points, const UniformGrid& grid, double h);

// out_g = sum_i weights_i K_h(points_i - grid_g)
void grid_density(std::span<const double> points, std::span<const double> weights,
                  const UniformGrid& grid, double h, std::span<double> out);

// out_i = sum_g K_h(points_i - grid_g) weighted_log_f_g
void smooth_at(std::span<const double> points, const UniformGrid& grid, double h,
               std::span<const double> weighted_log_f, std::span<double> out);

// Row-wise log-sum-exp normalisation of log scores into responsibilities;
// returns sum_i log sum_k exp(scores_ik).
double normalize_log_scores(const Eigen::MatrixXd& scores, Eigen::MatrixXd& t);

namespace serial {

KernelMatrix kernel_matrix(std::span<const double> points, const UniformGrid& grid, double h);
void grid_density(std::span<const double> points, std::span<const double> weights,
                  const UniformGrid& grid, double h, std::span<double> out);
void smooth_at(std::span<const double> points, const UniformGrid& grid, double h,
               std::span<const double> weighted_log_f, std::span<double> out);
double normalize_log_scores(const Eigen::MatrixXd& scores, Eigen::MatrixXd& t);

}  // namespace serial

}  // namespace semimix::kernels
