#include "semimix/semiparametric_mm.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <numeric>

#include "init.hpp"
#include "semimix/parallel_kernels.hpp"

namespace semimix {

namespace {

using kernels::KernelMatrix;

struct ContinuousDim {
  std::size_t column = 0;
  UniformGrid grid;
  KernelMatrix kernel;  // n x G
};

struct CategoricalDim {
  std::size_t column = 0;
  int cardinality = 0;
};

// Parameters of one iterate in the form the majorization needs.
struct State {
  Eigen::VectorXd pi;
  RegressionCoefficients coeffs;
  std::vector<Eigen::MatrixXd> weighted_log;  // per continuous dim, G x K
  std::vector<Eigen::MatrixXd> level_log;     // per categorical dim, L x K
  UniformGrid residual_grid;
  KernelMatrix residual_kernel;  // nK x G, row i*K + k
  Eigen::VectorXd residual_weighted_log;
};

// trapezoid weight times ln f for a density sampled on a grid
Eigen::VectorXd weighted_log_on_grid(const UniformGrid& grid, std::span<const double> values,
                                     double h) {
  const SmoothedLogDensity s(grid, values, h);
  const auto w = s.weighted_log_density();
  return Eigen::Map<const Eigen::VectorXd>(w.data(), static_cast<Eigen::Index>(w.size()));
}

class MmEngine {
 public:
  MmEngine(const Dataset& data, std::size_t k, const LossSpec& loss, bool joint, double h,
           std::size_t grid_size, std::optional<RegressionCoefficients> fixed_coeffs)
      : data_(data), k_(k), loss_(loss), joint_(joint), h_(h), grid_size_(grid_size),
        fixed_coeffs_(std::move(fixed_coeffs)) {
    for (std::size_t j = 0; j < data.d_x(); ++j) {
      const XColumn& col = data.x[j];
      if (col.is_continuous()) {
        ContinuousDim dim;
        dim.column = j;
        dim.grid = UniformGrid::covering(col.values, h, grid_size);
        dim.kernel = kernels::kernel_matrix(col.values, dim.grid, h);
        continuous_.push_back(std::move(dim));
      } else {
        categorical_.push_back({j, col.cardinality});
      }
    }
  }

  void minorize(const Responsibilities& t, const State* previous, State& s) const {
    const double n = static_cast<double>(data_.n());
    const auto kk = static_cast<Eigen::Index>(k_);
    s.pi = t.colwise().mean().transpose();
    for (Eigen::Index c = 0; c < kk; ++c) {
      if (s.pi(c) < 1.0 / (10.0 * static_cast<double>(k_))) {
        throw Error(ErrorKind::DegenerateComponent,
                    "class " + std::to_string(c) + " weight fell below 1/(10K)");
      }
    }

    s.weighted_log.clear();
    for (const ContinuousDim& dim : continuous_) {
      // column k: (1/(n pi_k)) sum_i t_ik K_h(x_ij - a_g)
      Eigen::MatrixXd dens = dim.kernel.transpose() * t;
      Eigen::MatrixXd wl(dens.rows(), kk);
      for (Eigen::Index c = 0; c < kk; ++c) {
        dens.col(c) /= n * s.pi(c);
        wl.col(c) = weighted_log_on_grid(
            dim.grid, std::span<const double>(dens.col(c).data(), dim.grid.size), h_);
      }
      s.weighted_log.push_back(std::move(wl));
    }

    s.level_log.clear();
    for (const CategoricalDim& dim : categorical_) {
      const std::vector<int>& levels = data_.x[dim.column].levels;
      Eigen::MatrixXd counts = Eigen::MatrixXd::Constant(dim.cardinality, kk, kLevelPseudoCount);
      for (std::size_t i = 0; i < levels.size(); ++i) {
        counts.row(levels[i]) += t.row(static_cast<Eigen::Index>(i));
      }
      for (Eigen::Index c = 0; c < kk; ++c) {
        counts.col(c) = (counts.col(c) / counts.col(c).sum()).array().log().matrix();
      }
      s.level_log.push_back(std::move(counts));
    }

    if (!joint_) {
      s.coeffs.gamma.resize(0);
      s.coeffs.delta = Eigen::VectorXd::Zero(kk);
      return;
    }
    if (fixed_coeffs_) {
      s.coeffs = *fixed_coeffs_;
    } else {
      std::optional<RegressionCoefficients> init;
      if (previous) init = previous->coeffs;
      s.coeffs = weighted_loss_fit(data_.u, data_.y, t, loss_, init).coeffs;
    }

    const Eigen::MatrixXd r = residual_matrix(data_.u, data_.y, s.coeffs);
    const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> rr = r;
    const std::span<const double> points(rr.data(), static_cast<std::size_t>(rr.size()));
    s.residual_grid = UniformGrid::covering(points, h_, grid_size_);
    s.residual_kernel = kernels::kernel_matrix(points, s.residual_grid, h_);
    const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> tr = t;
    const Eigen::Map<const Eigen::VectorXd> tv(tr.data(), tr.size());
    const Eigen::VectorXd dens = s.residual_kernel.transpose() * tv / n;
    s.residual_weighted_log = weighted_log_on_grid(
        s.residual_grid, std::span<const double>(dens.data(), s.residual_grid.size), h_);
  }

  // Log scores ln pi_k + sum_j (S ln f_kj)(x_ij) + (S ln f_eps)(r_ik).
  Eigen::MatrixXd log_scores(const State& s) const {
    const auto n = static_cast<Eigen::Index>(data_.n());
    const auto kk = static_cast<Eigen::Index>(k_);
    Eigen::MatrixXd scores = s.pi.array().log().matrix().transpose().replicate(n, 1);
    for (std::size_t d = 0; d < continuous_.size(); ++d) {
      scores.noalias() += continuous_[d].kernel * s.weighted_log[d];
    }
    for (std::size_t d = 0; d < categorical_.size(); ++d) {
      const std::vector<int>& levels = data_.x[categorical_[d].column].levels;
      for (Eigen::Index i = 0; i < n; ++i) {
        scores.row(i) += s.level_log[d].row(levels[static_cast<std::size_t>(i)]);
      }
    }
    if (joint_) {
      const Eigen::VectorXd se = s.residual_kernel * s.residual_weighted_log;
      scores += Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic,
                                               Eigen::RowMajor>>(se.data(), n, kk);
    }
    return scores;
  }

  double majorize(const State& s, Responsibilities& t) const {
    return kernels::normalize_log_scores(log_scores(s), t);
  }

  SemiParamModel export_model(const State& s, const Responsibilities& t) const {
    SemiParamModel m;
    m.pi = s.pi;
    m.coeffs = s.coeffs;
    m.loss = loss_;
    m.h = h_;
    m.grid_size = grid_size_;
    const double n = static_cast<double>(data_.n());
    m.components.assign(k_, {});
    for (std::size_t c = 0; c < k_; ++c) {
      const auto cc = static_cast<Eigen::Index>(c);
      for (std::size_t j = 0; j < data_.d_x(); ++j) {
        const XColumn& col = data_.x[j];
        if (col.is_continuous()) {
          ContinuousKde rep;
          rep.support = col.values;
          rep.weights.resize(data_.n());
          for (std::size_t i = 0; i < data_.n(); ++i) {
            rep.weights[i] = t(static_cast<Eigen::Index>(i), cc) / (n * s.pi(cc));
          }
          rep.h = h_;
          m.components[c].push_back(std::move(rep));
        } else {
          CategoricalPmf pmf;
          pmf.probs.assign(static_cast<std::size_t>(col.cardinality), kLevelPseudoCount);
          for (std::size_t i = 0; i < data_.n(); ++i) {
            pmf.probs[static_cast<std::size_t>(col.levels[i])] += t(static_cast<Eigen::Index>(i), cc);
          }
          const double total = std::accumulate(pmf.probs.begin(), pmf.probs.end(), 0.0);
          for (double& p : pmf.probs) p /= total;
          m.components[c].push_back(std::move(pmf));
        }
      }
    }
    if (joint_) {
      const Eigen::MatrixXd r = residual_matrix(data_.u, data_.y, s.coeffs);
      m.noise.h = h_;
      m.noise.support.reserve(static_cast<std::size_t>(r.size()));
      m.noise.weights.reserve(static_cast<std::size_t>(r.size()));
      for (Eigen::Index i = 0; i < r.rows(); ++i) {
        for (Eigen::Index c = 0; c < r.cols(); ++c) {
          m.noise.support.push_back(r(i, c));
          m.noise.weights.push_back(t(i, c) / n);
        }
      }
    }
    m.refresh_caches();
    return m;
  }

 private:
  const Dataset& data_;
  std::size_t k_;
  LossSpec loss_;
  bool joint_;
  double h_;
  std::size_t grid_size_;
  std::optional<RegressionCoefficients> fixed_coeffs_;
  std::vector<ContinuousDim> continuous_;
  std::vector<CategoricalDim> categorical_;
};

struct MmRun {
  SemiParamModel model;
  Responsibilities t;
  std::vector<double> trajectory;
  bool converged = false;
  int iterations = 0;
};

MmRun run_mm(const MmEngine& engine, const Responsibilities& t0, const MMSettings& settings) {
  MmRun out;
  auto state = std::make_unique<State>();
  engine.minorize(t0, nullptr, *state);
  Responsibilities used = t0;
  Responsibilities t;
  double ll = engine.majorize(*state, t);
  out.trajectory.push_back(ll);
  for (int it = 1; it <= settings.max_iter; ++it) {
    auto next_state = std::make_unique<State>();
    engine.minorize(t, state.get(), *next_state);
    state = std::move(next_state);
    used = t;
    const double next = engine.majorize(*state, t);
    out.trajectory.push_back(next);
    out.iterations = it;
    const double change = std::abs(next - ll);
    ll = next;
    if (change <= settings.rel_tol * std::abs(ll) || change <= 1e-9) {
      out.converged = true;
      break;
    }
  }
  out.model = engine.export_model(*state, used);
  out.t = std::move(used);
  return out;
}

void check_initial(const Dataset& data, std::size_t k,
                   const std::optional<Responsibilities>& initial) {
  if (!initial) return;
  if (static_cast<std::size_t>(initial->rows()) != data.n() ||
      static_cast<std::size_t>(initial->cols()) != k) {
    throw Error(ErrorKind::LengthMismatch, "initial responsibilities have the wrong shape");
  }
  check_responsibilities(*initial);
}

MmFit fit_with_starts(const Dataset& data, std::size_t k, const LossSpec& loss, bool joint,
                      const MMSettings& settings,
                      const std::optional<Responsibilities>& initial) {
  data.validate();
  loss.validate();
  if (k < 1) throw Error(ErrorKind::InvalidArgument, "K must be at least 1");
  if (settings.max_iter < 1 || settings.n_starts < 1) {
    throw Error(ErrorKind::InvalidArgument, "max_iter and n_starts must be positive");
  }
  if (!joint && data.d_x() == 0) {
    throw Error(ErrorKind::InvalidArgument, "clustering X needs at least one column");
  }
  check_initial(data, k, initial);
  const double h = select_bandwidth(data.n(), settings.kernel);
  if (joint && settings.fixed_coeffs &&
      (settings.fixed_coeffs->k() != k || settings.fixed_coeffs->d_u() != data.d_u())) {
    throw Error(ErrorKind::LengthMismatch, "fixed coefficients do not match K and U");
  }
  const MmEngine engine(data, k, loss, joint, h, settings.grid_size, settings.fixed_coeffs);

  std::optional<MmRun> best;
  int best_start = 0;
  int restarts = 0;
  std::vector<std::string> warnings;
  if (data.d_x() < 3 && k > 1) {
    warnings.push_back("fewer than three proxy columns: components may not be identifiable");
  }
  for (int s = 0; s < settings.n_starts; ++s) {
    auto rng = detail::make_rng(settings.seed, static_cast<std::uint64_t>(s));
    Responsibilities t0;
    if (s == 0 && initial) {
      t0 = *initial;
    } else if (s == 0 && joint && data.d_x() > 0) {
      try {
        t0 = mm_fit_x(data, k, settings).result.t;
      } catch (const Error& e) {
        if (e.kind() != ErrorKind::DegenerateComponent) throw;
        t0 = detail::random_responsibilities(data.n(), k, rng);
      }
    } else if (s == 0 && data.d_x() > 0) {
      t0 = detail::kmeans_responsibilities(data, k, rng);
    } else {
      t0 = detail::random_responsibilities(data.n(), k, rng);
    }
    for (int attempt = 0;; ++attempt) {
      try {
        MmRun run = run_mm(engine, t0, settings);
        if (!best || run.trajectory.back() > best->trajectory.back()) {
          best = std::move(run);
          best_start = s;
        }
        break;
      } catch (const Error& e) {
        if (e.kind() != ErrorKind::DegenerateComponent) throw;
        if (attempt >= settings.max_restarts) break;
        ++restarts;
        t0 = detail::random_responsibilities(data.n(), k, rng);
      }
    }
  }
  if (!best) {
    throw Error(ErrorKind::DegenerateComponent, "every start produced a degenerate class");
  }
  MmFit fit;
  fit.model = std::move(best->model);
  fit.result.pi = fit.model.pi;
  fit.result.coeffs = fit.model.coeffs;
  fit.result.t = std::move(best->t);
  fit.result.trajectory = std::move(best->trajectory);
  fit.result.converged = best->converged;
  fit.result.iterations = best->iterations;
  fit.result.best_start = best_start;
  fit.result.restarts = restarts;
  fit.result.warnings = std::move(warnings);
  if (!fit.result.converged) fit.result.warnings.push_back("MM reached max_iter");
  return fit;
}

}  // namespace

void SemiParamModel::refresh_caches() {
  smoothed_components.assign(components.size(), {});
  for (std::size_t c = 0; c < components.size(); ++c) {
    smoothed_components[c].resize(components[c].size());
    for (std::size_t j = 0; j < components[c].size(); ++j) {
      if (const auto* kde = std::get_if<ContinuousKde>(&components[c][j])) {
        smoothed_components[c][j] = smooth_log_density(*kde, grid_size);
      }
    }
  }
  if (has_noise()) smoothed_noise = smooth_log_density(noise, grid_size);
}

MmFit mm_fit(const Dataset& data, std::size_t k, const LossSpec& loss,
             const MMSettings& settings, const std::optional<Responsibilities>& initial) {
  return fit_with_starts(data, k, loss, true, settings, initial);
}

MmFit mm_fit_x(const Dataset& data, std::size_t k, const MMSettings& settings,
               const std::optional<Responsibilities>& initial) {
  return fit_with_starts(data, k, LossSpec::quadratic(), false, settings, initial);
}

namespace {

void check_schema(const SemiParamModel& model, const Dataset& data) {
  if (model.components.empty() || model.components.front().size() != data.d_x()) {
    throw Error(ErrorKind::LengthMismatch, "data columns do not match the model");
  }
  for (std::size_t j = 0; j < data.d_x(); ++j) {
    const bool kde = std::holds_alternative<ContinuousKde>(model.components.front()[j]);
    if (kde != data.x[j].is_continuous()) {
      throw Error(ErrorKind::UnsupportedColumnType,
                  "column '" + data.x[j].name + "' type differs from the model");
    }
  }
  if (model.has_noise() && static_cast<std::size_t>(data.u.cols()) != model.coeffs.d_u()) {
    throw Error(ErrorKind::LengthMismatch, "U columns do not match the model");
  }
}

Eigen::MatrixXd smoothed_log_scores(const SemiParamModel& model, const Dataset& data) {
  check_schema(model, data);
  const auto n = static_cast<Eigen::Index>(data.n());
  const auto kk = static_cast<Eigen::Index>(model.k());
  Eigen::MatrixXd scores = model.pi.array().log().matrix().transpose().replicate(n, 1);
  std::vector<double> out(data.n());
  for (std::size_t j = 0; j < data.d_x(); ++j) {
    const XColumn& col = data.x[j];
    for (Eigen::Index c = 0; c < kk; ++c) {
      const auto cc = static_cast<std::size_t>(c);
      if (col.is_continuous()) {
        const SmoothedLogDensity& s = model.smoothed_components[cc][j];
        kernels::smooth_at(col.values, s.grid(), s.bandwidth(), s.weighted_log_density(), out);
        scores.col(c) += Eigen::Map<const Eigen::VectorXd>(out.data(), n);
      } else {
        const auto& pmf = std::get<CategoricalPmf>(model.components[cc][j]);
        for (Eigen::Index i = 0; i < n; ++i) {
          scores(i, c) += std::log(kernel_density_at(pmf, col.levels[static_cast<std::size_t>(i)]));
        }
      }
    }
  }
  if (model.has_noise()) {
    const Eigen::MatrixXd r = residual_matrix(data.u, data.y, model.coeffs);
    const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> rr = r;
    std::vector<double> se(static_cast<std::size_t>(rr.size()));
    const SmoothedLogDensity& s = model.smoothed_noise;
    kernels::smooth_at(std::span<const double>(rr.data(), se.size()), s.grid(), s.bandwidth(),
                       s.weighted_log_density(), se);
    scores += Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic,
                                             Eigen::RowMajor>>(se.data(), n, kk);
  }
  return scores;
}

}  // namespace

Eigen::VectorXd smoothed_component_density(const SemiParamModel& model, const Dataset& data,
                                           std::size_t row) {
  const std::size_t index[] = {row};
  const Dataset one = data.subset(index);
  const Eigen::MatrixXd s = smoothed_log_scores(model, one);
  return (s.row(0).transpose().array() - model.pi.array().log()).exp().matrix();
}

double smoothed_loglik(const Dataset& data, const SemiParamModel& model) {
  Responsibilities t;
  return kernels::normalize_log_scores(smoothed_log_scores(model, data), t);
}

Responsibilities smoothed_posterior(const Dataset& data, const SemiParamModel& model) {
  Responsibilities t;
  kernels::normalize_log_scores(smoothed_log_scores(model, data), t);
  return t;
}

Eigen::VectorXd moment_residual(const Dataset& data, const Responsibilities& t,
                                const RegressionCoefficients& coeffs, const LossSpec& loss) {
  const Eigen::MatrixXd r = residual_matrix(data.u, data.y, coeffs);
  Eigen::VectorXd out = Eigen::VectorXd::Zero(r.cols());
  for (Eigen::Index i = 0; i < r.rows(); ++i) {
    for (Eigen::Index c = 0; c < r.cols(); ++c) out(c) += t(i, c) * loss_derivative(loss, r(i, c));
  }
  return out / static_cast<double>(r.rows());
}

Eigen::VectorXd moment_residual(const Dataset& data, const MmFit& fit) {
  return moment_residual(data, fit.result.t, fit.model.coeffs, fit.model.loss);
}

Responsibilities x_posterior(const SemiParamModel& model, const Dataset& data) {
  check_schema(model, data);
  const auto n = static_cast<Eigen::Index>(data.n());
  const auto kk = static_cast<Eigen::Index>(model.k());
  Eigen::MatrixXd scores = model.pi.array().log().matrix().transpose().replicate(n, 1);
  for (std::size_t j = 0; j < data.d_x(); ++j) {
    const XColumn& col = data.x[j];
    if (col.is_continuous()) {
      const auto& first = std::get<ContinuousKde>(model.components[0][j]);
      const auto m = static_cast<Eigen::Index>(first.support.size());
      Eigen::MatrixXd kmat(n, m);
      for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index s = 0; s < m; ++s) {
          kmat(i, s) = gaussian_kernel(col.values[static_cast<std::size_t>(i)] -
                                           first.support[static_cast<std::size_t>(s)],
                                       first.h);
        }
      }
      for (Eigen::Index c = 0; c < kk; ++c) {
        const auto& kde = std::get<ContinuousKde>(model.components[static_cast<std::size_t>(c)][j]);
        const Eigen::Map<const Eigen::VectorXd> w(kde.weights.data(), m);
        scores.col(c) += (kmat * w).array().max(1e-300).log().matrix();
      }
    } else {
      for (Eigen::Index c = 0; c < kk; ++c) {
        const auto& pmf = std::get<CategoricalPmf>(model.components[static_cast<std::size_t>(c)][j]);
        for (Eigen::Index i = 0; i < n; ++i) {
          scores(i, c) += std::log(kernel_density_at(pmf, col.levels[static_cast<std::size_t>(i)]));
        }
      }
    }
  }
  Responsibilities t;
  kernels::normalize_log_scores(scores, t);
  return t;
}

double noise_location(const SemiParamModel& model) {
  if (!model.has_noise()) throw Error(ErrorKind::InvalidArgument, "model has no residual density");
  switch (model.loss.kind) {
    case LossKind::Absolute: return model.noise.quantile(0.5);
    case LossKind::Quantile: return model.noise.quantile(model.loss.param);
    case LossKind::Expectile: return model.noise.expectile(model.loss.param);
    default: return model.noise.mean();
  }
}

Eigen::VectorXd predict(const SemiParamModel& model, const Dataset& data) {
  const Responsibilities w = x_posterior(model, data);
  const double m_eps = noise_location(model);
  const Eigen::VectorXd base = data.u * model.coeffs.gamma;
  return base + w * model.coeffs.delta + Eigen::VectorXd::Constant(base.size(), m_eps);
}

std::vector<KSelectionRow> select_k(const Dataset& data, std::span<const std::size_t> k_range,
                                    const LossSpec& loss, const MMSettings& settings) {
  if (k_range.empty()) throw Error(ErrorKind::InvalidArgument, "k_range is empty");
  std::vector<std::size_t> order(data.n());
  std::iota(order.begin(), order.end(), 0);
  auto rng = detail::make_rng(settings.seed, 0xcf01du);
  std::shuffle(order.begin(), order.end(), rng);

  std::vector<KSelectionRow> table;
  for (std::size_t k : k_range) {
    KSelectionRow row;
    row.k = k;
    try {
      row.smoothed_loglik = mm_fit(data, k, loss, settings).result.objective();
      double sse = 0.0;
      for (std::size_t f = 0; f < kCvFolds; ++f) {
        std::vector<std::size_t> train, test;
        for (std::size_t p = 0; p < order.size(); ++p) {
          (p % kCvFolds == f ? test : train).push_back(order[p]);
        }
        const Dataset tr = data.subset(train);
        const Dataset te = data.subset(test);
        const MmFit fit = mm_fit(tr, k, loss, settings);
        sse += (predict(fit.model, te) - te.y).squaredNorm();
      }
      row.cv_prediction_mse = sse / static_cast<double>(data.n());
    } catch (const Error& e) {
      row.error = e.what();
    }
    table.push_back(row);
  }
  return table;
}

std::size_t elbow_k(std::span<const KSelectionRow> table, double factor) {
  std::vector<const KSelectionRow*> ok;
  for (const auto& row : table) {
    if (row.error.empty()) ok.push_back(&row);
  }
  if (ok.empty()) throw Error(ErrorKind::InvalidArgument, "no successful fit in the table");
  std::sort(ok.begin(), ok.end(), [](auto* a, auto* b) { return a->k < b->k; });
  for (std::size_t p = 1; p + 1 < ok.size(); ++p) {
    const double gain = ok[p]->smoothed_loglik - ok[p - 1]->smoothed_loglik;
    const double next = ok[p + 1]->smoothed_loglik - ok[p]->smoothed_loglik;
    if (gain > 0.0 && next * factor <= gain) return ok[p]->k;
  }
  return ok.back()->k;
}

}  // namespace semimix
