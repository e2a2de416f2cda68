#include "semimix/parametric_em.hpp"

#include <cmath>
#include <limits>
#include <numbers>

#include "init.hpp"
#include "semimix/parallel_kernels.hpp"

namespace semimix {

double GaussianComponent::log_density(const Dataset& data, std::size_t i) const {
  double s = 0.0;
  for (std::size_t j = 0; j < data.d_x(); ++j) {
    const double v = variances(static_cast<Eigen::Index>(j));
    const double d = data.x[j].values[i] - means(static_cast<Eigen::Index>(j));
    s += -0.5 * std::log(2.0 * std::numbers::pi * v) - 0.5 * d * d / v;
  }
  return s;
}

ParametricNoise ParametricNoise::asymmetric_laplace(double tau, double scale) {
  LossSpec::quantile(tau).validate();
  return {NoiseFamily::AsymmetricLaplace, tau, scale};
}

ParametricNoise ParametricNoise::asymmetric_normal(double tau, double scale) {
  LossSpec::expectile(tau).validate();
  return {NoiseFamily::AsymmetricNormal, tau, scale};
}

ParametricNoise ParametricNoise::matching(const LossSpec& loss) {
  switch (loss.kind) {
    case LossKind::Quadratic: return gaussian();
    case LossKind::Absolute: return asymmetric_laplace(0.5);
    case LossKind::Quantile: return asymmetric_laplace(loss.param);
    case LossKind::Expectile: return asymmetric_normal(loss.param);
    default:
      throw Error(ErrorKind::InvalidArgument,
                  "no parametric noise family matches loss " + loss.name());
  }
}

LossSpec ParametricNoise::loss() const {
  switch (family) {
    case NoiseFamily::Gaussian: return LossSpec::quadratic();
    case NoiseFamily::AsymmetricLaplace: return LossSpec::quantile(tau);
    case NoiseFamily::AsymmetricNormal: return LossSpec::expectile(tau);
  }
  return LossSpec::quadratic();
}

double ParametricNoise::log_density(double r) const {
  switch (family) {
    case NoiseFamily::Gaussian:
      return -0.5 * std::log(2.0 * std::numbers::pi) - std::log(scale) -
             0.5 * r * r / (scale * scale);
    case NoiseFamily::AsymmetricLaplace:
      // tau(1 - tau)/sigma exp(-check_tau(r)/sigma)
      return std::log(tau * (1.0 - tau)) - std::log(scale) -
             loss_value(LossSpec::quantile(tau), r) / scale;
    case NoiseFamily::AsymmetricNormal: {
      // exp(-|tau - 1{r<=0}| r^2 / sigma^2) / Z
      const double z = 0.5 * scale * std::sqrt(std::numbers::pi) *
                       (1.0 / std::sqrt(tau) + 1.0 / std::sqrt(1.0 - tau));
      return -std::log(z) - loss_value(LossSpec::expectile(tau), r) / (scale * scale);
    }
  }
  return 0.0;
}

double ParametricNoise::scale_mle(const Eigen::MatrixXd& residuals,
                                  const Eigen::MatrixXd& t) const {
  const double n = static_cast<double>(residuals.rows());
  const LossSpec spec = loss();
  double s = 0.0;
  for (Eigen::Index i = 0; i < residuals.rows(); ++i) {
    for (Eigen::Index k = 0; k < residuals.cols(); ++k) {
      s += t(i, k) * loss_value(spec, residuals(i, k));
    }
  }
  double scale = 0.0;
  switch (family) {
    case NoiseFamily::Gaussian: scale = std::sqrt(s / n); break;
    case NoiseFamily::AsymmetricLaplace: scale = s / n; break;
    case NoiseFamily::AsymmetricNormal: scale = std::sqrt(2.0 * s / n); break;
  }
  return std::max(scale, std::sqrt(kVarianceFloor));
}

namespace {

struct EmRun {
  ParametricModel model;
  Responsibilities t;
  std::vector<double> trajectory;
  bool converged = false;
  int iterations = 0;
};

class EmEngine {
 public:
  EmEngine(const Dataset& data, std::size_t k, std::optional<ParametricNoise> noise)
      : data_(data), k_(k), noise_(noise) {
    for (const auto& col : data.x) {
      if (!col.is_continuous()) {
        throw Error(ErrorKind::UnsupportedColumnType,
                    "parametric EM needs continuous X; column '" + col.name + "' is categorical");
      }
    }
    const auto n = static_cast<Eigen::Index>(data.n());
    x_.resize(n, static_cast<Eigen::Index>(data.d_x()));
    for (std::size_t j = 0; j < data.d_x(); ++j) {
      x_.col(static_cast<Eigen::Index>(j)) =
          Eigen::Map<const Eigen::VectorXd>(data.x[j].values.data(), n);
    }
  }

  EmRun run(const Responsibilities& t0, const EMSettings& settings) const {
    EmRun out;
    out.model.noise = noise_.value_or(ParametricNoise{});
    Responsibilities used = t0;
    Responsibilities t;
    m_step(used, out.model);
    double ll = e_step(out.model, t);
    out.trajectory.push_back(ll);
    for (int it = 1; it <= settings.max_iter; ++it) {
      m_step(t, out.model);
      used = t;
      const double next = e_step(out.model, t);
      out.trajectory.push_back(next);
      out.iterations = it;
      const double change = next - ll;
      ll = next;
      if (std::abs(change) <= settings.rel_tol * std::abs(ll)) {
        out.converged = true;
        break;
      }
    }
    out.t = std::move(used);
    return out;
  }

  void m_step(const Responsibilities& t, ParametricModel& m) const {
    const double n = static_cast<double>(data_.n());
    const Eigen::VectorXd mass = t.colwise().sum().transpose();
    m.pi = mass / n;
    for (std::size_t c = 0; c < k_; ++c) {
      if (m.pi(static_cast<Eigen::Index>(c)) < 1e-3 * static_cast<double>(k_) / n) {
        throw Error(ErrorKind::DegenerateComponent,
                    "component " + std::to_string(c) + " lost its responsibility mass");
      }
    }
    m.components.resize(k_);
    for (std::size_t c = 0; c < k_; ++c) {
      const auto cc = static_cast<Eigen::Index>(c);
      const Eigen::VectorXd w = t.col(cc) / mass(cc);
      GaussianComponent& comp = m.components[c];
      comp.means = x_.transpose() * w;
      comp.variances =
          ((x_.rowwise() - comp.means.transpose()).array().square().matrix().transpose() * w)
              .cwiseMax(kVarianceFloor);
    }
    if (noise_) {
      std::optional<RegressionCoefficients> init;
      if (m.coeffs.k() == k_) init = m.coeffs;
      m.coeffs = weighted_loss_fit(data_.u, data_.y, t, m.noise.loss(), init).coeffs;
      m.noise.scale = m.noise.scale_mle(residual_matrix(data_.u, data_.y, m.coeffs), t);
    } else {
      m.coeffs.gamma.resize(0);
      m.coeffs.delta = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(k_));
    }
  }

  double e_step(const ParametricModel& m, Responsibilities& t) const {
    return kernels::normalize_log_scores(log_scores(m), t);
  }

  Eigen::MatrixXd log_scores(const ParametricModel& m) const {
    const auto n = static_cast<Eigen::Index>(data_.n());
    const auto kk = static_cast<Eigen::Index>(k_);
    Eigen::MatrixXd s(n, kk);
    for (Eigen::Index c = 0; c < kk; ++c) {
      const GaussianComponent& comp = m.components[static_cast<std::size_t>(c)];
      const Eigen::ArrayXd inv_var = comp.variances.array().inverse();
      const double norm =
          -0.5 * (2.0 * std::numbers::pi * comp.variances.array()).log().sum();
      s.col(c) = (norm + std::log(m.pi(c))) -
                 0.5 * ((x_.rowwise() - comp.means.transpose()).array().square().rowwise() *
                        inv_var.transpose())
                           .rowwise()
                           .sum();
    }
    if (noise_) {
      const Eigen::MatrixXd r = residual_matrix(data_.u, data_.y, m.coeffs);
      for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index c = 0; c < kk; ++c) s(i, c) += m.noise.log_density(r(i, c));
      }
    }
    return s;
  }

 private:
  const Dataset& data_;
  std::size_t k_;
  std::optional<ParametricNoise> noise_;
  Eigen::MatrixXd x_;
};

EmFit fit_with_starts(const Dataset& data, std::size_t k, std::optional<ParametricNoise> noise,
                      const EMSettings& settings,
                      const std::optional<Responsibilities>& initial) {
  data.validate();
  if (k < 1) throw Error(ErrorKind::InvalidArgument, "K must be at least 1");
  if (settings.max_iter < 1 || settings.n_starts < 1) {
    throw Error(ErrorKind::InvalidArgument, "max_iter and n_starts must be positive");
  }
  if (initial) {
    if (static_cast<std::size_t>(initial->rows()) != data.n() ||
        static_cast<std::size_t>(initial->cols()) != k) {
      throw Error(ErrorKind::LengthMismatch, "initial responsibilities have the wrong shape");
    }
    check_responsibilities(*initial);
  }
  if (!noise && data.d_x() == 0) {
    throw Error(ErrorKind::InvalidArgument, "clustering X needs at least one column");
  }
  const EmEngine engine(data, k, noise);

  std::optional<EmRun> best;
  int best_start = 0;
  int restarts = 0;
  for (int s = 0; s < settings.n_starts; ++s) {
    auto rng = detail::make_rng(settings.seed, static_cast<std::uint64_t>(s));
    Responsibilities t0;
    if (s == 0) {
      t0 = initial ? *initial
                   : (data.d_x() > 0 ? detail::kmeans_responsibilities(data, k, rng)
                                     : detail::random_responsibilities(data.n(), k, rng));
    } else {
      t0 = detail::random_responsibilities(data.n(), k, rng);
    }
    for (int attempt = 0;; ++attempt) {
      try {
        EmRun run = engine.run(t0, settings);
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
    throw Error(ErrorKind::DegenerateComponent, "every EM start produced an empty component");
  }

  EmFit fit;
  fit.model = std::move(best->model);
  fit.result.pi = fit.model.pi;
  fit.result.coeffs = fit.model.coeffs;
  fit.result.t = std::move(best->t);
  fit.result.trajectory = std::move(best->trajectory);
  fit.result.converged = best->converged;
  fit.result.iterations = best->iterations;
  fit.result.best_start = best_start;
  fit.result.restarts = restarts;
  if (!fit.result.converged) fit.result.warnings.push_back("EM reached max_iter");
  return fit;
}

}  // namespace

EmFit em_fit(const Dataset& data, std::size_t k, const ParametricNoise& noise,
             const EMSettings& settings, const std::optional<Responsibilities>& initial) {
  return fit_with_starts(data, k, noise, settings, initial);
}

EmFit em_fit_x(const Dataset& data, std::size_t k, const EMSettings& settings,
               const std::optional<Responsibilities>& initial) {
  return fit_with_starts(data, k, std::nullopt, settings, initial);
}

Responsibilities em_posterior(const Dataset& data, const ParametricModel& model) {
  Responsibilities t;
  const EmEngine engine(data, static_cast<std::size_t>(model.pi.size()), model.noise);
  engine.e_step(model, t);
  return t;
}

double em_loglik(const Dataset& data, const ParametricModel& model) {
  const auto k = static_cast<std::size_t>(model.pi.size());
  const Eigen::MatrixXd r = residual_matrix(data.u, data.y, model.coeffs);
  double total = 0.0;
  std::vector<double> terms(k);
  for (std::size_t i = 0; i < data.n(); ++i) {
    double m = -std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < k; ++c) {
      terms[c] = std::log(model.pi(static_cast<Eigen::Index>(c))) +
                 model.components[c].log_density(data, i) +
                 model.noise.log_density(r(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(c)));
      m = std::max(m, terms[c]);
    }
    double s = 0.0;
    for (double v : terms) s += std::exp(v - m);
    total += m + std::log(s);
  }
  return total;
}

}  // namespace semimix
