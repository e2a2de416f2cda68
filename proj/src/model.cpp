#include "semimix/model.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <numeric>
#include <sstream>

#include "quantile_lp.hpp"

namespace semimix {

const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::InvalidArgument: return "InvalidArgument";
    case ErrorKind::SingularDesign: return "SingularDesign";
    case ErrorKind::InvalidLevel: return "InvalidLevel";
    case ErrorKind::UnsupportedColumnType: return "UnsupportedColumnType";
    case ErrorKind::DegenerateComponent: return "DegenerateComponent";
    case ErrorKind::LengthMismatch: return "LengthMismatch";
    case ErrorKind::NoRoot: return "NoRoot";
    case ErrorKind::Io: return "Io";
    case ErrorKind::Schema: return "Schema";
  }
  return "Unknown";
}

XColumn XColumn::continuous(std::string name, std::vector<double> values) {
  XColumn c;
  c.name = std::move(name);
  c.type = ColumnType::Continuous;
  c.values = std::move(values);
  return c;
}

XColumn XColumn::categorical(std::string name, std::vector<int> levels,
                             int cardinality,
                             std::vector<std::string> level_names) {
  XColumn c;
  c.name = std::move(name);
  c.type = ColumnType::Categorical;
  c.levels = std::move(levels);
  c.cardinality = cardinality;
  if (level_names.empty()) {
    for (int l = 0; l < cardinality; ++l) level_names.push_back(std::to_string(l));
  }
  c.level_names = std::move(level_names);
  return c;
}

bool Dataset::all_continuous() const {
  return std::all_of(x.begin(), x.end(),
                     [](const XColumn& c) { return c.is_continuous(); });
}

void Dataset::validate() const {
  const std::size_t rows = n();
  if (rows == 0) throw Error(ErrorKind::InvalidArgument, "dataset has no rows");
  if (static_cast<std::size_t>(u.rows()) != rows && u.cols() > 0) {
    throw Error(ErrorKind::LengthMismatch, "U has a different row count than y");
  }
  if (!y.allFinite() || !u.allFinite()) {
    throw Error(ErrorKind::InvalidArgument, "non-finite value in U or y");
  }
  for (const auto& col : x) {
    if (col.size() != rows) {
      throw Error(ErrorKind::LengthMismatch,
                  "column '" + col.name + "' has a different length than y");
    }
    if (col.is_continuous()) {
      for (double v : col.values) {
        if (!std::isfinite(v)) {
          throw Error(ErrorKind::InvalidArgument,
                      "non-finite value in column '" + col.name + "'");
        }
      }
    } else {
      if (col.cardinality < 1) {
        throw Error(ErrorKind::InvalidArgument,
                    "categorical column '" + col.name + "' has no levels");
      }
      for (int l : col.levels) {
        if (l < 0 || l >= col.cardinality) {
          throw Error(ErrorKind::InvalidLevel,
                      "level " + std::to_string(l) + " out of range in column '" +
                          col.name + "'");
        }
      }
    }
  }
  if (true_z && true_z->size() != rows) {
    throw Error(ErrorKind::LengthMismatch, "true_z has a different length than y");
  }
}

Dataset Dataset::subset(std::span<const std::size_t> rows) const {
  Dataset out;
  const auto m = static_cast<Eigen::Index>(rows.size());
  out.u.resize(m, u.cols());
  out.y.resize(m);
  for (Eigen::Index r = 0; r < m; ++r) {
    out.u.row(r) = u.row(static_cast<Eigen::Index>(rows[r]));
    out.y(r) = y(static_cast<Eigen::Index>(rows[r]));
  }
  for (const auto& col : x) {
    XColumn c = col;
    if (col.is_continuous()) {
      c.values.clear();
      for (auto r : rows) c.values.push_back(col.values[r]);
    } else {
      c.levels.clear();
      for (auto r : rows) c.levels.push_back(col.levels[r]);
    }
    out.x.push_back(std::move(c));
  }
  if (true_z) {
    std::vector<int> z;
    for (auto r : rows) z.push_back((*true_z)[r]);
    out.true_z = std::move(z);
  }
  out.u_names = u_names;
  out.y_name = y_name;
  return out;
}

LossSpec LossSpec::huber(double c) {
  LossSpec s{LossKind::Huber, c};
  s.validate();
  return s;
}

LossSpec LossSpec::quantile(double tau) {
  LossSpec s{LossKind::Quantile, tau};
  s.validate();
  return s;
}

LossSpec LossSpec::expectile(double tau) {
  LossSpec s{LossKind::Expectile, tau};
  s.validate();
  return s;
}

void LossSpec::validate() const {
  switch (kind) {
    case LossKind::Huber:
      if (!(param > 0.0)) throw Error(ErrorKind::InvalidArgument, "Huber threshold must be > 0");
      break;
    case LossKind::Quantile:
    case LossKind::Expectile:
      if (!(param > 0.0 && param < 1.0)) {
        throw Error(ErrorKind::InvalidArgument, "tau must lie strictly inside (0,1)");
      }
      break;
    default:
      break;
  }
}

namespace {

double parse_number(std::string_view text) {
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc() || ptr != text.data() + text.size()) {
    throw Error(ErrorKind::InvalidArgument, "bad loss parameter '" + std::string(text) + "'");
  }
  return v;
}

}  // namespace

LossSpec LossSpec::parse(std::string_view text) {
  const auto colon = text.find(':');
  const std::string_view head = text.substr(0, colon);
  const std::string_view tail =
      colon == std::string_view::npos ? std::string_view{} : text.substr(colon + 1);
  auto need_param = [&](std::string_view what) {
    if (tail.empty()) {
      throw Error(ErrorKind::InvalidArgument, std::string(what) + " loss needs a parameter");
    }
    return parse_number(tail);
  };
  if (head == "quadratic" || head == "mean") return quadratic();
  if (head == "absolute" || head == "median") return absolute();
  if (head == "logcosh") return logcosh();
  if (head == "huber") return huber(tail.empty() ? 1.0 : parse_number(tail));
  if (head == "quantile") return quantile(need_param("quantile"));
  if (head == "expectile") return expectile(need_param("expectile"));
  throw Error(ErrorKind::InvalidArgument, "unknown loss '" + std::string(text) + "'");
}

std::string LossSpec::name() const {
  std::ostringstream out;
  switch (kind) {
    case LossKind::Quadratic: return "quadratic";
    case LossKind::Absolute: return "absolute";
    case LossKind::LogCosh: return "logcosh";
    case LossKind::Huber: out << "huber:" << param; break;
    case LossKind::Quantile: out << "quantile:" << param; break;
    case LossKind::Expectile: out << "expectile:" << param; break;
  }
  return out.str();
}

double loss_value(const LossSpec& spec, double t) {
  switch (spec.kind) {
    case LossKind::Quadratic:
      return t * t;
    case LossKind::Absolute:
      return std::abs(t);
    case LossKind::Huber: {
      const double a = std::abs(t);
      return a <= spec.param ? 0.5 * t * t : spec.param * a - 0.5 * spec.param * spec.param;
    }
    case LossKind::LogCosh: {
      const double a = std::abs(t);
      return a + std::log1p(std::exp(-2.0 * a)) - std::log(2.0);
    }
    case LossKind::Quantile:
      // Check function; half of |t| + (2 tau - 1) t so that rho is its derivative.
      return t > 0.0 ? spec.param * t : (spec.param - 1.0) * t;
    case LossKind::Expectile: {
      const double w = t <= 0.0 ? 1.0 - spec.param : spec.param;
      return w * t * t;
    }
  }
  return 0.0;
}

double loss_derivative(const LossSpec& spec, double t) {
  switch (spec.kind) {
    case LossKind::Quadratic:
      return 2.0 * t;
    case LossKind::Absolute:
      return t <= 0.0 ? -1.0 : 1.0;
    case LossKind::Huber:
      return std::clamp(t, -spec.param, spec.param);
    case LossKind::LogCosh:
      return std::tanh(t);
    case LossKind::Quantile:
      return spec.param - (t <= 0.0 ? 1.0 : 0.0);
    case LossKind::Expectile:
      return 2.0 * t * (t <= 0.0 ? 1.0 - spec.param : spec.param);
  }
  return 0.0;
}

Eigen::VectorXd RegressionCoefficients::stacked() const {
  Eigen::VectorXd beta(gamma.size() + delta.size());
  beta << gamma, delta;
  return beta;
}

RegressionCoefficients RegressionCoefficients::from_stacked(const Eigen::VectorXd& beta,
                                                            std::size_t d_u) {
  const auto du = static_cast<Eigen::Index>(d_u);
  return {beta.head(du), beta.tail(beta.size() - du)};
}

void check_responsibilities(const Responsibilities& t, double tol) {
  if (t.rows() == 0 || t.cols() == 0) {
    throw Error(ErrorKind::InvalidArgument, "empty responsibility matrix");
  }
  if ((t.array() < -tol).any() || (t.array() > 1.0 + tol).any()) {
    throw Error(ErrorKind::InvalidArgument, "responsibilities outside [0,1]");
  }
  const Eigen::VectorXd sums = t.rowwise().sum();
  if (((sums.array() - 1.0).abs() > tol).any()) {
    throw Error(ErrorKind::InvalidArgument, "responsibility rows do not sum to 1");
  }
}

Responsibilities hard_responsibilities(std::span<const int> labels, std::size_t k) {
  Responsibilities t = Responsibilities::Zero(static_cast<Eigen::Index>(labels.size()),
                                              static_cast<Eigen::Index>(k));
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] < 0 || static_cast<std::size_t>(labels[i]) >= k) {
      throw Error(ErrorKind::InvalidArgument, "label out of range");
    }
    t(static_cast<Eigen::Index>(i), labels[i]) = 1.0;
  }
  return t;
}

std::vector<int> map_labels(const Responsibilities& t) {
  std::vector<int> z(static_cast<std::size_t>(t.rows()));
  for (Eigen::Index i = 0; i < t.rows(); ++i) {
    Eigen::Index k = 0;
    t.row(i).maxCoeff(&k);
    z[static_cast<std::size_t>(i)] = static_cast<int>(k);
  }
  return z;
}

Eigen::MatrixXd residual_matrix(const Eigen::MatrixXd& u, const Eigen::VectorXd& y,
                                const RegressionCoefficients& beta) {
  Eigen::VectorXd e = y;
  if (u.cols() > 0) e -= u * beta.gamma;
  Eigen::MatrixXd r(y.size(), beta.delta.size());
  for (Eigen::Index k = 0; k < beta.delta.size(); ++k) {
    r.col(k) = e.array() - beta.delta(k);
  }
  return r;
}

double weighted_loss_objective(const Eigen::MatrixXd& u, const Eigen::VectorXd& y,
                               const Responsibilities& t, const LossSpec& spec,
                               const RegressionCoefficients& beta) {
  const Eigen::MatrixXd r = residual_matrix(u, y, beta);
  double total = 0.0;
  for (Eigen::Index k = 0; k < r.cols(); ++k) {
    for (Eigen::Index i = 0; i < r.rows(); ++i) {
      const double w = t(i, k);
      if (w != 0.0) total += w * loss_value(spec, r(i, k));
    }
  }
  return total;
}

RegressionCoefficients weighted_least_squares(const Eigen::MatrixXd& u,
                                              const Eigen::VectorXd& y,
                                              const Eigen::MatrixXd& w) {
  const Eigen::Index du = u.cols();
  const Eigen::Index k = w.cols();
  const Eigen::Index p = du + k;
  const Eigen::VectorXd rows = w.rowwise().sum();

  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(p, p);
  Eigen::VectorXd b(p);
  if (du > 0) {
    a.topLeftCorner(du, du) = u.transpose() * rows.asDiagonal() * u;
    a.topRightCorner(du, k) = u.transpose() * w;
    a.bottomLeftCorner(k, du) = a.topRightCorner(du, k).transpose();
    b.head(du) = u.transpose() * (rows.array() * y.array()).matrix();
  }
  a.bottomRightCorner(k, k).diagonal() = w.colwise().sum().transpose();
  b.tail(k) = w.transpose() * y;

  Eigen::LDLT<Eigen::MatrixXd> ldlt(a);
  const Eigen::VectorXd d = ldlt.vectorD().cwiseAbs();
  if (ldlt.info() != Eigen::Success || d.maxCoeff() <= 0.0 ||
      d.minCoeff() <= 1e-12 * d.maxCoeff()) {
    throw Error(ErrorKind::SingularDesign, "weighted normal equations are rank deficient");
  }
  const Eigen::VectorXd beta = ldlt.solve(b);
  return RegressionCoefficients::from_stacked(beta, static_cast<std::size_t>(du));
}

namespace {

// rho(t)/t with its limit at zero.
double irls_weight(const LossSpec& spec, double r) {
  const bool near_zero = std::abs(r) < 1e-8;
  switch (spec.kind) {
    case LossKind::Huber:
      return near_zero ? 1.0 : std::min(1.0, spec.param / std::abs(r));
    case LossKind::LogCosh:
      return near_zero ? 1.0 : std::tanh(r) / r;
    case LossKind::Expectile:
      return 2.0 * (r <= 0.0 ? 1.0 - spec.param : spec.param);
    default:
      return 2.0;
  }
}

LossFit fit_irls(const Eigen::MatrixXd& u, const Eigen::VectorXd& y, const Responsibilities& t,
                 const LossSpec& spec, RegressionCoefficients beta,
                 const LossFitOptions& options) {
  LossFit fit;
  double objective = weighted_loss_objective(u, y, t, spec, beta);
  fit.converged = false;
  int it = 0;
  for (; it < options.max_iter; ++it) {
    const Eigen::MatrixXd r = residual_matrix(u, y, beta);
    Eigen::MatrixXd w(r.rows(), r.cols());
    for (Eigen::Index k = 0; k < r.cols(); ++k) {
      for (Eigen::Index i = 0; i < r.rows(); ++i) {
        w(i, k) = t(i, k) * irls_weight(spec, r(i, k));
      }
    }
    const RegressionCoefficients target = weighted_least_squares(u, y, w);
    const Eigen::VectorXd from = beta.stacked();
    const Eigen::VectorXd step = target.stacked() - from;

    double scale = 1.0;
    RegressionCoefficients candidate = target;
    double cand_obj = weighted_loss_objective(u, y, t, spec, candidate);
    for (int half = 0; half < 60 && cand_obj > objective; ++half) {
      scale *= 0.5;
      candidate = RegressionCoefficients::from_stacked(from + scale * step, u.cols());
      cand_obj = weighted_loss_objective(u, y, t, spec, candidate);
    }
    if (cand_obj > objective) {
      fit.converged = true;  // no descent left at machine precision
      break;
    }
    const double moved = (scale * step).lpNorm<Eigen::Infinity>();
    const double drop = objective - cand_obj;
    beta = std::move(candidate);
    objective = cand_obj;
    if (moved <= options.tol * (1.0 + from.lpNorm<Eigen::Infinity>()) || drop == 0.0) {
      fit.converged = true;
      ++it;
      break;
    }
  }
  fit.coeffs = std::move(beta);
  fit.objective = objective;
  fit.iterations = it;
  return fit;
}

LossFit fit_linear_program(const Eigen::MatrixXd& u, const Eigen::VectorXd& y,
                           const Responsibilities& t, const LossSpec& spec) {
  const double tau = spec.kind == LossKind::Quantile ? spec.param : 0.5;
  const Eigen::Index n = y.size();
  const Eigen::Index du = u.cols();
  const Eigen::Index k = t.cols();
  const Eigen::Index p = du + k;

  std::vector<Eigen::Index> cells;
  const double wmax = t.maxCoeff();
  for (Eigen::Index kk = 0; kk < k; ++kk) {
    for (Eigen::Index i = 0; i < n; ++i) {
      if (t(i, kk) > 1e-14 * wmax) cells.push_back(kk * n + i);
    }
  }
  const auto m = static_cast<Eigen::Index>(cells.size());
  Eigen::MatrixXd design = Eigen::MatrixXd::Zero(m, p);
  Eigen::VectorXd response(m);
  Eigen::VectorXd weight(m);
  for (Eigen::Index c = 0; c < m; ++c) {
    const Eigen::Index i = cells[static_cast<std::size_t>(c)] % n;
    const Eigen::Index kk = cells[static_cast<std::size_t>(c)] / n;
    if (du > 0) design.row(c).head(du) = u.row(i);
    design(c, du + kk) = 1.0;
    response(c) = y(i);
    weight(c) = t(i, kk);
  }
  const detail::QuantileLpResult lp = detail::weighted_quantile_regression(design, response, weight, tau);
  LossFit fit;
  fit.coeffs = RegressionCoefficients::from_stacked(lp.beta, static_cast<std::size_t>(du));
  fit.objective = weighted_loss_objective(u, y, t, spec, fit.coeffs);
  fit.iterations = lp.iterations;
  fit.converged = lp.converged;
  return fit;
}

}  // namespace

LossFit weighted_loss_fit(const Eigen::MatrixXd& u, const Eigen::VectorXd& y,
                          const Responsibilities& t, const LossSpec& spec,
                          const std::optional<RegressionCoefficients>& init,
                          const LossFitOptions& options) {
  spec.validate();
  if (t.rows() != y.size() || (u.cols() > 0 && u.rows() != y.size())) {
    throw Error(ErrorKind::LengthMismatch, "weighted_loss_fit: row counts differ");
  }
  if (init && (static_cast<Eigen::Index>(init->d_u()) != u.cols() ||
               static_cast<Eigen::Index>(init->k()) != t.cols())) {
    throw Error(ErrorKind::LengthMismatch, "weighted_loss_fit: init has wrong shape");
  }

  LossFit fit;
  switch (spec.kind) {
    case LossKind::Quadratic:
      fit.coeffs = weighted_least_squares(u, y, t);
      fit.objective = weighted_loss_objective(u, y, t, spec, fit.coeffs);
      fit.iterations = 1;
      break;
    case LossKind::Absolute:
    case LossKind::Quantile:
      fit = fit_linear_program(u, y, t, spec);
      break;
    default: {
      RegressionCoefficients start = init ? *init : weighted_least_squares(u, y, t);
      if (init) {
        // A least-squares start can be better than a stale init.
        RegressionCoefficients ls = weighted_least_squares(u, y, t);
        if (weighted_loss_objective(u, y, t, spec, ls) <
            weighted_loss_objective(u, y, t, spec, start)) {
          start = std::move(ls);
        }
      }
      fit = fit_irls(u, y, t, spec, std::move(start), options);
      break;
    }
  }
  if (init) {
    const double init_obj = weighted_loss_objective(u, y, t, spec, *init);
    if (init_obj < fit.objective) {
      fit.coeffs = *init;
      fit.objective = init_obj;
    }
  }
  return fit;
}

}  // namespace semimix
