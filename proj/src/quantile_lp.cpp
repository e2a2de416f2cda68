#include "quantile_lp.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "semimix/error.hpp"

namespace semimix::detail {

double check_objective(const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                       const Eigen::VectorXd& w, double tau, const Eigen::VectorXd& beta) {
  const Eigen::VectorXd r = y - x * beta;
  double total = 0.0;
  for (Eigen::Index i = 0; i < r.size(); ++i) {
    total += w(i) * (r(i) > 0.0 ? tau * r(i) : (tau - 1.0) * r(i));
  }
  return total;
}

namespace {

double max_step(const Eigen::VectorXd& v, const Eigen::VectorXd& dv) {
  double step = 1.0;
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    if (dv(i) < 0.0) step = std::min(step, -v(i) / dv(i));
  }
  return step;
}

// Basic solution through the rows with smallest |residual| that span R^p.
bool basic_solution(const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                    const Eigen::VectorXd& beta, Eigen::VectorXd& out) {
  const Eigen::Index m = x.rows();
  const Eigen::Index p = x.cols();
  const Eigen::VectorXd r = (y - x * beta).cwiseAbs();
  std::vector<Eigen::Index> order(static_cast<std::size_t>(m));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  std::sort(order.begin(), order.end(),
            [&](Eigen::Index a, Eigen::Index b) { return r(a) < r(b); });

  Eigen::MatrixXd basis(p, p);
  Eigen::VectorXd rhs(p);
  Eigen::MatrixXd ortho(p, p);
  Eigen::Index taken = 0;
  for (Eigen::Index idx : order) {
    if (taken == p) break;
    Eigen::VectorXd v = x.row(idx).transpose();
    const double norm0 = v.norm();
    if (norm0 == 0.0) continue;
    for (Eigen::Index j = 0; j < taken; ++j) v -= ortho.col(j).dot(v) * ortho.col(j);
    if (v.norm() <= 1e-9 * norm0) continue;
    ortho.col(taken) = v.normalized();
    basis.row(taken) = x.row(idx);
    rhs(taken) = y(idx);
    ++taken;
  }
  if (taken < p) return false;
  out = basis.partialPivLu().solve(rhs);
  return out.allFinite();
}

}  // namespace

QuantileLpResult weighted_quantile_regression(const Eigen::MatrixXd& x,
                                              const Eigen::VectorXd& y,
                                              const Eigen::VectorXd& w, double tau) {
  const Eigen::Index m = x.rows();
  const Eigen::Index p = x.cols();
  if (m < p) throw Error(ErrorKind::SingularDesign, "fewer weighted rows than coefficients");

  // Rows scaled by their weight: w * check(r) == check(w * r) for w > 0.
  const Eigen::MatrixXd xs = w.asDiagonal() * x;
  const Eigen::VectorXd ys = w.cwiseProduct(y);

  // min c'a  s.t.  xs'a = b,  0 <= a <= 1, with c = -ys. Coefficients are -lambda.
  const Eigen::VectorXd c = -ys;
  const Eigen::VectorXd b = (1.0 - tau) * xs.transpose() * Eigen::VectorXd::Ones(m);

  Eigen::VectorXd a = Eigen::VectorXd::Constant(m, 1.0 - tau);
  Eigen::VectorXd s = Eigen::VectorXd::Constant(m, tau);

  Eigen::MatrixXd gram = xs.transpose() * xs;
  Eigen::LDLT<Eigen::MatrixXd> gram_ldlt(gram);
  const Eigen::VectorXd gd = gram_ldlt.vectorD().cwiseAbs();
  if (gram_ldlt.info() != Eigen::Success || gd.minCoeff() <= 1e-12 * gd.maxCoeff()) {
    throw Error(ErrorKind::SingularDesign, "quantile design is rank deficient");
  }
  Eigen::VectorXd lambda = gram_ldlt.solve(xs.transpose() * c);
  const Eigen::VectorXd res0 = c - xs * lambda;
  const double shift = std::max(1e-8, 0.1 * res0.cwiseAbs().mean());
  Eigen::VectorXd z = res0.cwiseMax(0.0).array() + shift;
  Eigen::VectorXd v = (-res0).cwiseMax(0.0).array() + shift;

  QuantileLpResult result;
  const double scale = 1.0 + ys.cwiseAbs().sum();
  constexpr double kFraction = 0.99995;
  int it = 0;
  for (; it < 200; ++it) {
    const Eigen::VectorXd rp = b - xs.transpose() * a;
    const Eigen::VectorXd rd = c - xs * lambda - z + v;
    const double gap = a.dot(z) + s.dot(v);
    if (gap < 1e-13 * scale && rp.lpNorm<Eigen::Infinity>() < 1e-9 * scale &&
        rd.lpNorm<Eigen::Infinity>() < 1e-9 * scale) {
      result.converged = true;
      break;
    }
    const Eigen::VectorXd d =
        (z.cwiseQuotient(a) + v.cwiseQuotient(s)).cwiseInverse();
    Eigen::MatrixXd normal = xs.transpose() * d.asDiagonal() * xs;
    Eigen::LDLT<Eigen::MatrixXd> solver(normal);

    auto direction = [&](const Eigen::VectorXd& comp_a, const Eigen::VectorXd& comp_s,
                         Eigen::VectorXd& da, Eigen::VectorXd& dl, Eigen::VectorXd& dz,
                         Eigen::VectorXd& dv) {
      const Eigen::VectorXd xi =
          rd - comp_a.cwiseQuotient(a) + comp_s.cwiseQuotient(s);
      dl = solver.solve(rp + xs.transpose() * d.cwiseProduct(xi));
      da = d.cwiseProduct(xs * dl - xi);
      dz = (comp_a - z.cwiseProduct(da)).cwiseQuotient(a);
      dv = (comp_s + v.cwiseProduct(da)).cwiseQuotient(s);
    };

    Eigen::VectorXd da, dl, dz, dv;
    direction(-a.cwiseProduct(z), -s.cwiseProduct(v), da, dl, dz, dv);
    const double ap = std::min(max_step(a, da), max_step(s, -da));
    const double ad = std::min(max_step(z, dz), max_step(v, dv));
    const double mu = gap / static_cast<double>(2 * m);
    const double mu_aff =
        ((a + ap * da).dot(z + ad * dz) + (s - ap * da).dot(v + ad * dv)) /
        static_cast<double>(2 * m);
    const double sigma = std::pow(std::clamp(mu_aff / mu, 0.0, 1.0), 3);

    const Eigen::VectorXd comp_a =
        (Eigen::VectorXd::Constant(m, sigma * mu) - a.cwiseProduct(z) - da.cwiseProduct(dz));
    const Eigen::VectorXd comp_s =
        (Eigen::VectorXd::Constant(m, sigma * mu) - s.cwiseProduct(v) + da.cwiseProduct(dv));
    direction(comp_a, comp_s, da, dl, dz, dv);
    const double step_p = std::min(1.0, kFraction * std::min(max_step(a, da), max_step(s, -da)));
    const double step_d = std::min(1.0, kFraction * std::min(max_step(z, dz), max_step(v, dv)));
    a += step_p * da;
    s -= step_p * da;
    lambda += step_d * dl;
    z += step_d * dz;
    v += step_d * dv;
  }
  result.iterations = it;
  result.beta = -lambda;

  Eigen::VectorXd vertex;
  if (basic_solution(x, y, result.beta, vertex)) {
    const double f_ip = check_objective(x, y, w, tau, result.beta);
    const double f_vx = check_objective(x, y, w, tau, vertex);
    if (f_vx <= f_ip * (1.0 + 1e-12) + 1e-300) result.beta = vertex;
  }
  return result;
}

}  // namespace semimix::detail
