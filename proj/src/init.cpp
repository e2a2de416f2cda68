#include "init.hpp"

#include <limits>

namespace semimix::detail {

std::mt19937_64 make_rng(std::uint64_t seed, std::uint64_t stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32),
                    0x5eed5u};
  return std::mt19937_64(seq);
}

namespace {

Eigen::MatrixXd feature_matrix(const Dataset& data) {
  const auto n = static_cast<Eigen::Index>(data.n());
  Eigen::Index width = 0;
  for (const auto& col : data.x) width += col.is_continuous() ? 1 : col.cardinality;
  Eigen::MatrixXd f = Eigen::MatrixXd::Zero(n, width);
  Eigen::Index c = 0;
  for (const auto& col : data.x) {
    if (col.is_continuous()) {
      const Eigen::Map<const Eigen::VectorXd> v(col.values.data(), n);
      const double mean = v.mean();
      const double sd = std::sqrt((v.array() - mean).square().mean());
      f.col(c) = (v.array() - mean) / (sd > 0.0 ? sd : 1.0);
      ++c;
    } else {
      for (Eigen::Index i = 0; i < n; ++i) f(i, c + col.levels[static_cast<std::size_t>(i)]) = 1.0;
      c += col.cardinality;
    }
  }
  return f;
}

}  // namespace

Responsibilities kmeans_responsibilities(const Dataset& data, std::size_t k,
                                         std::mt19937_64& rng) {
  const Eigen::MatrixXd f = feature_matrix(data);
  const Eigen::Index n = f.rows();
  const auto kk = static_cast<Eigen::Index>(k);
  Eigen::MatrixXd centers(kk, f.cols());

  std::uniform_int_distribution<Eigen::Index> pick(0, n - 1);
  centers.row(0) = f.row(pick(rng));
  Eigen::VectorXd d2 = (f.rowwise() - centers.row(0)).rowwise().squaredNorm();
  for (Eigen::Index c = 1; c < kk; ++c) {
    const double total = d2.sum();
    Eigen::Index chosen = pick(rng);
    if (total > 0.0) {
      std::uniform_real_distribution<double> unif(0.0, total);
      double target = unif(rng);
      for (chosen = 0; chosen < n - 1; ++chosen) {
        target -= d2(chosen);
        if (target <= 0.0) break;
      }
    }
    centers.row(c) = f.row(chosen);
    d2 = d2.cwiseMin((f.rowwise() - centers.row(c)).rowwise().squaredNorm());
  }

  std::vector<int> labels(static_cast<std::size_t>(n), -1);
  for (int it = 0; it < 100; ++it) {
    bool changed = false;
    for (Eigen::Index i = 0; i < n; ++i) {
      Eigen::Index best = 0;
      (centers.rowwise() - f.row(i)).rowwise().squaredNorm().minCoeff(&best);
      if (labels[static_cast<std::size_t>(i)] != static_cast<int>(best)) {
        labels[static_cast<std::size_t>(i)] = static_cast<int>(best);
        changed = true;
      }
    }
    if (!changed) break;
    Eigen::MatrixXd sums = Eigen::MatrixXd::Zero(kk, f.cols());
    Eigen::VectorXd counts = Eigen::VectorXd::Zero(kk);
    for (Eigen::Index i = 0; i < n; ++i) {
      sums.row(labels[static_cast<std::size_t>(i)]) += f.row(i);
      counts(labels[static_cast<std::size_t>(i)]) += 1.0;
    }
    for (Eigen::Index c = 0; c < kk; ++c) {
      // An empty cluster keeps its previous center.
      if (counts(c) > 0.0) centers.row(c) = sums.row(c) / counts(c);
    }
  }
  return hard_responsibilities(labels, k);
}

Responsibilities random_responsibilities(std::size_t n, std::size_t k, std::mt19937_64& rng) {
  std::exponential_distribution<double> expo(1.0);
  Responsibilities t(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(k));
  for (Eigen::Index i = 0; i < t.rows(); ++i) {
    for (Eigen::Index c = 0; c < t.cols(); ++c) t(i, c) = expo(rng);
    t.row(i) /= t.row(i).sum();
  }
  return t;
}

}  // namespace semimix::detail
