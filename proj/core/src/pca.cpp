#include <cmath>

#include <Eigen/Dense>
#include <fmt/format.h>

#include "emowatch/errors.hpp"
#include "emowatch/features.hpp"

namespace emowatch {

PcaModel fit_pca(const FeatureMatrix& m, std::size_t k) {
  const std::size_t d = m.cols();
  if (k == 0 || k > d) throw SpecError(fmt::format("PCA with {} components on {} columns", k, d));
  if (m.rows() < 2) throw InsufficientDataError("PCA needs at least 2 rows");

  const auto n = static_cast<Eigen::Index>(m.rows());
  Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> raw(
      m.values().data(), n, static_cast<Eigen::Index>(d));

  PcaModel p;
  p.mean.resize(d);
  p.scale.resize(d);
  Eigen::MatrixXd z(n, static_cast<Eigen::Index>(d));
  for (std::size_t c = 0; c < d; ++c) {
    const auto col = raw.col(static_cast<Eigen::Index>(c));
    const double mean = col.mean();
    const double sd = std::sqrt((col.array() - mean).square().mean());
    p.mean[c] = mean;
    p.scale[c] = sd;
    if (sd > 0.0) {
      z.col(static_cast<Eigen::Index>(c)) = (col.array() - mean) / sd;
    } else {
      z.col(static_cast<Eigen::Index>(c)).setZero();
    }
  }

  const Eigen::MatrixXd cov = (z.transpose() * z) / static_cast<double>(n);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(cov);
  if (eig.info() != Eigen::Success) throw Error("PCA eigendecomposition failed");

  // Eigen returns ascending eigenvalues.
  for (std::size_t j = 0; j < k; ++j) {
    const Eigen::Index src = static_cast<Eigen::Index>(d - 1 - j);
    Eigen::VectorXd v = eig.eigenvectors().col(src);
    Eigen::Index arg = 0;
    v.cwiseAbs().maxCoeff(&arg);
    if (v(arg) < 0) v = -v;
    p.components.emplace_back(v.data(), v.data() + v.size());
    p.eigenvalues.push_back(eig.eigenvalues()(src));
  }
  return p;
}

std::vector<double> apply_pca(const PcaModel& p, std::span<const double> row) {
  if (row.size() != p.mean.size()) {
    throw ShapeError(fmt::format("PCA expects {} columns, got {}", p.mean.size(), row.size()));
  }
  std::vector<double> out(p.components.size(), 0.0);
  for (std::size_t j = 0; j < p.components.size(); ++j) {
    double acc = 0.0;
    for (std::size_t c = 0; c < row.size(); ++c) {
      const double z = p.scale[c] > 0.0 ? (row[c] - p.mean[c]) / p.scale[c] : 0.0;
      acc += z * p.components[j][c];
    }
    out[j] = acc;
  }
  return out;
}

FeatureMatrix apply_pca(const PcaModel& p, const FeatureMatrix& m) {
  std::vector<std::string> names;
  for (std::size_t j = 0; j < p.components.size(); ++j) names.push_back(fmt::format("pc{}", j + 1));
  FeatureMatrix out(std::move(names));
  for (std::size_t r = 0; r < m.rows(); ++r) {
    out.append_row(apply_pca(p, m.row(r)), m.labels()[r], m.group_ids()[r]);
  }
  return out;
}

}  // namespace emowatch
