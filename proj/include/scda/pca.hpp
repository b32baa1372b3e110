#pragma once

// Deterministic top-2 principal component projection (the 2D view used for
// embedding-space plots). Exact eigendecomposition of the centered
// covariance; no stochastic optimization, so reruns are bit-identical.

#include <Eigen/Dense>
#include <cmath>

#include "scda/types.hpp"

namespace scda {

struct Projection2D {
  Eigen::Matrix<double, 2, Eigen::Dynamic> basis;  // orthonormal rows
  Eigen::Matrix<double, Eigen::Dynamic, 2> coords;
  double explained_variance_fraction = 0.0;
};

inline Projection2D pca2d(const MatrixXd& data) {
  require(data.rows() >= 3, ErrorCode::ShapeMismatch, "need at least 3 rows");
  require(data.cols() >= 2, ErrorCode::BadDimension, "need dimension >= 2");
  const Eigen::RowVectorXd mean = data.colwise().mean();
  const MatrixXd centered = data.rowwise() - mean;
  const MatrixXd cov =
      centered.transpose() * centered / static_cast<double>(data.rows() - 1);

  Eigen::SelfAdjointEigenSolver<MatrixXd> solver(cov);
  require(solver.info() == Eigen::Success, ErrorCode::RankDeficient,
          "eigen decomposition failed");
  const VectorXd evals = solver.eigenvalues();  // ascending
  const Eigen::Index last = evals.size() - 1;
  require(evals[last - 1] > 1e-12, ErrorCode::RankDeficient,
          "covariance has fewer than 2 nonzero eigenvalues");

  Projection2D proj;
  proj.basis.resize(2, data.cols());
  proj.basis.row(0) = solver.eigenvectors().col(last).transpose();
  proj.basis.row(1) = solver.eigenvectors().col(last - 1).transpose();
  // Sign convention: the largest-magnitude entry of each basis row is
  // positive (first such entry on ties).
  for (int r = 0; r < 2; ++r) {
    Eigen::Index arg = 0;
    proj.basis.row(r).cwiseAbs().maxCoeff(&arg);
    if (proj.basis(r, arg) < 0.0) proj.basis.row(r) = -proj.basis.row(r);
  }
  proj.coords = centered * proj.basis.transpose();
  const double total = evals.cwiseMax(0.0).sum();
  proj.explained_variance_fraction = (evals[last] + evals[last - 1]) / total;
  return proj;
}

}  // namespace scda
