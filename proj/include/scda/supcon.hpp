#pragma once

// Supervised contrastive loss over a uni-viewed batch, with its analytic
// gradient with respect to the input representations.
//
// For anchor i let A(i) be all other batch indices and P(i) the subset of
// A(i) sharing anchor i's label. With s_ij = clamp(z_i . z_j, -1, 1) / tau:
//
//   L = sum_{i : |P(i)| > 0}  (1/|P(i)|) * sum_{p in P(i)} [ lse_i - s_ip ]
//   lse_i = log sum_{a in A(i)} exp(s_ia)
//
// i.e. the average over positives is taken outside the log, which reduces to
// the single-positive form when |P(i)| = 1. Anchors without positives
// contribute nothing but still appear in other anchors' denominators.
//
// The gradient is the exact derivative of the expression above, treating the
// representations as free variables (saturated clamp entries have zero
// slope); any normalization Jacobian belongs to the caller.

#include <cmath>
#include <limits>

#include "scda/types.hpp"

namespace scda {

struct LossBatch {
  MatrixXd reps;  // B x d, rows unit norm
  VectorXi labels;
  double temperature = 0.1;
};

struct LossResult {
  double loss = 0.0;
  MatrixXd grad;  // B x d, dL/dreps
  int anchors_used = 0;
};

// Dot-product matrix of unit-norm rows; entries clamped to [-1, 1].
inline MatrixXd pairwise_similarity(const MatrixXd& reps) {
  for (Eigen::Index i = 0; i < reps.rows(); ++i)
    require(std::abs(reps.row(i).norm() - 1.0) <= 1e-6,
            ErrorCode::UnnormalizedInput,
            "row " + std::to_string(i) + " is not unit norm");
  MatrixXd s = reps * reps.transpose();
  return s.cwiseMax(-1.0).cwiseMin(1.0);
}

// Core evaluation without input validation; callers guarantee shapes.
// Log-sum-exp uses per-row max subtraction; reductions run in ascending
// index order so results are bitwise reproducible.
inline LossResult supcon_loss_unchecked(const MatrixXd& reps,
                                        const VectorXi& labels, double tau) {
  const Eigen::Index b = reps.rows();
  const MatrixXd dots = reps * reps.transpose();
  const MatrixXd sims = dots.cwiseMax(-1.0).cwiseMin(1.0) / tau;

  LossResult result;
  MatrixXd dloss_dsims = MatrixXd::Zero(b, b);  // ordered (anchor, other)

  for (Eigen::Index i = 0; i < b; ++i) {
    int n_pos = 0;
    for (Eigen::Index j = 0; j < b; ++j)
      if (j != i && labels[j] == labels[i]) ++n_pos;
    if (n_pos == 0) continue;
    ++result.anchors_used;

    double row_max = -std::numeric_limits<double>::infinity();
    for (Eigen::Index a = 0; a < b; ++a)
      if (a != i) row_max = std::max(row_max, sims(i, a));
    double denom = 0.0;
    for (Eigen::Index a = 0; a < b; ++a)
      if (a != i) denom += std::exp(sims(i, a) - row_max);
    const double lse = row_max + std::log(denom);

    double pos_mean = 0.0;
    for (Eigen::Index p = 0; p < b; ++p)
      if (p != i && labels[p] == labels[i]) pos_mean += sims(i, p);
    pos_mean /= n_pos;
    result.loss += lse - pos_mean;

    for (Eigen::Index a = 0; a < b; ++a) {
      if (a == i) continue;
      const double softmax = std::exp(sims(i, a) - row_max) / denom;
      const double pos_term = labels[a] == labels[i] ? 1.0 / n_pos : 0.0;
      dloss_dsims(i, a) = softmax - pos_term;
    }
  }

  // z_i . z_j feeds both s_ij (anchor i) and s_ji (anchor j); saturated
  // clamp entries pass no gradient.
  MatrixXd coeff = dloss_dsims + dloss_dsims.transpose();
  for (Eigen::Index i = 0; i < b; ++i)
    for (Eigen::Index j = 0; j < b; ++j)
      if (std::abs(dots(i, j)) > 1.0) coeff(i, j) = 0.0;
  result.grad = (coeff * reps) / tau;
  return result;
}

inline LossResult supcon_loss(const LossBatch& batch) {
  require(batch.temperature > 0.0, ErrorCode::NonPositiveTemperature,
          "temperature must be positive");
  require(batch.reps.rows() >= 2, ErrorCode::ShapeMismatch,
          "batch needs at least two representations");
  require(batch.labels.size() == batch.reps.rows(), ErrorCode::ShapeMismatch,
          "label count does not match batch size");
  for (Eigen::Index i = 0; i < batch.reps.rows(); ++i)
    require(std::abs(batch.reps.row(i).norm() - 1.0) <= 1e-6,
            ErrorCode::UnnormalizedInput,
            "row " + std::to_string(i) + " is not unit norm");
  return supcon_loss_unchecked(batch.reps, batch.labels, batch.temperature);
}

}  // namespace scda
