#pragma once

// Nearest-class-prototype classification: per-class prototypes are the
// L2-normalized class means of unit-norm representations, prediction is the
// argmax of prototype similarities, and the headline metric is balanced
// accuracy (mean per-class recall).

#include <string>
#include <vector>

#include "scda/core.hpp"
#include "scda/types.hpp"

namespace scda {

struct PrototypeBank {
  MatrixXd W;  // n_classes x d, unit rows
  std::vector<std::string> class_names;

  int n_classes() const { return static_cast<int>(W.rows()); }
};

inline PrototypeBank build_prototypes(const MatrixXd& reps, const VectorXi& labels,
                                      const std::vector<std::string>& class_names) {
  const int n_classes = static_cast<int>(class_names.size());
  require(reps.rows() == labels.size(), ErrorCode::ShapeMismatch,
          "representation and label counts differ");
  for (Eigen::Index i = 0; i < reps.rows(); ++i)
    require(std::abs(reps.row(i).norm() - 1.0) <= 1e-6,
            ErrorCode::UnnormalizedInput,
            "representation row " + std::to_string(i) + " is not unit norm");

  PrototypeBank bank;
  bank.class_names = class_names;
  bank.W.resize(n_classes, reps.cols());
  for (int s = 0; s < n_classes; ++s) {
    VectorXd mean = VectorXd::Zero(reps.cols());
    long count = 0;
    for (Eigen::Index i = 0; i < reps.rows(); ++i) {
      if (labels[i] != s) continue;
      mean += reps.row(i).transpose();
      ++count;
    }
    require(count > 0, ErrorCode::MissingClass,
            "no samples for class '" + class_names[static_cast<std::size_t>(s)] + "'");
    bank.W.row(s) = l2_normalize(mean / static_cast<double>(count)).transpose();
  }
  return bank;
}

// Argmax of prototype similarities; ties break toward the lowest class index.
inline int predict(const PrototypeBank& bank, const VectorXd& c) {
  require(c.size() == bank.W.cols(), ErrorCode::DimensionMismatch,
          "query dimension does not match the prototypes");
  const VectorXd scores = bank.W * c;
  int best = 0;
  for (int s = 1; s < bank.n_classes(); ++s)
    if (scores[s] > scores[best]) best = s;
  return best;
}

struct ConfusionMatrix {
  Eigen::Matrix<long, Eigen::Dynamic, Eigen::Dynamic> counts;  // true x predicted

  long total() const { return counts.sum(); }
};

inline ConfusionMatrix evaluate(const PrototypeBank& bank, const MatrixXd& reps,
                                const VectorXi& labels) {
  require(reps.rows() > 0, ErrorCode::EmptyMatrix, "test set is empty");
  require(reps.rows() == labels.size(), ErrorCode::ShapeMismatch,
          "representation and label counts differ");
  ConfusionMatrix cm;
  cm.counts.setZero(bank.n_classes(), bank.n_classes());
  for (Eigen::Index i = 0; i < reps.rows(); ++i) {
    const int truth = labels[i];
    require(truth >= 0 && truth < bank.n_classes(), ErrorCode::MissingClass,
            "label out of range at row " + std::to_string(i));
    cm.counts(truth, predict(bank, reps.row(i).transpose()))++;
  }
  return cm;
}

struct BalancedAccuracy {
  double value = 0.0;
  std::vector<int> skipped_classes;  // absent from the test set

  bool all_classes_present() const { return skipped_classes.empty(); }
};

// Mean per-class recall over classes that appear in the test set.
inline BalancedAccuracy balanced_accuracy(const ConfusionMatrix& cm) {
  require(cm.counts.sum() > 0, ErrorCode::EmptyMatrix, "confusion matrix is empty");
  BalancedAccuracy result;
  double sum = 0.0;
  int scored = 0;
  for (Eigen::Index s = 0; s < cm.counts.rows(); ++s) {
    const long row_total = cm.counts.row(s).sum();
    if (row_total == 0) {
      result.skipped_classes.push_back(static_cast<int>(s));
      continue;
    }
    sum += static_cast<double>(cm.counts(s, s)) / static_cast<double>(row_total);
    ++scored;
  }
  result.value = sum / static_cast<double>(scored);
  return result;
}

}  // namespace scda
