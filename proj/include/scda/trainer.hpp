#pragma once

// Optimization loop for the adapter head: constrained batch -> forward ->
// supervised contrastive loss on the common-space rows -> manual backward ->
// Adam. Single-threaded and fully deterministic for a given config.

#include <cmath>
#include <vector>

#include "scda/adapter.hpp"
#include "scda/sampler.hpp"
#include "scda/supcon.hpp"
#include "scda/types.hpp"

namespace scda {

struct TrainConfig {
  double temperature = 0.1;
  double learning_rate = 1e-3;
  int steps = 1000;
  BatchSpec batch_spec;
  std::uint64_t seed = 0;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  HeadShape head_shape = HeadShape::Linear;
  int hidden_dim = 64;

  void validate() const {
    require(temperature > 0.0, ErrorCode::NonPositiveTemperature,
            "temperature must be positive");
    require(learning_rate > 0.0 && adam_eps > 0.0, ErrorCode::BadConfig,
            "learning_rate and adam_eps must be positive");
    require(steps >= 0, ErrorCode::BadConfig, "steps must be >= 0");
    require(adam_beta1 > 0.0 && adam_beta1 < 1.0 && adam_beta2 > 0.0 &&
                adam_beta2 < 1.0,
            ErrorCode::BadConfig, "Adam betas must lie in (0, 1)");
  }
};

struct TrainReport {
  std::vector<double> loss_trace;       // raw per-step loss (sum over anchors)
  std::vector<int> anchors_used_trace;  // per-step anchor counts
  AdapterHead final_head;
};

class AdamOptimizer {
 public:
  AdamOptimizer(const AdapterHead& head, double lr, double beta1, double beta2,
                double eps)
      : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {
    for (const auto& l : head.layers) {
      m_.push_back({MatrixXd::Zero(l.weight.rows(), l.weight.cols()),
                    VectorXd::Zero(l.bias.size())});
      v_.push_back({MatrixXd::Zero(l.weight.rows(), l.weight.cols()),
                    VectorXd::Zero(l.bias.size())});
    }
  }

  void step(AdapterHead& head, const HeadGradients& grads) {
    ++t_;
    const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
    for (std::size_t l = 0; l < head.layers.size(); ++l) {
      update(head.layers[l].weight, grads.layers[l].weight, m_[l].weight,
             v_[l].weight, bc1, bc2);
      update(head.layers[l].bias, grads.layers[l].bias, m_[l].bias, v_[l].bias,
             bc1, bc2);
    }
  }

 private:
  template <typename P, typename G>
  void update(P& param, const G& grad, P& m, P& v, double bc1, double bc2) {
    m = beta1_ * m + (1.0 - beta1_) * grad;
    v = beta2_ * v.array().matrix() + (1.0 - beta2_) * grad.array().square().matrix();
    param.array() -=
        lr_ * (m.array() / bc1) / ((v.array() / bc2).sqrt() + eps_);
  }

  double lr_, beta1_, beta2_, eps_;
  long t_ = 0;
  std::vector<DenseLayer> m_, v_;
};

// Trains a fresh head on the given training pool of slide indices.
// The per-step gradient is scaled by 1/anchors_used so its magnitude does
// not depend on batch composition; loss_trace keeps the unscaled sum.
inline TrainReport train(const EmbeddingDataset& ds,
                         const std::vector<std::size_t>& train_indices,
                         const TrainConfig& config) {
  config.validate();
  ds.validate();
  const int d = static_cast<int>(ds.Z.cols());

  TrainReport report;
  report.final_head = init_head(d, config.head_shape, config.hidden_dim, config.seed);
  if (config.steps == 0) return report;

  const TrainingPool pool = make_pool(ds.manifest, train_indices);
  BatchSpec spec = config.batch_spec;
  spec.steps_per_epoch = config.steps;
  const BatchPlan plan = make_batches(pool, spec, config.seed);

  AdapterHead& head = report.final_head;
  AdamOptimizer adam(head, config.learning_rate, config.adam_beta1,
                     config.adam_beta2, config.adam_eps);
  report.loss_trace.reserve(static_cast<std::size_t>(config.steps));
  report.anchors_used_trace.reserve(static_cast<std::size_t>(config.steps));

  for (const auto& batch : plan.batches) {
    MatrixXd z(static_cast<Eigen::Index>(batch.size()), d);
    VectorXi labels(static_cast<Eigen::Index>(batch.size()));
    for (std::size_t b = 0; b < batch.size(); ++b) {
      z.row(static_cast<Eigen::Index>(b)) =
          ds.Z.row(static_cast<Eigen::Index>(batch[b])).cast<double>();
      labels[static_cast<Eigen::Index>(b)] = ds.manifest.slides[batch[b]].label;
    }

    const ForwardCache cache = forward_cached(head, z);
    const LossResult loss =
        supcon_loss({cache.output, labels, config.temperature});
    require(std::isfinite(loss.loss), ErrorCode::DivergenceDetected,
            "loss became non-finite at step " +
                std::to_string(report.loss_trace.size()));
    report.loss_trace.push_back(loss.loss);
    report.anchors_used_trace.push_back(loss.anchors_used);

    const double scale = 1.0 / std::max(loss.anchors_used, 1);
    const HeadGradients grads = backward(head, cache, loss.grad * scale);
    adam.step(head, grads);
  }
  return report;
}

}  // namespace scda
