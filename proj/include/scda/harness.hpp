#pragma once

// Experiment harnesses over a split dataset: the cross-center grid
// (every training-center row x every test-center column, with and without
// adaptation) and the few-shot curve (base center plus k slides per class
// from the held-out center).

#include <algorithm>
#include <cmath>
#include <map>
#include <string>
#include <vector>

#include "scda/core.hpp"
#include "scda/prototype.hpp"
#include "scda/trainer.hpp"

namespace scda {

namespace detail {

inline VectorXi labels_for(const DatasetManifest& manifest,
                           const std::vector<std::size_t>& indices) {
  VectorXi labels(static_cast<Eigen::Index>(indices.size()));
  for (std::size_t i = 0; i < indices.size(); ++i)
    labels[static_cast<Eigen::Index>(i)] = manifest.slides[indices[i]].label;
  return labels;
}

inline MatrixXd gather_rows(const MatrixXd& all,
                            const std::vector<std::size_t>& indices) {
  MatrixXd out(static_cast<Eigen::Index>(indices.size()), all.cols());
  for (std::size_t i = 0; i < indices.size(); ++i)
    out.row(static_cast<Eigen::Index>(i)) = all.row(static_cast<Eigen::Index>(indices[i]));
  return out;
}

inline std::string center_set_label(const DatasetManifest& manifest,
                                    const std::vector<int>& centers) {
  std::string label;
  for (std::size_t i = 0; i < centers.size(); ++i) {
    if (i) label += "+";
    label += manifest.centers[static_cast<std::size_t>(centers[i])];
  }
  return label;
}

}  // namespace detail

struct GridCell {
  std::string method;  // "raw" or "scda"
  std::vector<int> train_centers;
  std::vector<int> test_centers;
  BalancedAccuracy bacc;
  ConfusionMatrix confusion;
};

struct GridReport {
  std::uint64_t seed = 0;
  std::vector<GridCell> cells;
  std::vector<TrainReport> train_reports;      // one per scda training row
  std::vector<std::string> train_report_rows;  // matching row labels

  const GridCell& cell(const std::string& method, const std::vector<int>& train,
                       const std::vector<int>& test) const {
    for (const auto& c : cells)
      if (c.method == method && c.train_centers == train && c.test_centers == test)
        return c;
    fail(ErrorCode::BadConfig, "no such grid cell");
  }
};

// Rows: each center alone, then the union of all centers (when more than
// one). The raw method classifies normalized slide embeddings directly; the
// scda method first trains the adapter on the row's training pool. A
// single-center scda row raises the cell quota to 2 so in-batch positives
// exist without a second center.
inline GridReport run_crosscenter_grid(const EmbeddingDataset& ds,
                                       const TrainConfig& config,
                                       bool run_raw = true, bool run_scda = true) {
  ds.validate();
  require(ds.manifest.has_splits(), ErrorCode::BadManifest,
          "grid requires a split dataset");
  const int n_centers = static_cast<int>(ds.manifest.centers.size());

  std::vector<std::vector<int>> center_sets;
  for (int h = 0; h < n_centers; ++h) center_sets.push_back({h});
  if (n_centers > 1) {
    std::vector<int> all(static_cast<std::size_t>(n_centers));
    for (int h = 0; h < n_centers; ++h) all[static_cast<std::size_t>(h)] = h;
    center_sets.push_back(std::move(all));
  }

  GridReport report;
  report.seed = config.seed;
  const MatrixXd raw_reps = l2_normalize_rows(ds.Z.cast<double>());

  const auto evaluate_sets = [&](const std::string& method, const MatrixXd& reps,
                                 const std::vector<int>& train_set) {
    const auto train_idx = split_indices(ds.manifest, Split::Train, train_set);
    const PrototypeBank bank =
        build_prototypes(detail::gather_rows(reps, train_idx),
                         detail::labels_for(ds.manifest, train_idx),
                         ds.manifest.classes);
    for (const auto& test_set : center_sets) {
      const auto test_idx = split_indices(ds.manifest, Split::Test, test_set);
      GridCell cell;
      cell.method = method;
      cell.train_centers = train_set;
      cell.test_centers = test_set;
      cell.confusion = evaluate(bank, detail::gather_rows(reps, test_idx),
                                detail::labels_for(ds.manifest, test_idx));
      cell.bacc = balanced_accuracy(cell.confusion);
      report.cells.push_back(std::move(cell));
    }
  };

  for (std::size_t row = 0; row < center_sets.size(); ++row) {
    const auto& train_set = center_sets[row];
    if (run_raw) evaluate_sets("raw", raw_reps, train_set);
    if (run_scda) {
      TrainConfig tc = config;
      tc.seed = mix_seed({config.seed, 0x67726964ULL, static_cast<std::uint64_t>(row)});
      if (train_set.size() < 2)
        tc.batch_spec.quota = std::max(tc.batch_spec.quota, 2);
      const auto train_idx = split_indices(ds.manifest, Split::Train, train_set);
      TrainReport tr = train(ds, train_idx, tc);
      const MatrixXd adapted = transform_embeddings(tr.final_head, ds.Z);
      evaluate_sets("scda", adapted, train_set);
      report.train_report_rows.push_back(detail::center_set_label(ds.manifest, train_set));
      report.train_reports.push_back(std::move(tr));
    }
  }
  return report;
}

struct FewShotConfig {
  int base_center = 0;
  std::vector<int> k_values = {2, 4, 6, 8, 10};
  int n_seeds = 5;
  bool include_zero_shot = true;
  bool include_all = true;
  bool shots_in_prototypes = true;

  void validate() const {
    require(n_seeds >= 1, ErrorCode::BadConfig, "n_seeds must be >= 1");
    for (int k : k_values)
      require(k >= 1, ErrorCode::BadConfig, "k values must be positive");
  }
};

struct FewShotRow {
  std::string method;   // "raw" for the 0-shot baseline, "scda" otherwise
  std::string k_label;  // "0", "2", ..., "all"
  int seed_index = 0;
  int test_center = 0;
  BalancedAccuracy bacc;
};

struct FewShotAggregate {
  std::string method;
  std::string k_label;
  int test_center = 0;
  double mean = 0.0;
  double stddev = 0.0;
  int n_seeds = 0;
};

struct FewShotReport {
  int base_center = 0;
  int heldout_center = 0;
  std::vector<FewShotRow> rows;
  std::vector<FewShotAggregate> aggregates;

  const FewShotAggregate& aggregate(const std::string& k_label, int test_center) const {
    for (const auto& a : aggregates)
      if (a.k_label == k_label && a.test_center == test_center) return a;
    fail(ErrorCode::BadConfig, "no aggregate for k=" + k_label);
  }
};

// k slides per class from the held-out center's training split, drawn
// uniformly without replacement from each class cell.
inline std::vector<std::size_t> select_shots(const DatasetManifest& manifest,
                                             int heldout_center, int k,
                                             std::uint64_t seed) {
  std::vector<std::size_t> shots;
  for (int c = 0; c < static_cast<int>(manifest.classes.size()); ++c) {
    std::vector<std::size_t> cell;
    for (std::size_t i = 0; i < manifest.slides.size(); ++i)
      if (manifest.splits[i] == Split::Train &&
          manifest.slides[i].center == heldout_center &&
          manifest.slides[i].label == c)
        cell.push_back(i);
    require(cell.size() >= static_cast<std::size_t>(k), ErrorCode::NotEnoughShots,
            "class '" + manifest.classes[static_cast<std::size_t>(c)] + "' has only " +
                std::to_string(cell.size()) + " held-out training slides, need " +
                std::to_string(k));
    Rng rng(mix_seed({seed, 0x73686f7473ULL, static_cast<std::uint64_t>(c)}));
    for (std::size_t pos : rng.sample_without_replacement(cell.size(),
                                                          static_cast<std::size_t>(k)))
      shots.push_back(cell[pos]);
  }
  std::sort(shots.begin(), shots.end());
  return shots;
}

inline FewShotReport run_fewshot(const EmbeddingDataset& ds,
                                 const FewShotConfig& fs_config,
                                 const TrainConfig& train_config) {
  ds.validate();
  fs_config.validate();
  require(ds.manifest.has_splits(), ErrorCode::BadManifest,
          "few-shot harness requires a split dataset");
  require(ds.manifest.centers.size() == 2, ErrorCode::BadConfig,
          "few-shot harness expects exactly two centers");
  require(fs_config.base_center == 0 || fs_config.base_center == 1,
          ErrorCode::BadConfig, "base center index out of range");

  FewShotReport report;
  report.base_center = fs_config.base_center;
  report.heldout_center = 1 - fs_config.base_center;

  const auto base_train = split_indices(ds.manifest, Split::Train, {report.base_center});
  const auto held_train = split_indices(ds.manifest, Split::Train, {report.heldout_center});
  const std::vector<std::vector<std::size_t>> test_sets = {
      split_indices(ds.manifest, Split::Test, {report.base_center}),
      split_indices(ds.manifest, Split::Test, {report.heldout_center})};
  const std::vector<int> test_centers = {report.base_center, report.heldout_center};

  const MatrixXd raw_reps = l2_normalize_rows(ds.Z.cast<double>());

  const auto emit = [&](const std::string& method, const std::string& k_label,
                        int seed_index, const MatrixXd& reps,
                        const std::vector<std::size_t>& proto_idx) {
    const PrototypeBank bank =
        build_prototypes(detail::gather_rows(reps, proto_idx),
                         detail::labels_for(ds.manifest, proto_idx),
                         ds.manifest.classes);
    for (std::size_t t = 0; t < test_sets.size(); ++t) {
      FewShotRow row;
      row.method = method;
      row.k_label = k_label;
      row.seed_index = seed_index;
      row.test_center = test_centers[t];
      row.bacc = balanced_accuracy(
          evaluate(bank, detail::gather_rows(reps, test_sets[t]),
                   detail::labels_for(ds.manifest, test_sets[t])));
      report.rows.push_back(std::move(row));
    }
  };

  const auto train_and_emit = [&](const std::string& k_label, std::uint64_t k_salt,
                                  int seed_index, std::vector<std::size_t> train_idx,
                                  const std::vector<std::size_t>& shot_idx) {
    TrainConfig tc = train_config;
    tc.seed = mix_seed({train_config.seed, 0x6673ULL,
                        static_cast<std::uint64_t>(seed_index), k_salt});
    const TrainReport tr = train(ds, train_idx, tc);
    const MatrixXd adapted = transform_embeddings(tr.final_head, ds.Z);
    std::vector<std::size_t> proto_idx = train_idx;
    if (!fs_config.shots_in_prototypes && !shot_idx.empty()) {
      proto_idx.clear();
      for (std::size_t i : train_idx)
        if (std::find(shot_idx.begin(), shot_idx.end(), i) == shot_idx.end())
          proto_idx.push_back(i);
    }
    emit("scda", k_label, seed_index, adapted, proto_idx);
  };

  for (int seed_index = 0; seed_index < fs_config.n_seeds; ++seed_index) {
    if (fs_config.include_zero_shot)
      emit("raw", "0", seed_index, raw_reps, base_train);
    for (int k : fs_config.k_values) {
      const auto shots = select_shots(
          ds.manifest, report.heldout_center, k,
          mix_seed({train_config.seed, static_cast<std::uint64_t>(seed_index),
                    static_cast<std::uint64_t>(k)}));
      std::vector<std::size_t> train_idx = base_train;
      train_idx.insert(train_idx.end(), shots.begin(), shots.end());
      train_and_emit(std::to_string(k), static_cast<std::uint64_t>(k), seed_index,
                     std::move(train_idx), shots);
    }
    if (fs_config.include_all) {
      std::vector<std::size_t> train_idx = base_train;
      train_idx.insert(train_idx.end(), held_train.begin(), held_train.end());
      std::sort(train_idx.begin(), train_idx.end());
      train_and_emit("all", 0xa11ULL, seed_index, std::move(train_idx), {});
    }
  }

  // Aggregate over seeds per (method, k, test center), in row order.
  std::vector<std::pair<std::string, int>> keys;
  for (const auto& row : report.rows) {
    const std::pair<std::string, int> key{row.method + "/" + row.k_label, row.test_center};
    if (std::find(keys.begin(), keys.end(), key) == keys.end()) keys.push_back(key);
  }
  for (const auto& [label, test_center] : keys) {
    FewShotAggregate agg;
    const auto slash = label.find('/');
    agg.method = label.substr(0, slash);
    agg.k_label = label.substr(slash + 1);
    agg.test_center = test_center;
    std::vector<double> values;
    for (const auto& row : report.rows)
      if (row.method == agg.method && row.k_label == agg.k_label &&
          row.test_center == test_center)
        values.push_back(row.bacc.value);
    agg.n_seeds = static_cast<int>(values.size());
    for (double v : values) agg.mean += v;
    agg.mean /= static_cast<double>(values.size());
    if (values.size() > 1) {
      double ss = 0.0;
      for (double v : values) ss += (v - agg.mean) * (v - agg.mean);
      agg.stddev = std::sqrt(ss / static_cast<double>(values.size() - 1));
    }
    report.aggregates.push_back(std::move(agg));
  }
  return report;
}

}  // namespace scda
