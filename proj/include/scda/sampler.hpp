#pragma once

// Batch construction under the cross-domain constraint: every batch must
// contain, for every class, at least one sample from each center present in
// the training pool. Realized by quota-per-cell composition: each
// (class, center) cell contributes exactly its quota to every batch.

#include <map>
#include <utility>
#include <vector>

#include "scda/rng.hpp"
#include "scda/types.hpp"

namespace scda {

struct BatchSpec {
  int quota = 1;  // samples per (class, center) cell per batch
  std::map<std::pair<int, int>, int> quota_overrides;
  int steps_per_epoch = 1;
  bool allow_replacement = true;

  int quota_for(int class_idx, int center_idx) const {
    auto it = quota_overrides.find({class_idx, center_idx});
    return it != quota_overrides.end() ? it->second : quota;
  }
};

// Training subset addressed by global slide index, bucketed per cell.
struct TrainingPool {
  int n_classes = 0;
  std::vector<int> centers_present;  // ascending center indices
  // (class, center) -> global slide indices
  std::map<std::pair<int, int>, std::vector<std::size_t>> cells;

  std::size_t size() const {
    std::size_t n = 0;
    for (const auto& [_, v] : cells) n += v.size();
    return n;
  }
};

inline TrainingPool make_pool(const DatasetManifest& manifest,
                              const std::vector<std::size_t>& slide_indices) {
  TrainingPool pool;
  pool.n_classes = static_cast<int>(manifest.classes.size());
  std::vector<bool> seen(manifest.centers.size(), false);
  for (std::size_t idx : slide_indices) {
    const auto& s = manifest.slides.at(idx);
    seen[static_cast<std::size_t>(s.center)] = true;
  }
  for (std::size_t h = 0; h < seen.size(); ++h)
    if (seen[h]) pool.centers_present.push_back(static_cast<int>(h));
  for (int c = 0; c < pool.n_classes; ++c)
    for (int h : pool.centers_present) pool.cells[{c, h}] = {};
  for (std::size_t idx : slide_indices) {
    const auto& s = manifest.slides.at(idx);
    pool.cells[{s.label, s.center}].push_back(idx);
  }
  return pool;
}

struct CellFeasibility {
  int class_idx = 0;
  int center_idx = 0;
  std::size_t pool_count = 0;
  int quota = 0;
};

struct FeasibilityReport {
  std::vector<CellFeasibility> cells;
  std::size_t batch_size = 0;
  bool feasible_without_replacement = true;
  bool feasible_with_replacement = true;
};

inline FeasibilityReport check_feasibility(const TrainingPool& pool,
                                           const BatchSpec& spec) {
  require(pool.size() > 0, ErrorCode::EmptyCell, "training pool is empty");
  FeasibilityReport report;
  for (const auto& [key, members] : pool.cells) {
    CellFeasibility cf;
    cf.class_idx = key.first;
    cf.center_idx = key.second;
    cf.pool_count = members.size();
    cf.quota = spec.quota_for(key.first, key.second);
    require(cf.quota >= 1, ErrorCode::InfeasibleSpec, "cell quota must be >= 1");
    require(cf.pool_count >= 1, ErrorCode::EmptyCell,
            "no training samples for class " + std::to_string(cf.class_idx) +
                " at center " + std::to_string(cf.center_idx));
    if (cf.pool_count < static_cast<std::size_t>(cf.quota))
      report.feasible_without_replacement = false;
    report.batch_size += static_cast<std::size_t>(cf.quota);
    report.cells.push_back(cf);
  }
  return report;
}

struct BatchPlan {
  std::vector<std::vector<std::size_t>> batches;  // global slide indices
  std::uint64_t seed = 0;
};

// Draws every batch independently: distinct samples within a cell whenever
// the cell can supply the quota, independent uniform draws otherwise.
inline BatchPlan make_batches(const TrainingPool& pool, const BatchSpec& spec,
                              std::uint64_t seed) {
  const FeasibilityReport report = check_feasibility(pool, spec);
  if (!spec.allow_replacement)
    require(report.feasible_without_replacement, ErrorCode::InfeasibleSpec,
            "some cell is smaller than its quota and replacement is disabled");
  require(spec.steps_per_epoch >= 1, ErrorCode::InfeasibleSpec,
          "steps_per_epoch must be >= 1");

  Rng rng(mix_seed({seed, 0x6261746368ULL}));
  BatchPlan plan;
  plan.seed = seed;
  plan.batches.reserve(static_cast<std::size_t>(spec.steps_per_epoch));
  for (int step = 0; step < spec.steps_per_epoch; ++step) {
    std::vector<std::size_t> batch;
    batch.reserve(report.batch_size);
    for (const auto& [key, members] : pool.cells) {
      const int quota = spec.quota_for(key.first, key.second);
      if (members.size() >= static_cast<std::size_t>(quota)) {
        for (std::size_t pos :
             rng.sample_without_replacement(members.size(), static_cast<std::size_t>(quota)))
          batch.push_back(members[pos]);
      } else {
        for (int q = 0; q < quota; ++q)
          batch.push_back(members[rng.uniform_below(members.size())]);
      }
    }
    plan.batches.push_back(std::move(batch));
  }
  return plan;
}

}  // namespace scda
