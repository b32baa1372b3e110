#pragma once

// BGAP aggregation, L2 normalization, and stratified dataset splitting.

#include <algorithm>
#include <cmath>
#include <map>
#include <utility>

#include "scda/rng.hpp"
#include "scda/types.hpp"

namespace scda {

constexpr double kZeroNormTol = 1e-12;

// Parameter-free bag aggregation: column means of the patch matrix.
// Column sums use Neumaier compensation in double so the result is exact for
// float32 inputs and therefore invariant under row permutation.
inline SlideEmbedding bgap(const SlideBag& bag) {
  bag.validate();
  const Eigen::Index n = bag.patches.rows();
  const Eigen::Index d = bag.patches.cols();
  VectorXf z(d);
  for (Eigen::Index j = 0; j < d; ++j) {
    double sum = 0.0, comp = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      const double v = static_cast<double>(bag.patches(i, j));
      const double t = sum + v;
      if (std::abs(sum) >= std::abs(v))
        comp += (sum - t) + v;
      else
        comp += (v - t) + sum;
      sum = t;
    }
    z[j] = static_cast<float>((sum + comp) / static_cast<double>(n));
  }
  return SlideEmbedding{bag.slide_id, bag.center_id, bag.class_label, std::move(z)};
}

inline VectorXd l2_normalize(const VectorXd& v) {
  const double norm = v.norm();
  require(norm >= kZeroNormTol, ErrorCode::ZeroVector,
          "cannot normalize a (near-)zero vector");
  return v / norm;
}

// Row-wise normalization of a representation matrix.
inline MatrixXd l2_normalize_rows(const MatrixXd& m) {
  MatrixXd out(m.rows(), m.cols());
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    out.row(i) = l2_normalize(m.row(i).transpose()).transpose();
  return out;
}

// BGAP over every bag of a dataset, in slide order.
inline EmbeddingDataset aggregate_bags(const BagDataset& ds) {
  ds.manifest.validate();
  require(ds.bags.size() == ds.manifest.slides.size(), ErrorCode::DimensionMismatch,
          "bag count does not match manifest slide count");
  EmbeddingDataset out;
  out.manifest = ds.manifest;
  const Eigen::Index d = ds.bags.empty() ? 0 : ds.bags.front().cols();
  out.Z.resize(static_cast<Eigen::Index>(ds.bags.size()), d);
  for (std::size_t i = 0; i < ds.bags.size(); ++i) {
    const auto& rec = ds.manifest.slides[i];
    require(ds.bags[i].cols() == d, ErrorCode::DimensionMismatch,
            "bag '" + rec.id + "' has mismatched embedding dimension");
    SlideBag bag{rec.id, ds.manifest.centers[rec.center], rec.label, ds.bags[i]};
    out.Z.row(static_cast<Eigen::Index>(i)) = bgap(bag).z.transpose();
  }
  return out;
}

// Stratified 80/20-style split. Each (class, center) cell is shuffled with
// its own seed stream and contributes round(train_fraction * cell_size)
// slides to train, clamped so every cell keeps at least one train slide and,
// when the cell has >= 2 slides, at least one test slide.
inline DatasetManifest split_dataset(const DatasetManifest& manifest,
                                     double train_fraction,
                                     std::uint64_t seed) {
  manifest.validate();
  require(train_fraction > 0.0 && train_fraction < 1.0,
          ErrorCode::DegenerateFraction,
          "train_fraction must lie strictly between 0 and 1");

  // Collect cells; sort members by slide id so the assignment depends only on
  // manifest content, not record order.
  std::map<std::pair<int, int>, std::vector<std::size_t>> cells;
  for (std::size_t i = 0; i < manifest.slides.size(); ++i) {
    const auto& s = manifest.slides[i];
    cells[{s.label, s.center}].push_back(i);
  }
  for (int c = 0; c < static_cast<int>(manifest.classes.size()); ++c)
    for (int h = 0; h < static_cast<int>(manifest.centers.size()); ++h)
      require(cells.count({c, h}) > 0, ErrorCode::EmptyCell,
              "no slides for class '" + manifest.classes[c] + "' at center '" +
                  manifest.centers[h] + "'");

  DatasetManifest out = manifest;
  out.splits.assign(manifest.slides.size(), Split::Test);
  for (auto& [key, members] : cells) {
    std::sort(members.begin(), members.end(), [&](std::size_t a, std::size_t b) {
      return manifest.slides[a].id < manifest.slides[b].id;
    });
    Rng rng(mix_seed({seed, static_cast<std::uint64_t>(key.first),
                      static_cast<std::uint64_t>(key.second)}));
    rng.shuffle(members);
    const std::size_t m = members.size();
    std::size_t n_train = static_cast<std::size_t>(
        std::llround(train_fraction * static_cast<double>(m)));
    n_train = std::max<std::size_t>(n_train, 1);
    if (m >= 2) n_train = std::min(n_train, m - 1);
    for (std::size_t i = 0; i < m; ++i)
      out.splits[members[i]] = i < n_train ? Split::Train : Split::Test;
  }
  return out;
}

// Indices of slides in a given split, optionally restricted to a center set.
inline std::vector<std::size_t> split_indices(const DatasetManifest& manifest,
                                              Split which,
                                              const std::vector<int>& centers = {}) {
  require(manifest.has_splits(), ErrorCode::BadManifest,
          "manifest has no split assignment");
  std::vector<std::size_t> idx;
  for (std::size_t i = 0; i < manifest.slides.size(); ++i) {
    if (manifest.splits[i] != which) continue;
    if (!centers.empty() &&
        std::find(centers.begin(), centers.end(), manifest.slides[i].center) ==
            centers.end())
      continue;
    idx.push_back(i);
  }
  return idx;
}

}  // namespace scda
