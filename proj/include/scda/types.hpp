#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <optional>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "scda/error.hpp"

namespace scda {

// Row-major so in-memory layout matches the on-disk row-major float32 format.
using MatrixRf = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatrixRd = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Eigen::MatrixXd;
using Eigen::VectorXd;
using Eigen::VectorXf;
using Eigen::VectorXi;

enum class Split : std::uint8_t { Train, Test };

// One slide's bag of patch embeddings plus provenance.
struct SlideBag {
  std::string slide_id;
  std::string center_id;
  int class_label = -1;
  MatrixRf patches;  // N x d

  void validate() const {
    require(patches.rows() >= 1, ErrorCode::EmptyBag,
            "bag '" + slide_id + "' has no patches");
    require(patches.cols() >= 2, ErrorCode::BadDimension,
            "bag '" + slide_id + "' has embedding dimension < 2");
    require(patches.allFinite(), ErrorCode::NonFiniteInput,
            "bag '" + slide_id + "' contains non-finite values");
  }
};

// Aggregated slide-level embedding.
struct SlideEmbedding {
  std::string slide_id;
  std::string center_id;
  int class_label = -1;
  VectorXf z;
};

struct SlideRecord {
  std::string id;
  int center = -1;  // index into DatasetManifest::centers
  int label = -1;   // index into DatasetManifest::classes
  int n_patches = 0;
  std::string patches_file;  // optional; relative to the manifest
};

// Census of a dataset: class/center registries, slide records, optional
// train/test assignment, and an optional dataset-level embedding matrix file
// whose rows follow the slide order.
struct DatasetManifest {
  std::vector<std::string> classes;
  std::vector<std::string> centers;
  std::vector<SlideRecord> slides;
  std::vector<Split> splits;  // empty or one entry per slide
  std::string embeddings_file;

  bool has_splits() const { return !splits.empty(); }

  int class_index(const std::string& name) const {
    for (std::size_t i = 0; i < classes.size(); ++i)
      if (classes[i] == name) return static_cast<int>(i);
    return -1;
  }

  int center_index(const std::string& name) const {
    for (std::size_t i = 0; i < centers.size(); ++i)
      if (centers[i] == name) return static_cast<int>(i);
    return -1;
  }

  void validate() const {
    require(!classes.empty() && !centers.empty(), ErrorCode::BadManifest,
            "empty class or center registry");
    std::unordered_set<std::string> seen;
    for (const auto& s : slides) {
      require(seen.insert(s.id).second, ErrorCode::BadManifest,
              "duplicate slide id '" + s.id + "'");
      require(s.label >= 0 && s.label < static_cast<int>(classes.size()),
              ErrorCode::BadManifest, "slide '" + s.id + "': bad class index");
      require(s.center >= 0 && s.center < static_cast<int>(centers.size()),
              ErrorCode::BadManifest, "slide '" + s.id + "': bad center index");
    }
    require(splits.empty() || splits.size() == slides.size(),
            ErrorCode::BadManifest, "split assignment does not cover every slide");
  }
};

// A manifest plus the slide-level embedding matrix (row i <-> slides[i]).
struct EmbeddingDataset {
  DatasetManifest manifest;
  MatrixRf Z;

  void validate() const {
    manifest.validate();
    require(Z.rows() == static_cast<Eigen::Index>(manifest.slides.size()),
            ErrorCode::DimensionMismatch,
            "embedding row count does not match manifest slide count");
  }
};

// A manifest plus one patch matrix per slide.
struct BagDataset {
  DatasetManifest manifest;
  std::vector<MatrixRf> bags;
};

}  // namespace scda
