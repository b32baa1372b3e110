#pragma once

// Synthetic multi-center dataset generator. Class structure is shared by all
// centers; each center sees it through its own near-orthogonal rotation plus
// translation, which preserves within-center class geometry while shifting
// centers relative to each other. Default cell sizes follow a realistic
// two-center census of six classes.

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "scda/rng.hpp"
#include "scda/types.hpp"

namespace scda {

struct SynthConfig {
  int dim = 32;
  int n_classes = 6;
  int n_centers = 2;
  // Flat class-major table (class 0 center 0, class 0 center 1, ...).
  // Empty means: the built-in census profile when it applies, otherwise
  // slides_per_cell everywhere.
  std::vector<int> slides_per_cell_table;
  int slides_per_cell = 40;
  int patches_min = 20;
  int patches_max = 80;
  double class_separation_deg = 40.0;
  double rotation_magnitude = 2.0;
  double translation_magnitude = 1.0;
  double slide_jitter_sigma = 0.06;
  double patch_noise_sigma = 0.3;
  std::uint64_t seed = 42;
  std::vector<std::string> class_names;   // defaults derived when empty
  std::vector<std::string> center_names;  // defaults derived when empty

  void validate() const {
    require(dim >= 4, ErrorCode::BadConfig, "dim must be >= 4");
    require(n_classes >= 2 && n_centers >= 2, ErrorCode::BadConfig,
            "need at least 2 classes and 2 centers");
    require(patches_min >= 1 && patches_max >= patches_min, ErrorCode::BadConfig,
            "invalid patch count range");
    require(class_separation_deg > 0.0 && class_separation_deg <= 90.0,
            ErrorCode::BadConfig, "class separation must lie in (0, 90] degrees");
    require(rotation_magnitude >= 0.0 && translation_magnitude >= 0.0 &&
                slide_jitter_sigma >= 0.0 && patch_noise_sigma >= 0.0,
            ErrorCode::BadConfig, "magnitudes must be nonnegative");
    if (!slides_per_cell_table.empty()) {
      require(static_cast<int>(slides_per_cell_table.size()) == n_classes * n_centers,
              ErrorCode::BadConfig, "cell table size must be n_classes * n_centers");
      for (int v : slides_per_cell_table)
        require(v >= 1, ErrorCode::BadConfig, "cell sizes must be >= 1");
    } else {
      require(slides_per_cell >= 1, ErrorCode::BadConfig, "slides_per_cell must be >= 1");
    }
  }

  std::vector<int> resolved_cell_table() const {
    if (!slides_per_cell_table.empty()) return slides_per_cell_table;
    if (n_classes == 6 && n_centers == 2)
      return {31, 71, 25, 26, 73, 95, 17, 44, 49, 73, 44, 60};
    return std::vector<int>(static_cast<std::size_t>(n_classes * n_centers),
                            slides_per_cell);
  }

  std::vector<std::string> resolved_class_names() const {
    if (!class_names.empty()) return class_names;
    if (n_classes == 6) return {"lm", "lms", "df", "dfs", "mel", "fxa"};
    std::vector<std::string> names;
    for (int c = 0; c < n_classes; ++c) names.push_back("class_" + std::to_string(c));
    return names;
  }

  std::vector<std::string> resolved_center_names() const {
    if (!center_names.empty()) return center_names;
    std::vector<std::string> names;
    for (int h = 0; h < n_centers; ++h)
      names.push_back(std::string("center_") + static_cast<char>('a' + h));
    return names;
  }
};

namespace detail {

inline VectorXd random_unit_vector(int dim, Rng& rng) {
  VectorXd v(dim);
  double norm;
  do {
    for (int i = 0; i < dim; ++i) v[i] = rng.normal();
    norm = v.norm();
  } while (norm < 1e-8);
  return v / norm;
}

// Unit class means with pairwise angular separation equal to sep_deg: a cone
// around a random axis with orthonormal in-complement directions, so the
// separation dial is exact (cos(angle) = cos^2(theta) for every pair).
inline std::vector<VectorXd> separated_unit_vectors(int n, int dim, double sep_deg,
                                                    Rng& rng) {
  require(n <= dim - 1, ErrorCode::InfeasibleSeparation,
          "cannot place " + std::to_string(n) + " separated unit vectors in dimension " +
              std::to_string(dim));
  require(sep_deg <= 90.0, ErrorCode::InfeasibleSeparation,
          "class separation above 90 degrees is not constructible on a cone");
  const VectorXd axis = random_unit_vector(dim, rng);
  std::vector<VectorXd> complement;
  while (static_cast<int>(complement.size()) < n) {
    VectorXd w = random_unit_vector(dim, rng);
    w -= axis.dot(w) * axis;
    for (const auto& u : complement) w -= u.dot(w) * u;
    const double norm = w.norm();
    if (norm < 1e-6) continue;  // rare near-collinear draw
    complement.push_back(w / norm);
  }
  const double theta =
      std::acos(std::sqrt(std::cos(sep_deg * std::numbers::pi / 180.0)));
  std::vector<VectorXd> out;
  out.reserve(static_cast<std::size_t>(n));
  for (const auto& w : complement)
    out.push_back(std::cos(theta) * axis + std::sin(theta) * w);
  return out;
}

// Orthogonal matrix from the Cayley transform of a random skew matrix;
// magnitude 0 gives the identity and small magnitudes stay near it.
inline MatrixXd random_rotation(int dim, double magnitude, Rng& rng) {
  MatrixXd g(dim, dim);
  for (int i = 0; i < dim; ++i)
    for (int j = 0; j < dim; ++j) g(i, j) = rng.normal();
  const MatrixXd skew =
      (g - g.transpose()) * (magnitude / (2.0 * std::sqrt(static_cast<double>(dim))));
  const MatrixXd eye = MatrixXd::Identity(dim, dim);
  return (eye + skew).partialPivLu().solve(eye - skew);
}

}  // namespace detail

inline BagDataset generate(const SynthConfig& config) {
  config.validate();
  const std::vector<int> table = config.resolved_cell_table();

  BagDataset ds;
  ds.manifest.classes = config.resolved_class_names();
  ds.manifest.centers = config.resolved_center_names();
  require(static_cast<int>(ds.manifest.classes.size()) == config.n_classes &&
              static_cast<int>(ds.manifest.centers.size()) == config.n_centers,
          ErrorCode::BadConfig, "name list sizes must match class/center counts");

  Rng mean_rng(mix_seed({config.seed, 0x6d65616e73ULL}));
  const std::vector<VectorXd> class_means = detail::separated_unit_vectors(
      config.n_classes, config.dim, config.class_separation_deg, mean_rng);

  std::vector<MatrixXd> rotations;
  std::vector<VectorXd> translations;
  for (int h = 0; h < config.n_centers; ++h) {
    Rng center_rng(mix_seed({config.seed, 0x63656e746572ULL, static_cast<std::uint64_t>(h)}));
    rotations.push_back(
        detail::random_rotation(config.dim, config.rotation_magnitude, center_rng));
    translations.push_back(config.translation_magnitude *
                           detail::random_unit_vector(config.dim, center_rng));
  }

  for (int c = 0; c < config.n_classes; ++c) {
    for (int h = 0; h < config.n_centers; ++h) {
      const int n_slides = table[static_cast<std::size_t>(c * config.n_centers + h)];
      Rng cell_rng(mix_seed({config.seed, 0x63656c6cULL, static_cast<std::uint64_t>(c),
                             static_cast<std::uint64_t>(h)}));
      const VectorXd center_mean = rotations[static_cast<std::size_t>(h)] * class_means[static_cast<std::size_t>(c)] +
                                   translations[static_cast<std::size_t>(h)];
      for (int i = 0; i < n_slides; ++i) {
        VectorXd slide_mean = center_mean;
        for (int j = 0; j < config.dim; ++j)
          slide_mean[j] += cell_rng.normal(0.0, config.slide_jitter_sigma);
        const int n_patches =
            config.patches_min +
            static_cast<int>(cell_rng.uniform_below(
                static_cast<std::uint64_t>(config.patches_max - config.patches_min + 1)));
        MatrixRf patches(n_patches, config.dim);
        for (int p = 0; p < n_patches; ++p)
          for (int j = 0; j < config.dim; ++j)
            patches(p, j) = static_cast<float>(
                slide_mean[j] + cell_rng.normal(0.0, config.patch_noise_sigma));

        char idx[16];
        std::snprintf(idx, sizeof(idx), "%04d", i);
        SlideRecord rec;
        rec.id = ds.manifest.classes[static_cast<std::size_t>(c)] + "_" +
                 ds.manifest.centers[static_cast<std::size_t>(h)] + "_" + idx;
        rec.center = h;
        rec.label = c;
        rec.n_patches = n_patches;
        ds.manifest.slides.push_back(std::move(rec));
        ds.bags.push_back(std::move(patches));
      }
    }
  }
  ds.manifest.validate();
  return ds;
}

}  // namespace scda
