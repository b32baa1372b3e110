#pragma once

// Two-stain (H&E) deconvolution and normalization in optical-density space.
//
// Estimation pipeline: Beer-Lambert transform, background removal at an OD
// threshold, eigen-plane of the tissue OD covariance, angular percentiles of
// the in-plane projections as the extreme stain directions, least-squares
// concentrations. Normalization rescales per-stain concentrations to a
// target profile's reference maxima and reconstructs through the target
// stain matrix.

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <filesystem>
#include <numbers>
#include <vector>

#include <json.hpp>

#include "scda/image.hpp"

namespace scda {
namespace stain {

using Eigen::Matrix2d;
using Eigen::Matrix3d;
using Eigen::Vector2d;
using Eigen::Vector3d;

struct MacenkoParams {
  double io_reference = 255.0;  // transmitted-light white point
  double beta = 0.15;           // background OD threshold
  double alpha = 1.0;           // angle percentile (1st / 99th)
  double concentration_percentile = 99.0;

  void validate() const {
    require(io_reference > 0.0, ErrorCode::BadConfig, "io_reference must be positive");
    require(beta > 0.0, ErrorCode::BadConfig, "beta must be positive");
    require(alpha > 0.0 && alpha < 50.0, ErrorCode::BadConfig,
            "alpha must lie in (0, 50)");
    require(concentration_percentile > 0.0 && concentration_percentile <= 100.0,
            ErrorCode::BadConfig, "concentration_percentile must lie in (0, 100]");
  }
};

// Column convention: the H column (index 0) is the one with the larger
// green-channel OD component. Estimation enforces this; profiles built by
// hand must follow it too, or cross-profile normalization swaps stains.
struct StainProfile {
  Eigen::Matrix<double, 3, 2> stain_matrix;  // unit-norm H and E OD columns
  Vector2d max_concentrations;

  void validate() const {
    for (int c = 0; c < 2; ++c) {
      require(std::abs(stain_matrix.col(c).norm() - 1.0) <= 1e-9,
              ErrorCode::DegenerateStains, "stain column is not unit norm");
      require((stain_matrix.col(c).array() >= 0.0).all(),
              ErrorCode::DegenerateStains, "stain column has negative entries");
    }
    const double cos_angle = stain_matrix.col(0).dot(stain_matrix.col(1));
    require(std::acos(std::clamp(cos_angle, -1.0, 1.0)) >=
                1.0 * std::numbers::pi / 180.0,
            ErrorCode::DegenerateStains, "stain columns are near-parallel");
    require((max_concentrations.array() > 0.0).all(), ErrorCode::DegenerateStains,
            "max concentrations must be positive");
  }
};

inline double od_from_channel(double value, double io_reference) {
  return -std::log10(std::max(value, 1.0) / io_reference);
}

inline double channel_from_od(double od, double io_reference) {
  return io_reference * std::pow(10.0, -od);
}

// Beer-Lambert transform of the whole image; one OD vector per pixel.
inline std::vector<Vector3d> rgb_to_od(const RGBImage& img, double io_reference) {
  img.validate();
  require(io_reference > 0.0, ErrorCode::BadConfig, "io_reference must be positive");
  std::vector<Vector3d> od(img.n_pixels());
  for (std::size_t p = 0; p < od.size(); ++p)
    for (int c = 0; c < 3; ++c)
      od[p][c] = od_from_channel(static_cast<double>(img.pixels[p * 3 + c]),
                                 io_reference);
  return od;
}

inline RGBImage od_to_rgb(const std::vector<Vector3d>& od, int width, int height,
                          double io_reference) {
  RGBImage img;
  img.width = width;
  img.height = height;
  img.pixels.resize(od.size() * 3);
  for (std::size_t p = 0; p < od.size(); ++p)
    for (int c = 0; c < 3; ++c) {
      const double v = std::round(channel_from_od(od[p][c], io_reference));
      img.pixels[p * 3 + c] = static_cast<std::uint8_t>(std::clamp(v, 0.0, 255.0));
    }
  return img;
}

// Sorted-order percentile with linear interpolation between order statistics.
inline double percentile(std::vector<double> values, double pct) {
  require(!values.empty(), ErrorCode::EmptyMatrix, "percentile of empty set");
  std::sort(values.begin(), values.end());
  const double rank = pct / 100.0 * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(rank));
  const auto hi = static_cast<std::size_t>(std::ceil(rank));
  const double frac = rank - static_cast<double>(lo);
  return values[lo] + frac * (values[hi] - values[lo]);
}

// Least-squares concentrations of one OD vector under a 3x2 stain matrix,
// via the 2x2 normal equations. The raw solution may be negative for OD
// directions outside the stain cone; estimation clamps before taking
// percentiles, normalization keeps the raw values so in-plane OD
// reconstructs exactly.
inline Vector2d concentrations_for(const Eigen::Matrix<double, 3, 2>& m,
                                   const Vector3d& od) {
  const Matrix2d gram = m.transpose() * m;
  const Vector2d rhs = m.transpose() * od;
  const double det = gram(0, 0) * gram(1, 1) - gram(0, 1) * gram(1, 0);
  require(std::abs(det) > 1e-12, ErrorCode::DegenerateStains,
          "stain matrix is rank deficient");
  Vector2d c;
  c[0] = (gram(1, 1) * rhs[0] - gram(0, 1) * rhs[1]) / det;
  c[1] = (gram(0, 0) * rhs[1] - gram(1, 0) * rhs[0]) / det;
  return c;
}

// Dominant plane of a set of OD vectors: the two largest-eigenvalue
// eigenvectors of their covariance, signs fixed so projections are
// predominantly positive.
inline std::pair<Vector3d, Vector3d> fit_od_plane(const std::vector<Vector3d>& od) {
  require(od.size() >= 3, ErrorCode::NotEnoughTissue, "too few OD samples");
  Vector3d mean = Vector3d::Zero();
  for (const auto& v : od) mean += v;
  mean /= static_cast<double>(od.size());
  Matrix3d cov = Matrix3d::Zero();
  for (const auto& v : od) cov += (v - mean) * (v - mean).transpose();
  cov /= static_cast<double>(od.size() - 1);

  Eigen::SelfAdjointEigenSolver<Matrix3d> solver(cov);
  require(solver.info() == Eigen::Success, ErrorCode::DegenerateStains,
          "eigen decomposition failed");
  Vector3d e1 = solver.eigenvectors().col(2);  // largest eigenvalue
  Vector3d e2 = solver.eigenvectors().col(1);
  double s1 = 0.0, s2 = 0.0;
  for (const auto& v : od) {
    s1 += v.dot(e1);
    s2 += v.dot(e2);
  }
  if (s1 < 0.0) e1 = -e1;
  if (s2 < 0.0) e2 = -e2;
  return {e1, e2};
}

inline StainProfile estimate_stain_profile(const RGBImage& img,
                                           const MacenkoParams& params) {
  params.validate();
  const std::vector<Vector3d> od = rgb_to_od(img, params.io_reference);

  // Tissue = every channel above the OD threshold. Pixels are canonically
  // sorted so the estimate is a pure function of the pixel multiset.
  std::vector<Vector3d> tissue;
  for (const auto& v : od)
    if ((v.array() > params.beta).all()) tissue.push_back(v);
  require(tissue.size() >= 100, ErrorCode::NotEnoughTissue,
          "found " + std::to_string(tissue.size()) + " tissue pixels, need >= 100");
  std::sort(tissue.begin(), tissue.end(), [](const Vector3d& a, const Vector3d& b) {
    if (a[0] != b[0]) return a[0] < b[0];
    if (a[1] != b[1]) return a[1] < b[1];
    return a[2] < b[2];
  });

  const auto [e1, e2] = fit_od_plane(tissue);

  std::vector<double> angles;
  angles.reserve(tissue.size());
  for (const auto& v : tissue) angles.push_back(std::atan2(v.dot(e2), v.dot(e1)));
  const double phi_min = percentile(angles, params.alpha);
  const double phi_max = percentile(angles, 100.0 - params.alpha);

  Vector3d v_min = std::cos(phi_min) * e1 + std::sin(phi_min) * e2;
  Vector3d v_max = std::cos(phi_max) * e1 + std::sin(phi_max) * e2;
  const double separation =
      std::acos(std::clamp(v_min.dot(v_max), -1.0, 1.0)) * 180.0 / std::numbers::pi;
  require(separation >= 1.0, ErrorCode::DegenerateStains,
          "extreme stain directions are within 1 degree of parallel");
  v_min = v_min.cwiseMax(0.0).normalized();
  v_max = v_max.cwiseMax(0.0).normalized();

  // H is the column with the larger green-channel OD component.
  StainProfile profile;
  if (v_min[1] >= v_max[1]) {
    profile.stain_matrix.col(0) = v_min;
    profile.stain_matrix.col(1) = v_max;
  } else {
    profile.stain_matrix.col(0) = v_max;
    profile.stain_matrix.col(1) = v_min;
  }

  std::vector<double> c_h, c_e;
  c_h.reserve(tissue.size());
  c_e.reserve(tissue.size());
  for (const auto& v : tissue) {
    const Vector2d c = concentrations_for(profile.stain_matrix, v).cwiseMax(0.0);
    c_h.push_back(c[0]);
    c_e.push_back(c[1]);
  }
  profile.max_concentrations[0] = percentile(c_h, params.concentration_percentile);
  profile.max_concentrations[1] = percentile(c_e, params.concentration_percentile);
  profile.validate();
  return profile;
}

// Rescales per-pixel source concentrations to the target's reference maxima
// and reconstructs through the target stain matrix. Every pixel is
// transformed; background comes through with near-zero concentrations.
inline RGBImage normalize_to_target(const RGBImage& img,
                                    const StainProfile& source,
                                    const StainProfile& target,
                                    const MacenkoParams& params) {
  params.validate();
  source.validate();
  target.validate();
  const std::vector<Vector3d> od = rgb_to_od(img, params.io_reference);
  const Vector2d scale =
      target.max_concentrations.cwiseQuotient(source.max_concentrations);
  std::vector<Vector3d> out(od.size());
  for (std::size_t p = 0; p < od.size(); ++p) {
    const Vector2d c = concentrations_for(source.stain_matrix, od[p]);
    out[p] = target.stain_matrix * c.cwiseProduct(scale);
  }
  return od_to_rgb(out, img.width, img.height, params.io_reference);
}

// Forward Beer-Lambert renderer; the ground-truth oracle for estimation.
inline RGBImage synthesize_stain_image(const StainProfile& profile,
                                       const std::vector<double>& field_h,
                                       const std::vector<double>& field_e,
                                       int width, int height,
                                       double io_reference) {
  require(field_h.size() == field_e.size() &&
              field_h.size() == static_cast<std::size_t>(width) * height,
          ErrorCode::ShapeMismatch, "concentration fields do not match dimensions");
  std::vector<Vector3d> od(field_h.size());
  for (std::size_t p = 0; p < od.size(); ++p) {
    require(field_h[p] >= 0.0 && field_e[p] >= 0.0 && std::isfinite(field_h[p]) &&
                std::isfinite(field_e[p]),
            ErrorCode::NonFiniteInput, "concentrations must be finite and nonnegative");
    od[p] = profile.stain_matrix * Vector2d(field_h[p], field_e[p]);
  }
  return od_to_rgb(od, width, height, io_reference);
}

inline nlohmann::json profile_to_json(const StainProfile& profile) {
  nlohmann::json j;
  j["stain_matrix"] = {
      {profile.stain_matrix(0, 0), profile.stain_matrix(0, 1)},
      {profile.stain_matrix(1, 0), profile.stain_matrix(1, 1)},
      {profile.stain_matrix(2, 0), profile.stain_matrix(2, 1)},
  };
  j["max_concentrations"] = {profile.max_concentrations[0],
                             profile.max_concentrations[1]};
  return j;
}

inline void save_profile(const std::filesystem::path& path, const StainProfile& p) {
  p.validate();
  detail::write_file(path, profile_to_json(p).dump(2) + "\n");
}

inline StainProfile load_profile(const std::filesystem::path& path) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(detail::read_file(path));
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::BadConfig, "'" + path.string() + "': " + e.what());
  }
  StainProfile p;
  const auto& m = j.at("stain_matrix");
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 2; ++c)
      p.stain_matrix(r, c) = m.at(static_cast<std::size_t>(r)).at(static_cast<std::size_t>(c)).get<double>();
  p.max_concentrations[0] = j.at("max_concentrations").at(0).get<double>();
  p.max_concentrations[1] = j.at("max_concentrations").at(1).get<double>();
  p.validate();
  return p;
}

}  // namespace stain
}  // namespace scda
