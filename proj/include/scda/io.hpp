#pragma once

// Bit-exact embedding I/O.
//
// SCDA1 matrix file (little-endian):
//   magic "SCDA" | version u32 = 1 | rows u64 | dims u64 | rows*dims float32,
//   row-major.
//
// Manifest: JSON document with "classes", "centers", "slides"
// ({id, center, class, n_patches[, patches_file]}), optional "splits"
// ({id: "train"|"test"}) and optional "embeddings_file".

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "scda/types.hpp"

namespace scda {

namespace detail {

inline void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

inline void put_u64(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

inline std::uint32_t get_u32(const unsigned char* p) {
  std::uint32_t v = 0;
  for (int i = 3; i >= 0; --i) v = (v << 8) | p[i];
  return v;
}

inline std::uint64_t get_u64(const unsigned char* p) {
  std::uint64_t v = 0;
  for (int i = 7; i >= 0; --i) v = (v << 8) | p[i];
  return v;
}

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  require(in.good(), ErrorCode::IoError, "cannot open '" + path.string() + "'");
  std::string data((std::istreambuf_iterator<char>(in)),
                   std::istreambuf_iterator<char>());
  require(!in.bad(), ErrorCode::IoError, "read failed for '" + path.string() + "'");
  return data;
}

inline void write_file(const std::filesystem::path& path, const std::string& data) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  require(out.good(), ErrorCode::IoError, "cannot create '" + path.string() + "'");
  out.write(data.data(), static_cast<std::streamsize>(data.size()));
  out.flush();
  require(out.good(), ErrorCode::IoError, "write failed for '" + path.string() + "'");
}

}  // namespace detail

inline void save_matrix(const std::filesystem::path& path, const MatrixRf& m) {
  std::string buf;
  buf.reserve(24 + static_cast<std::size_t>(m.size()) * 4);
  buf.append("SCDA", 4);
  detail::put_u32(buf, 1u);
  detail::put_u64(buf, static_cast<std::uint64_t>(m.rows()));
  detail::put_u64(buf, static_cast<std::uint64_t>(m.cols()));
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      const auto bits = std::bit_cast<std::uint32_t>(m(i, j));
      detail::put_u32(buf, bits);
    }
  detail::write_file(path, buf);
}

inline MatrixRf load_matrix(const std::filesystem::path& path) {
  const std::string data = detail::read_file(path);
  require(data.size() >= 24, ErrorCode::TruncatedFile,
          "'" + path.string() + "' is shorter than the SCDA1 header");
  const auto* p = reinterpret_cast<const unsigned char*>(data.data());
  require(std::memcmp(p, "SCDA", 4) == 0, ErrorCode::BadMagic,
          "'" + path.string() + "' is not an SCDA1 file");
  const std::uint32_t version = detail::get_u32(p + 4);
  require(version == 1u, ErrorCode::VersionMismatch,
          "'" + path.string() + "' has unsupported version " + std::to_string(version));
  const std::uint64_t rows = detail::get_u64(p + 8);
  const std::uint64_t dims = detail::get_u64(p + 16);
  require(data.size() == 24 + rows * dims * 4, ErrorCode::TruncatedFile,
          "'" + path.string() + "' payload does not match its header");
  MatrixRf m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(dims));
  const unsigned char* q = p + 24;
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j, q += 4)
      m(i, j) = std::bit_cast<float>(detail::get_u32(q));
  return m;
}

inline nlohmann::json manifest_to_json(const DatasetManifest& manifest) {
  nlohmann::json j;
  j["classes"] = manifest.classes;
  j["centers"] = manifest.centers;
  auto slides = nlohmann::json::array();
  for (const auto& s : manifest.slides) {
    nlohmann::json rec;
    rec["id"] = s.id;
    rec["center"] = manifest.centers.at(static_cast<std::size_t>(s.center));
    rec["class"] = manifest.classes.at(static_cast<std::size_t>(s.label));
    rec["n_patches"] = s.n_patches;
    if (!s.patches_file.empty()) rec["patches_file"] = s.patches_file;
    slides.push_back(std::move(rec));
  }
  j["slides"] = std::move(slides);
  if (manifest.has_splits()) {
    nlohmann::json sp = nlohmann::json::object();
    for (std::size_t i = 0; i < manifest.slides.size(); ++i)
      sp[manifest.slides[i].id] = manifest.splits[i] == Split::Train ? "train" : "test";
    j["splits"] = std::move(sp);
  }
  if (!manifest.embeddings_file.empty()) j["embeddings_file"] = manifest.embeddings_file;
  return j;
}

inline void save_manifest(const std::filesystem::path& path,
                          const DatasetManifest& manifest) {
  manifest.validate();
  detail::write_file(path, manifest_to_json(manifest).dump(2) + "\n");
}

inline DatasetManifest manifest_from_json(const nlohmann::json& j) {
  require(j.is_object(), ErrorCode::BadManifest, "manifest root must be an object");
  static const std::vector<std::string> known = {"classes", "centers", "slides",
                                                 "splits", "embeddings_file"};
  for (const auto& [key, _] : j.items())
    require(std::find(known.begin(), known.end(), key) != known.end(),
            ErrorCode::BadManifest, "unknown manifest key '" + key + "'");
  require(j.contains("classes") && j.contains("centers") && j.contains("slides"),
          ErrorCode::BadManifest, "manifest needs classes, centers and slides");

  DatasetManifest m;
  m.classes = j.at("classes").get<std::vector<std::string>>();
  m.centers = j.at("centers").get<std::vector<std::string>>();
  for (const auto& rec : j.at("slides")) {
    SlideRecord s;
    s.id = rec.at("id").get<std::string>();
    s.center = m.center_index(rec.at("center").get<std::string>());
    s.label = m.class_index(rec.at("class").get<std::string>());
    require(s.center >= 0, ErrorCode::BadManifest,
            "slide '" + s.id + "' references an unregistered center");
    require(s.label >= 0, ErrorCode::BadManifest,
            "slide '" + s.id + "' references an unregistered class");
    s.n_patches = rec.at("n_patches").get<int>();
    if (rec.contains("patches_file")) s.patches_file = rec.at("patches_file").get<std::string>();
    m.slides.push_back(std::move(s));
  }
  if (j.contains("splits")) {
    const auto& sp = j.at("splits");
    m.splits.assign(m.slides.size(), Split::Test);
    std::size_t covered = 0;
    for (std::size_t i = 0; i < m.slides.size(); ++i) {
      require(sp.contains(m.slides[i].id), ErrorCode::BadManifest,
              "slide '" + m.slides[i].id + "' has no split assignment");
      const auto v = sp.at(m.slides[i].id).get<std::string>();
      require(v == "train" || v == "test", ErrorCode::BadManifest,
              "split for '" + m.slides[i].id + "' must be train or test");
      m.splits[i] = v == "train" ? Split::Train : Split::Test;
      ++covered;
    }
    require(sp.size() == covered, ErrorCode::BadManifest,
            "splits mention slides absent from the manifest");
  }
  if (j.contains("embeddings_file"))
    m.embeddings_file = j.at("embeddings_file").get<std::string>();
  m.validate();
  return m;
}

inline DatasetManifest load_manifest(const std::filesystem::path& path) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(detail::read_file(path));
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::BadManifest, "'" + path.string() + "': " + e.what());
  }
  return manifest_from_json(j);
}

// Dataset directory layout: <dir>/manifest.json plus the SCDA1 files the
// manifest references.

inline void save_dataset(const std::filesystem::path& dir, const EmbeddingDataset& ds) {
  ds.validate();
  EmbeddingDataset copy = ds;
  if (copy.manifest.embeddings_file.empty())
    copy.manifest.embeddings_file = "embeddings.scda";
  std::filesystem::create_directories(dir);
  save_matrix(dir / copy.manifest.embeddings_file, copy.Z);
  save_manifest(dir / "manifest.json", copy.manifest);
}

inline EmbeddingDataset load_dataset(const std::filesystem::path& dir) {
  EmbeddingDataset ds;
  ds.manifest = load_manifest(dir / "manifest.json");
  require(!ds.manifest.embeddings_file.empty(), ErrorCode::BadManifest,
          "manifest in '" + dir.string() + "' references no embeddings file");
  ds.Z = load_matrix(dir / ds.manifest.embeddings_file);
  ds.validate();
  return ds;
}

inline std::string sanitize_filename(const std::string& s) {
  std::string out;
  for (char c : s)
    out.push_back(std::isalnum(static_cast<unsigned char>(c)) || c == '-' ||
                          c == '_' || c == '.'
                      ? c
                      : '_');
  return out;
}

inline void save_bag_dataset(const std::filesystem::path& dir, const BagDataset& ds) {
  require(ds.bags.size() == ds.manifest.slides.size(), ErrorCode::DimensionMismatch,
          "bag count does not match manifest");
  BagDataset copy = ds;
  std::filesystem::create_directories(dir / "patches");
  for (std::size_t i = 0; i < copy.bags.size(); ++i) {
    auto& rec = copy.manifest.slides[i];
    if (rec.patches_file.empty())
      rec.patches_file = "patches/" + sanitize_filename(rec.id) + ".scda";
    save_matrix(dir / rec.patches_file, copy.bags[i]);
  }
  save_manifest(dir / "manifest.json", copy.manifest);
}

inline BagDataset load_bag_dataset(const std::filesystem::path& dir) {
  BagDataset ds;
  ds.manifest = load_manifest(dir / "manifest.json");
  ds.bags.reserve(ds.manifest.slides.size());
  for (const auto& rec : ds.manifest.slides) {
    require(!rec.patches_file.empty(), ErrorCode::BadManifest,
            "slide '" + rec.id + "' has no patches file");
    ds.bags.push_back(load_matrix(dir / rec.patches_file));
    require(ds.bags.back().rows() == rec.n_patches, ErrorCode::DimensionMismatch,
            "slide '" + rec.id + "': patch count differs from manifest");
  }
  return ds;
}

}  // namespace scda
