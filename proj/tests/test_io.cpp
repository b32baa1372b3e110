#include <catch2/catch_amalgamated.hpp>
#include <fstream>

#include "scda/io.hpp"
#include "scda/rng.hpp"
#include "test_util.hpp"

using namespace scda;

namespace {
bool has_code(const Error& e, ErrorCode c) { return e.code() == c; }
}  // namespace

TEST_CASE("SCDA1 round trip is the identity") {
  testutil::TempDir dir("io");
  Rng rng(5);
  MatrixRf m(17, 9);
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j)
      m(i, j) = static_cast<float>(rng.normal(0.0, 10.0));
  const auto path = dir.path / "m.scda";
  save_matrix(path, m);
  const MatrixRf back = load_matrix(path);
  REQUIRE(back.rows() == m.rows());
  REQUIRE(back.cols() == m.cols());
  REQUIRE((back.array() == m.array()).all());

  // Saving the loaded matrix reproduces the file byte for byte.
  const auto path2 = dir.path / "m2.scda";
  save_matrix(path2, back);
  CHECK(detail::read_file(path) == detail::read_file(path2));
}

TEST_CASE("SCDA1 format guards") {
  testutil::TempDir dir("io_guards");
  MatrixRf m(2, 2);
  m << 1, 2, 3, 4;
  const auto path = dir.path / "m.scda";
  save_matrix(path, m);
  std::string bytes = detail::read_file(path);

  SECTION("bad magic") {
    std::string bad = bytes;
    bad[0] = 'X';
    detail::write_file(path, bad);
    CHECK_THROWS_MATCHES(load_matrix(path), Error,
                         Catch::Matchers::Predicate<Error>(
                             [](const Error& e) { return has_code(e, ErrorCode::BadMagic); }));
  }
  SECTION("bad version") {
    std::string bad = bytes;
    bad[4] = 2;
    detail::write_file(path, bad);
    CHECK_THROWS_MATCHES(load_matrix(path), Error,
                         Catch::Matchers::Predicate<Error>([](const Error& e) {
                           return has_code(e, ErrorCode::VersionMismatch);
                         }));
  }
  SECTION("truncated payload") {
    // Header says 2x2 but one float is missing.
    detail::write_file(path, bytes.substr(0, bytes.size() - 4));
    CHECK_THROWS_MATCHES(load_matrix(path), Error,
                         Catch::Matchers::Predicate<Error>([](const Error& e) {
                           return has_code(e, ErrorCode::TruncatedFile);
                         }));
  }
  SECTION("trailing bytes") {
    detail::write_file(path, bytes + "zz");
    CHECK_THROWS(load_matrix(path));
  }
}

TEST_CASE("manifest JSON round trip") {
  testutil::TempDir dir("manifest");
  auto manifest = testutil::make_manifest({"a", "b"}, {"h1", "h2"}, {{2, 1}, {1, 2}});
  manifest.splits.assign(manifest.slides.size(), Split::Test);
  manifest.splits[0] = Split::Train;
  manifest.embeddings_file = "embeddings.scda";
  const auto path = dir.path / "manifest.json";
  save_manifest(path, manifest);
  const DatasetManifest back = load_manifest(path);
  CHECK(back.classes == manifest.classes);
  CHECK(back.centers == manifest.centers);
  REQUIRE(back.slides.size() == manifest.slides.size());
  for (std::size_t i = 0; i < back.slides.size(); ++i) {
    CHECK(back.slides[i].id == manifest.slides[i].id);
    CHECK(back.slides[i].center == manifest.slides[i].center);
    CHECK(back.slides[i].label == manifest.slides[i].label);
  }
  CHECK(back.splits == manifest.splits);
  CHECK(back.embeddings_file == manifest.embeddings_file);

  // Second save is byte-identical.
  const auto path2 = dir.path / "manifest2.json";
  save_manifest(path2, back);
  CHECK(detail::read_file(path) == detail::read_file(path2));
}

TEST_CASE("manifest rejects malformed documents") {
  testutil::TempDir dir("manifest_bad");
  const auto path = dir.path / "manifest.json";

  SECTION("unknown key") {
    detail::write_file(path,
                       R"({"classes":["a"],"centers":["h"],"slides":[],"surprise":1})");
    CHECK_THROWS_MATCHES(load_manifest(path), Error,
                         Catch::Matchers::Predicate<Error>([](const Error& e) {
                           return has_code(e, ErrorCode::BadManifest);
                         }));
  }
  SECTION("unregistered center") {
    detail::write_file(
        path,
        R"({"classes":["a"],"centers":["h"],"slides":[{"id":"s","center":"nope","class":"a","n_patches":1}]})");
    CHECK_THROWS(load_manifest(path));
  }
  SECTION("duplicate slide id") {
    detail::write_file(
        path,
        R"({"classes":["a"],"centers":["h"],"slides":[{"id":"s","center":"h","class":"a","n_patches":1},{"id":"s","center":"h","class":"a","n_patches":1}]})");
    CHECK_THROWS(load_manifest(path));
  }
}

TEST_CASE("dataset directory round trip") {
  testutil::TempDir dir("dataset");
  EmbeddingDataset ds;
  ds.manifest = testutil::make_manifest({"a", "b"}, {"h"}, {{2}, {1}});
  ds.Z.resize(3, 4);
  Rng rng(3);
  for (Eigen::Index i = 0; i < 3; ++i)
    for (Eigen::Index j = 0; j < 4; ++j) ds.Z(i, j) = static_cast<float>(rng.normal());
  save_dataset(dir.path / "d", ds);
  const EmbeddingDataset back = load_dataset(dir.path / "d");
  CHECK((back.Z.array() == ds.Z.array()).all());
  CHECK(back.manifest.slides.size() == 3);
}

TEST_CASE("bag dataset round trip checks patch counts") {
  testutil::TempDir dir("bags");
  BagDataset ds;
  ds.manifest = testutil::make_manifest({"a"}, {"h"}, {{2}});
  MatrixRf b0(1, 3), b1(4, 3);
  b0.setConstant(1.0f);
  b1.setConstant(2.0f);
  ds.manifest.slides[0].n_patches = 1;
  ds.manifest.slides[1].n_patches = 4;
  ds.bags = {b0, b1};
  save_bag_dataset(dir.path / "d", ds);
  const BagDataset back = load_bag_dataset(dir.path / "d");
  REQUIRE(back.bags.size() == 2);
  CHECK(back.bags[1].rows() == 4);
  CHECK((back.bags[0].array() == b0.array()).all());
}
