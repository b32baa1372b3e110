#include <catch2/catch_amalgamated.hpp>
#include <numeric>

#include "scda/rng.hpp"
#include "scda/trainer.hpp"
#include "test_util.hpp"

using namespace scda;

namespace {

// Separable two-class, two-center toy set in four dimensions.
EmbeddingDataset toy_dataset(std::uint64_t seed, int per_cell = 12) {
  EmbeddingDataset ds;
  ds.manifest = testutil::make_manifest({"a", "b"}, {"h1", "h2"},
                                        {{per_cell, per_cell}, {per_cell, per_cell}});
  ds.Z.resize(static_cast<Eigen::Index>(ds.manifest.slides.size()), 4);
  Rng rng(seed);
  for (std::size_t i = 0; i < ds.manifest.slides.size(); ++i) {
    const auto& s = ds.manifest.slides[i];
    VectorXd mean = VectorXd::Zero(4);
    mean[s.label] = 1.0;        // class direction
    mean[2 + s.center] = 0.8;   // center offset
    for (Eigen::Index j = 0; j < 4; ++j)
      ds.Z(static_cast<Eigen::Index>(i), j) =
          static_cast<float>(mean[j] + rng.normal(0.0, 0.1));
  }
  return ds;
}

std::vector<std::size_t> all_indices(const DatasetManifest& m) {
  std::vector<std::size_t> idx(m.slides.size());
  std::iota(idx.begin(), idx.end(), 0);
  return idx;
}

bool heads_equal(const AdapterHead& a, const AdapterHead& b) {
  if (a.layers.size() != b.layers.size()) return false;
  for (std::size_t l = 0; l < a.layers.size(); ++l) {
    if ((a.layers[l].weight.array() != b.layers[l].weight.array()).any()) return false;
    if ((a.layers[l].bias.array() != b.layers[l].bias.array()).any()) return false;
  }
  return true;
}

}  // namespace

TEST_CASE("zero steps returns the initial head and empty traces") {
  const EmbeddingDataset ds = toy_dataset(1);
  TrainConfig config;
  config.steps = 0;
  config.seed = 5;
  const TrainReport report = train(ds, all_indices(ds.manifest), config);
  CHECK(report.loss_trace.empty());
  CHECK(report.anchors_used_trace.empty());
  CHECK(heads_equal(report.final_head,
                    init_head(4, config.head_shape, config.hidden_dim, config.seed)));
}

TEST_CASE("training is bitwise deterministic") {
  const EmbeddingDataset ds = toy_dataset(2);
  TrainConfig config;
  config.steps = 60;
  config.seed = 17;
  const TrainReport r1 = train(ds, all_indices(ds.manifest), config);
  const TrainReport r2 = train(ds, all_indices(ds.manifest), config);
  REQUIRE(r1.loss_trace.size() == 60);
  CHECK(r1.loss_trace == r2.loss_trace);
  CHECK(r1.anchors_used_trace == r2.anchors_used_trace);
  CHECK(heads_equal(r1.final_head, r2.final_head));

  config.seed = 18;
  const TrainReport r3 = train(ds, all_indices(ds.manifest), config);
  CHECK(r1.loss_trace != r3.loss_trace);
}

TEST_CASE("loss decreases on the separable toy benchmark") {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const EmbeddingDataset ds = toy_dataset(100 + seed);
    TrainConfig config;
    config.steps = 200;
    config.learning_rate = 1e-3;
    config.seed = seed;
    const TrainReport report = train(ds, all_indices(ds.manifest), config);
    REQUIRE(report.loss_trace.size() == 200);
    const auto mean = [&](std::size_t from, std::size_t to) {
      double sum = 0.0;
      for (std::size_t i = from; i < to; ++i) sum += report.loss_trace[i];
      return sum / static_cast<double>(to - from);
    };
    INFO("seed " << seed);
    CHECK(mean(180, 200) < mean(0, 20));
    for (double loss : report.loss_trace) CHECK(std::isfinite(loss));
  }
}

TEST_CASE("anchors are counted per step") {
  const EmbeddingDataset ds = toy_dataset(3);
  TrainConfig config;
  config.steps = 10;
  const TrainReport report = train(ds, all_indices(ds.manifest), config);
  // Quota-1 batches over 2 classes x 2 centers: every anchor has a positive.
  for (int anchors : report.anchors_used_trace) CHECK(anchors == 4);
}

TEST_CASE("training propagates sampler infeasibility") {
  auto ds = toy_dataset(4);
  std::vector<std::size_t> only_one_center;
  for (std::size_t i = 0; i < ds.manifest.slides.size(); ++i)
    if (ds.manifest.slides[i].center == 0 && ds.manifest.slides[i].label == 0)
      only_one_center.push_back(i);
  TrainConfig config;
  config.steps = 3;
  // Class "b" has no samples in this pool at all.
  CHECK_THROWS_MATCHES(train(ds, only_one_center, config), Error,
                       Catch::Matchers::Predicate<Error>([](const Error& e) {
                         return e.code() == ErrorCode::EmptyCell;
                       }));
}
