#include <catch2/catch_amalgamated.hpp>

#include "scda/sampler.hpp"
#include "test_util.hpp"

using namespace scda;

namespace {

// Independent cross-domain checker: every class is present from every pool
// center in every batch. Kept apart from the sampler on purpose.
bool satisfies_constraint(const DatasetManifest& manifest,
                          const std::vector<std::size_t>& batch, int n_classes,
                          const std::vector<int>& centers) {
  for (int c = 0; c < n_classes; ++c)
    for (int h : centers) {
      bool found = false;
      for (std::size_t idx : batch)
        if (manifest.slides[idx].label == c && manifest.slides[idx].center == h) {
          found = true;
          break;
        }
      if (!found) return false;
    }
  return true;
}

std::vector<std::size_t> all_indices(const DatasetManifest& m) {
  std::vector<std::size_t> idx(m.slides.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  return idx;
}

}  // namespace

TEST_CASE("feasibility report") {
  const auto manifest = testutil::make_manifest(
      {"c0", "c1", "c2", "c3", "c4", "c5"}, {"h1", "h2"},
      {{3, 1}, {2, 2}, {5, 1}, {1, 4}, {2, 2}, {1, 1}});
  const TrainingPool pool = make_pool(manifest, all_indices(manifest));

  BatchSpec spec;
  spec.quota = 1;
  const FeasibilityReport report = check_feasibility(pool, spec);
  CHECK(report.feasible_with_replacement);
  CHECK(report.feasible_without_replacement);
  CHECK(report.batch_size == 12);
  CHECK(report.cells.size() == 12);

  spec.quota = 4;
  spec.allow_replacement = false;
  const FeasibilityReport tight = check_feasibility(pool, spec);
  CHECK_FALSE(tight.feasible_without_replacement);
  CHECK_THROWS_MATCHES(make_batches(pool, spec, 1), Error,
                       Catch::Matchers::Predicate<Error>([](const Error& e) {
                         return e.code() == ErrorCode::InfeasibleSpec;
                       }));
}

TEST_CASE("empty cell is unsatisfiable") {
  auto manifest = testutil::make_manifest({"a", "b"}, {"h1", "h2"}, {{2, 2}, {2, 2}});
  std::erase_if(manifest.slides,
                [](const SlideRecord& s) { return s.label == 1 && s.center == 1; });
  const TrainingPool pool = make_pool(manifest, all_indices(manifest));
  BatchSpec spec;
  CHECK_THROWS_MATCHES(check_feasibility(pool, spec), Error,
                       Catch::Matchers::Predicate<Error>([](const Error& e) {
                         return e.code() == ErrorCode::EmptyCell;
                       }));
}

TEST_CASE("quota construction covers every cell") {
  const auto manifest = testutil::make_manifest(
      {"c0", "c1", "c2", "c3", "c4", "c5"}, {"h1", "h2"},
      {{4, 7}, {3, 3}, {8, 9}, {2, 5}, {5, 7}, {4, 6}});
  const TrainingPool pool = make_pool(manifest, all_indices(manifest));
  BatchSpec spec;
  spec.quota = 1;
  spec.steps_per_epoch = 50;
  const BatchPlan plan = make_batches(pool, spec, 7);
  REQUIRE(plan.batches.size() == 50);
  for (const auto& batch : plan.batches) {
    CHECK(batch.size() == 12);
    CHECK(satisfies_constraint(manifest, batch, 6, {0, 1}));
    auto sorted = batch;
    std::sort(sorted.begin(), sorted.end());
    CHECK(std::adjacent_find(sorted.begin(), sorted.end()) == sorted.end());
  }
}

TEST_CASE("few-shot cell coverage across batches") {
  const auto manifest =
      testutil::make_manifest({"a", "b"}, {"h1", "h2"}, {{10, 2}, {10, 2}});
  const TrainingPool pool = make_pool(manifest, all_indices(manifest));
  BatchSpec spec;
  spec.steps_per_epoch = 100;
  const BatchPlan plan = make_batches(pool, spec, 3);

  // Both members of each 2-sample cell appear somewhere in the plan, and
  // every batch still covers the cell.
  for (int c = 0; c < 2; ++c) {
    std::set<std::size_t> seen;
    for (const auto& batch : plan.batches) {
      REQUIRE(satisfies_constraint(manifest, batch, 2, {0, 1}));
      for (std::size_t idx : batch)
        if (manifest.slides[idx].label == c && manifest.slides[idx].center == 1)
          seen.insert(idx);
    }
    CHECK(seen.size() == 2);
  }
}

TEST_CASE("plans are seed-deterministic and seed-sensitive") {
  const auto manifest = testutil::make_manifest({"a", "b"}, {"h1", "h2"},
                                                {{6, 5}, {4, 8}});
  const TrainingPool pool = make_pool(manifest, all_indices(manifest));
  BatchSpec spec;
  spec.steps_per_epoch = 20;
  const BatchPlan p1 = make_batches(pool, spec, 11);
  const BatchPlan p2 = make_batches(pool, spec, 11);
  REQUIRE(p1.batches == p2.batches);
  const BatchPlan p3 = make_batches(pool, spec, 12);
  CHECK(p1.batches != p3.batches);
}

TEST_CASE("cell members are drawn uniformly") {
  const auto manifest = testutil::make_manifest({"a"}, {"h1", "h2"}, {{5, 5}});
  const TrainingPool pool = make_pool(manifest, all_indices(manifest));
  BatchSpec spec;
  spec.steps_per_epoch = 2000;
  const BatchPlan plan = make_batches(pool, spec, 99);

  std::map<std::size_t, int> counts;
  for (const auto& batch : plan.batches)
    for (std::size_t idx : batch) counts[idx]++;
  // Each member of a 5-slide cell is drawn with p = 1/5 per batch.
  const double expect = 2000.0 / 5.0;
  const double sigma = std::sqrt(2000.0 * 0.2 * 0.8);
  for (const auto& [idx, count] : counts) {
    INFO("index " << idx << " count " << count);
    CHECK(std::abs(count - expect) <= 3.0 * sigma);
  }
}

TEST_CASE("single-center pools are supported") {
  const auto manifest = testutil::make_manifest({"a", "b"}, {"h1"}, {{4}, {5}});
  const TrainingPool pool = make_pool(manifest, all_indices(manifest));
  CHECK(pool.centers_present == std::vector<int>{0});
  BatchSpec spec;
  spec.quota = 2;
  spec.steps_per_epoch = 5;
  const BatchPlan plan = make_batches(pool, spec, 1);
  for (const auto& batch : plan.batches) CHECK(batch.size() == 4);
}
