#include <catch2/catch_amalgamated.hpp>

#include "scda/config.hpp"
#include "scda/harness.hpp"
#include "scda/report.hpp"
#include "scda/synth.hpp"
#include "test_util.hpp"

using namespace scda;

namespace {

// Small split dataset for harness shape tests.
EmbeddingDataset small_dataset(std::uint64_t seed) {
  SynthConfig cfg;
  cfg.dim = 12;
  cfg.n_classes = 3;
  cfg.n_centers = 2;
  cfg.slides_per_cell_table.assign(6, 18);
  cfg.patches_min = 8;
  cfg.patches_max = 14;
  cfg.seed = seed;
  const EmbeddingDataset agg = aggregate_bags(generate(cfg));
  EmbeddingDataset ds;
  ds.manifest = split_dataset(agg.manifest, 0.8, seed);
  ds.Z = agg.Z;
  return ds;
}

TrainConfig fast_train(std::uint64_t seed) {
  TrainConfig tc;
  tc.steps = 80;
  tc.seed = seed;
  return tc;
}

}  // namespace

TEST_CASE("grid covers every method, training row and test column") {
  const EmbeddingDataset ds = small_dataset(5);
  const GridReport report = run_crosscenter_grid(ds, fast_train(5));
  // 2 methods x 3 training rows x 3 test columns.
  CHECK(report.cells.size() == 18);
  CHECK(report.train_reports.size() == 3);
  for (const auto& cell : report.cells) {
    CHECK((cell.method == "raw" || cell.method == "scda"));
    CHECK(cell.bacc.value >= 0.0);
    CHECK(cell.bacc.value <= 1.0);
    CHECK(cell.confusion.total() > 0);
  }
  // Every expected combination is addressable.
  for (const std::string method : {"raw", "scda"})
    for (const auto& train_set : {std::vector<int>{0}, {1}, {0, 1}})
      for (const auto& test_set : {std::vector<int>{0}, {1}, {0, 1}})
        CHECK_NOTHROW(report.cell(method, train_set, test_set));
}

TEST_CASE("grid report is deterministic") {
  const EmbeddingDataset ds = small_dataset(6);
  const GridReport r1 = run_crosscenter_grid(ds, fast_train(6));
  const GridReport r2 = run_crosscenter_grid(ds, fast_train(6));
  REQUIRE(r1.cells.size() == r2.cells.size());
  for (std::size_t i = 0; i < r1.cells.size(); ++i)
    CHECK(r1.cells[i].bacc.value == r2.cells[i].bacc.value);
  CHECK(grid_report_csv(r1, ds.manifest) == grid_report_csv(r2, ds.manifest));
}

TEST_CASE("single-center dataset degenerates to a one-row grid") {
  SynthConfig cfg;
  cfg.dim = 8;
  cfg.n_classes = 2;
  cfg.n_centers = 2;
  cfg.slides_per_cell_table.assign(4, 12);
  cfg.patches_min = 5;
  cfg.patches_max = 8;
  cfg.seed = 3;
  EmbeddingDataset agg = aggregate_bags(generate(cfg));
  // Keep only the first center to exercise the degenerate shape.
  DatasetManifest m;
  m.classes = agg.manifest.classes;
  m.centers = {agg.manifest.centers[0]};
  MatrixRf z(agg.Z.rows(), agg.Z.cols());
  Eigen::Index keep = 0;
  for (std::size_t i = 0; i < agg.manifest.slides.size(); ++i) {
    if (agg.manifest.slides[i].center != 0) continue;
    auto rec = agg.manifest.slides[i];
    rec.center = 0;
    m.slides.push_back(rec);
    z.row(keep++) = agg.Z.row(static_cast<Eigen::Index>(i));
  }
  EmbeddingDataset ds;
  ds.manifest = split_dataset(m, 0.8, 3);
  ds.Z = z.topRows(keep);

  TrainConfig tc = fast_train(3);
  const GridReport report = run_crosscenter_grid(ds, tc);
  CHECK(report.cells.size() == 2);  // raw + scda, one row, one column
  CHECK(report.train_reports.size() == 1);
  // Single-center scda row raises the quota so anchors have positives.
  for (int anchors : report.train_reports[0].anchors_used_trace) CHECK(anchors > 0);
}

TEST_CASE("few-shot report shapes and aggregation") {
  const EmbeddingDataset ds = small_dataset(9);
  FewShotConfig fsc;
  fsc.base_center = 0;
  fsc.k_values = {2, 4};
  fsc.n_seeds = 2;
  const FewShotReport report = run_fewshot(ds, fsc, fast_train(9));
  // Per seed: zero-shot + two k values + all, each on 2 test centers.
  CHECK(report.rows.size() == 2 * (1 + 2 + 1) * 2);
  CHECK(report.aggregates.size() == (1 + 2 + 1) * 2);
  for (const auto& agg : report.aggregates) {
    CHECK(agg.n_seeds == 2);
    CHECK(agg.mean >= 0.0);
    CHECK(agg.mean <= 1.0);
    CHECK(agg.stddev >= 0.0);
  }
  CHECK_NOTHROW(report.aggregate("0", 0));
  CHECK_NOTHROW(report.aggregate("2", 1));
  CHECK_NOTHROW(report.aggregate("all", 1));

  const FewShotReport again = run_fewshot(ds, fsc, fast_train(9));
  CHECK(fewshot_report_csv(report, ds.manifest) ==
        fewshot_report_csv(again, ds.manifest));
  CHECK(fewshot_aggregate_csv(report, ds.manifest) ==
        fewshot_aggregate_csv(again, ds.manifest));
}

TEST_CASE("selected shots come from the held-out training split") {
  const EmbeddingDataset ds = small_dataset(11);
  const int held = 1;
  const auto shots = select_shots(ds.manifest, held, 3, 42);
  CHECK(shots.size() == 3 * ds.manifest.classes.size());
  std::map<int, int> per_class;
  for (std::size_t idx : shots) {
    CHECK(ds.manifest.slides[idx].center == held);
    CHECK(ds.manifest.splits[idx] == Split::Train);
    per_class[ds.manifest.slides[idx].label]++;
  }
  for (const auto& [label, count] : per_class) CHECK(count == 3);

  const auto again = select_shots(ds.manifest, held, 3, 42);
  CHECK(shots == again);
  const auto different = select_shots(ds.manifest, held, 3, 43);
  CHECK(shots != different);
}

TEST_CASE("too large k raises NotEnoughShots") {
  const EmbeddingDataset ds = small_dataset(13);
  CHECK_THROWS_MATCHES(select_shots(ds.manifest, 1, 1000, 0), Error,
                       Catch::Matchers::Predicate<Error>([](const Error& e) {
                         return e.code() == ErrorCode::NotEnoughShots;
                       }));
}
