// scda: command-line front end for the domain-adaptation pipeline.
// Each subcommand wraps one library operation and writes its outputs into a
// run directory; outputs are deterministic for a fixed config and seed.

#include <CLI11.hpp>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include "scda/config.hpp"
#include "scda/core.hpp"
#include "scda/harness.hpp"
#include "scda/io.hpp"
#include "scda/pca.hpp"
#include "scda/report.hpp"
#include "scda/stain.hpp"
#include "scda/synth.hpp"
#include "scda/trainer.hpp"

namespace fs = std::filesystem;
using namespace scda;

namespace {

struct CommonOpts {
  std::string config_path;
  std::uint64_t seed = 0;
  bool seed_set = false;
  std::string out_dir;
};

void add_common(CLI::App* cmd, CommonOpts& opts, bool needs_out = true) {
  cmd->add_option("--config", opts.config_path, "configuration file (TOML)");
  cmd->add_option("--seed", opts.seed, "global seed override")
      ->each([&](const std::string&) { opts.seed_set = true; });
  auto* out = cmd->add_option("--out", opts.out_dir, "output directory");
  if (needs_out) out->required();
}

RunConfig resolve_config(const CommonOpts& opts) {
  RunConfig cfg;
  if (!opts.config_path.empty()) cfg = load_run_config(opts.config_path);
  if (opts.seed_set) cfg.seed = opts.seed;
  cfg.synth.seed = cfg.seed;
  cfg.train.seed = cfg.seed;
  return cfg;
}

void dump_effective(const fs::path& dir, const RunConfig& cfg) {
  detail::write_file(dir / "effective_config.toml", dump_run_config(cfg));
}

std::vector<int> resolve_centers(const DatasetManifest& manifest,
                                 const std::string& csv) {
  std::vector<int> centers;
  if (csv.empty()) {
    for (int h = 0; h < static_cast<int>(manifest.centers.size()); ++h)
      centers.push_back(h);
    return centers;
  }
  std::size_t start = 0;
  while (start <= csv.size()) {
    const std::size_t comma = csv.find(',', start);
    const std::string name =
        csv.substr(start, comma == std::string::npos ? comma : comma - start);
    const int idx = manifest.center_index(name);
    require(idx >= 0, ErrorCode::BadConfig, "unknown center '" + name + "'");
    centers.push_back(idx);
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  return centers;
}

EmbeddingDataset load_embedding_dataset(const std::string& dir) {
  const DatasetManifest manifest = load_manifest(fs::path(dir) / "manifest.json");
  require(!manifest.embeddings_file.empty(), ErrorCode::BadManifest,
          "dataset in '" + dir + "' has no slide embeddings; run `scda aggregate` first");
  EmbeddingDataset ds;
  ds.manifest = manifest;
  ds.Z = load_matrix(fs::path(dir) / manifest.embeddings_file);
  ds.validate();
  return ds;
}

stain::StainProfile profile_from(const std::string& path,
                                 const stain::MacenkoParams& params) {
  if (path.size() >= 5 && path.substr(path.size() - 5) == ".json")
    return stain::load_profile(path);
  return stain::estimate_stain_profile(load_ppm(path), params);
}

void write_grid_outputs(const fs::path& out, const GridReport& report,
                        const DatasetManifest& manifest) {
  detail::write_file(out / "report.csv", grid_report_csv(report, manifest));
  for (const auto& cell : report.cells) {
    const std::string name = "confusion_" + cell.method + "_" +
                             detail::center_set_label(manifest, cell.train_centers) +
                             "_" + detail::center_set_label(manifest, cell.test_centers) +
                             ".csv";
    detail::write_file(out / name, confusion_csv(cell.confusion, manifest.classes));
  }
  for (std::size_t i = 0; i < report.train_reports.size(); ++i)
    detail::write_file(out / ("loss_trace_" + report.train_report_rows[i] + ".csv"),
                       loss_trace_csv(report.train_reports[i]));
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"supervised contrastive domain adaptation for slide embeddings"};
  app.require_subcommand(1);

  // synth
  auto* synth_cmd = app.add_subcommand("synth", "generate a synthetic multi-center dataset");
  CommonOpts synth_opts;
  add_common(synth_cmd, synth_opts);

  // split
  auto* split_cmd = app.add_subcommand("split", "assign stratified train/test splits");
  CommonOpts split_opts;
  std::string split_data;
  double split_fraction = -1.0;
  add_common(split_cmd, split_opts, false);
  split_cmd->add_option("--data", split_data, "dataset directory")->required();
  split_cmd->add_option("--fraction", split_fraction, "train fraction override");

  // aggregate
  auto* agg_cmd = app.add_subcommand("aggregate", "pool patch bags into slide embeddings");
  CommonOpts agg_opts;
  std::string agg_data;
  add_common(agg_cmd, agg_opts, false);
  agg_cmd->add_option("--data", agg_data, "dataset directory")->required();

  // train
  auto* train_cmd = app.add_subcommand("train", "train the adapter head");
  CommonOpts train_opts;
  std::string train_data;
  double train_lr = -1.0, train_tau = -1.0;
  int train_steps = -1;
  add_common(train_cmd, train_opts);
  train_cmd->add_option("--data", train_data, "dataset directory")->required();
  train_cmd->add_option("--lr", train_lr, "learning rate override");
  train_cmd->add_option("--tau", train_tau, "temperature override");
  train_cmd->add_option("--steps", train_steps, "step count override");

  // transform
  auto* tf_cmd = app.add_subcommand("transform", "map embeddings into the common space");
  CommonOpts tf_opts;
  std::string tf_data, tf_head;
  add_common(tf_cmd, tf_opts);
  tf_cmd->add_option("--data", tf_data, "dataset directory")->required();
  tf_cmd->add_option("--head", tf_head, "trained head (.scdh)")->required();

  // eval
  auto* eval_cmd = app.add_subcommand("eval", "prototype classification metrics");
  CommonOpts eval_opts;
  std::string eval_data, eval_train_centers, eval_test_centers;
  add_common(eval_cmd, eval_opts);
  eval_cmd->add_option("--data", eval_data, "dataset directory")->required();
  eval_cmd->add_option("--train-centers", eval_train_centers, "comma-separated center names");
  eval_cmd->add_option("--test-centers", eval_test_centers, "comma-separated center names");

  // grid
  auto* grid_cmd = app.add_subcommand("grid", "cross-center evaluation grid");
  CommonOpts grid_opts;
  std::string grid_data;
  double grid_lr = -1.0, grid_tau = -1.0;
  int grid_steps = -1;
  add_common(grid_cmd, grid_opts);
  grid_cmd->add_option("--data", grid_data, "dataset directory")->required();
  grid_cmd->add_option("--lr", grid_lr, "learning rate override");
  grid_cmd->add_option("--tau", grid_tau, "temperature override");
  grid_cmd->add_option("--steps", grid_steps, "step count override");

  // fewshot
  auto* fs_cmd = app.add_subcommand("fewshot", "few-shot adaptation curves");
  CommonOpts fs_opts;
  std::string fs_data, fs_base;
  std::vector<int> fs_k;
  int fs_seeds = -1;
  add_common(fs_cmd, fs_opts);
  fs_cmd->add_option("--data", fs_data, "dataset directory")->required();
  fs_cmd->add_option("--base-center", fs_base, "base (fully trained) center name");
  fs_cmd->add_option("--k", fs_k, "shot counts override")->delimiter(',');
  fs_cmd->add_option("--n-seeds", fs_seeds, "seed count override");

  // stain-fit
  auto* sf_cmd = app.add_subcommand("stain-fit", "estimate a stain profile from an image");
  CommonOpts sf_opts;
  std::string sf_input;
  add_common(sf_cmd, sf_opts);
  sf_cmd->add_option("--input", sf_input, "input image (.ppm)")->required();

  // stain-normalize
  auto* sn_cmd = app.add_subcommand("stain-normalize", "normalize an image to a target stain");
  CommonOpts sn_opts;
  std::string sn_input, sn_target;
  add_common(sn_cmd, sn_opts);
  sn_cmd->add_option("--input", sn_input, "input image (.ppm)")->required();
  sn_cmd->add_option("--target", sn_target, "target image (.ppm) or profile (.json)")
      ->required();

  // project2d
  auto* proj_cmd = app.add_subcommand("project2d", "2D principal-component projection");
  CommonOpts proj_opts;
  std::string proj_data;
  add_common(proj_cmd, proj_opts);
  proj_cmd->add_option("--data", proj_data, "dataset directory")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*synth_cmd) {
      const RunConfig cfg = resolve_config(synth_opts);
      const BagDataset ds = generate(cfg.synth);
      save_bag_dataset(synth_opts.out_dir, ds);
      dump_effective(synth_opts.out_dir, cfg);
      std::cout << "wrote " << ds.manifest.slides.size() << " slides to "
                << synth_opts.out_dir << "\n";
    } else if (*split_cmd) {
      RunConfig cfg = resolve_config(split_opts);
      if (split_fraction > 0.0) cfg.train_fraction = split_fraction;
      const fs::path dir = split_data;
      DatasetManifest manifest = load_manifest(dir / "manifest.json");
      manifest = split_dataset(manifest, cfg.train_fraction, cfg.seed);
      save_manifest(dir / "manifest.json", manifest);
      std::cout << "assigned splits for " << manifest.slides.size() << " slides\n";
    } else if (*agg_cmd) {
      const fs::path dir = agg_data;
      const BagDataset bags = load_bag_dataset(dir);
      EmbeddingDataset ds = aggregate_bags(bags);
      ds.manifest.embeddings_file = "embeddings.scda";
      save_matrix(dir / ds.manifest.embeddings_file, ds.Z);
      save_manifest(dir / "manifest.json", ds.manifest);
      std::cout << "aggregated " << ds.Z.rows() << " slide embeddings (d="
                << ds.Z.cols() << ")\n";
    } else if (*train_cmd) {
      RunConfig cfg = resolve_config(train_opts);
      if (train_lr > 0.0) cfg.train.learning_rate = train_lr;
      if (train_tau > 0.0) cfg.train.temperature = train_tau;
      if (train_steps >= 0) cfg.train.steps = train_steps;
      const EmbeddingDataset ds = load_embedding_dataset(train_data);
      const auto train_idx = split_indices(ds.manifest, Split::Train);
      const TrainReport report = train(ds, train_idx, cfg.train);
      const fs::path out = train_opts.out_dir;
      fs::create_directories(out);
      save_head(out / "head.scdh", report.final_head);
      detail::write_file(out / "loss_trace.csv", loss_trace_csv(report));
      dump_effective(out, cfg);
      std::cout << "trained " << cfg.train.steps << " steps; head written to "
                << (out / "head.scdh").string() << "\n";
    } else if (*tf_cmd) {
      const RunConfig cfg = resolve_config(tf_opts);
      const EmbeddingDataset ds = load_embedding_dataset(tf_data);
      const AdapterHead head = load_head(tf_head);
      EmbeddingDataset out_ds;
      out_ds.manifest = ds.manifest;
      for (auto& rec : out_ds.manifest.slides) rec.patches_file.clear();
      out_ds.manifest.embeddings_file = "embeddings.scda";
      out_ds.Z = transform_embeddings(head, ds.Z).cast<float>();
      save_dataset(tf_opts.out_dir, out_ds);
      dump_effective(tf_opts.out_dir, cfg);
      std::cout << "transformed " << out_ds.Z.rows() << " embeddings\n";
    } else if (*eval_cmd) {
      const RunConfig cfg = resolve_config(eval_opts);
      const EmbeddingDataset ds = load_embedding_dataset(eval_data);
      const auto train_centers = resolve_centers(ds.manifest, eval_train_centers);
      const auto test_centers = resolve_centers(ds.manifest, eval_test_centers);
      const MatrixXd reps = l2_normalize_rows(ds.Z.cast<double>());
      const auto train_idx = split_indices(ds.manifest, Split::Train, train_centers);
      const auto test_idx = split_indices(ds.manifest, Split::Test, test_centers);
      const PrototypeBank bank =
          build_prototypes(detail::gather_rows(reps, train_idx),
                           detail::labels_for(ds.manifest, train_idx),
                           ds.manifest.classes);
      const ConfusionMatrix cm =
          evaluate(bank, detail::gather_rows(reps, test_idx),
                   detail::labels_for(ds.manifest, test_idx));
      const BalancedAccuracy bacc = balanced_accuracy(cm);
      const fs::path out = eval_opts.out_dir;
      std::string csv = "method,train_centers,test_centers,k,seed,bacc\n";
      csv += "prototype," + detail::center_set_label(ds.manifest, train_centers) + "," +
             detail::center_set_label(ds.manifest, test_centers) + ",," +
             std::to_string(cfg.seed) + "," + fmt_double(bacc.value) + "\n";
      detail::write_file(out / "report.csv", csv);
      detail::write_file(out / "confusion.csv", confusion_csv(cm, ds.manifest.classes));
      dump_effective(out, cfg);
      std::cout << "bacc " << fmt_double(bacc.value) << "\n";
    } else if (*grid_cmd) {
      RunConfig cfg = resolve_config(grid_opts);
      if (grid_lr > 0.0) cfg.train.learning_rate = grid_lr;
      if (grid_tau > 0.0) cfg.train.temperature = grid_tau;
      if (grid_steps >= 0) cfg.train.steps = grid_steps;
      const EmbeddingDataset ds = load_embedding_dataset(grid_data);
      const GridReport report = run_crosscenter_grid(ds, cfg.train);
      const fs::path out = grid_opts.out_dir;
      fs::create_directories(out);
      write_grid_outputs(out, report, ds.manifest);
      dump_effective(out, cfg);
      std::cout << "wrote " << report.cells.size() << " grid cells to "
                << (out / "report.csv").string() << "\n";
    } else if (*fs_cmd) {
      RunConfig cfg = resolve_config(fs_opts);
      if (!fs_base.empty()) cfg.fewshot_base_center = fs_base;
      if (!fs_k.empty()) cfg.fewshot_k = fs_k;
      if (fs_seeds > 0) cfg.fewshot_n_seeds = fs_seeds;
      const EmbeddingDataset ds = load_embedding_dataset(fs_data);
      FewShotConfig fsc;
      fsc.base_center = cfg.fewshot_base_center.empty()
                            ? 0
                            : ds.manifest.center_index(cfg.fewshot_base_center);
      require(fsc.base_center >= 0, ErrorCode::BadConfig,
              "unknown center '" + cfg.fewshot_base_center + "'");
      fsc.k_values = cfg.fewshot_k;
      fsc.n_seeds = cfg.fewshot_n_seeds;
      fsc.include_zero_shot = cfg.fewshot_zero_shot;
      fsc.include_all = cfg.fewshot_all;
      fsc.shots_in_prototypes = cfg.fewshot_shots_in_prototypes;
      const FewShotReport report = run_fewshot(ds, fsc, cfg.train);
      const fs::path out = fs_opts.out_dir;
      fs::create_directories(out);
      detail::write_file(out / "report.csv", fewshot_report_csv(report, ds.manifest));
      detail::write_file(out / "aggregate.csv", fewshot_aggregate_csv(report, ds.manifest));
      dump_effective(out, cfg);
      std::cout << "wrote " << report.rows.size() << " few-shot rows to "
                << (out / "report.csv").string() << "\n";
    } else if (*sf_cmd) {
      const RunConfig cfg = resolve_config(sf_opts);
      const stain::StainProfile profile =
          stain::estimate_stain_profile(load_ppm(sf_input), cfg.stain_params);
      const fs::path out = sf_opts.out_dir;
      stain::save_profile(out / "profile.json", profile);
      dump_effective(out, cfg);
      std::cout << "wrote " << (out / "profile.json").string() << "\n";
    } else if (*sn_cmd) {
      const RunConfig cfg = resolve_config(sn_opts);
      const RGBImage input = load_ppm(sn_input);
      const stain::StainProfile source =
          stain::estimate_stain_profile(input, cfg.stain_params);
      const stain::StainProfile target = profile_from(sn_target, cfg.stain_params);
      const RGBImage normalized =
          stain::normalize_to_target(input, source, target, cfg.stain_params);
      const fs::path out = sn_opts.out_dir;
      save_ppm(out / "normalized.ppm", normalized);
      stain::save_profile(out / "source_profile.json", source);
      stain::save_profile(out / "target_profile.json", target);
      dump_effective(out, cfg);
      std::cout << "wrote " << (out / "normalized.ppm").string() << "\n";
    } else if (*proj_cmd) {
      const RunConfig cfg = resolve_config(proj_opts);
      const EmbeddingDataset ds = load_embedding_dataset(proj_data);
      const Projection2D proj = pca2d(ds.Z.cast<double>());
      const fs::path out = proj_opts.out_dir;
      detail::write_file(out / "projection.csv", projection_csv(ds.manifest, proj));
      detail::write_file(out / "projection.svg", projection_svg(ds.manifest, proj));
      dump_effective(out, cfg);
      std::cout << "wrote " << (out / "projection.csv").string() << "\n";
    }
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: Unhandled: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
