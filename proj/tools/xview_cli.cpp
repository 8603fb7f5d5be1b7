// Command-line front end: synth | hoof | pca | split | train | eval | report.

#include <CLI11.hpp>

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <nlohmann/json.hpp>
#include <string>
#include <vector>

#include "xview/error.hpp"
#include "xview/experiment.hpp"
#include "xview/flow.hpp"
#include "xview/synth.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace xview;

namespace {

json load_json(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw Error("cannot open config: " + path);
  json j;
  try {
    is >> j;
  } catch (const json::exception& e) {
    throw Error("bad JSON in " + path + ": " + e.what());
  }
  return j;
}

// Config + seed + format versions, beside the command's outputs. `where` is
// either an output directory or an output file (manifest lands next to it).
void write_run_manifest(const std::string& where, const std::string& command,
                        std::uint64_t seed, const json& config) {
  fs::path p(where);
  const fs::path path = fs::is_directory(p) ? p / "run_manifest.json"
                                            : p.parent_path().empty()
                                                  ? fs::path(p.string() + ".run_manifest.json")
                                                  : p.parent_path() / (p.filename().string() +
                                                                       ".run_manifest.json");
  json j;
  j["command"] = command;
  j["seed"] = seed;
  j["config"] = config;
  j["format_versions"] = {{"flow", 1}, {"features", 1}, {"model", 1}};
  std::ofstream os(path);
  if (!os) throw Error("cannot write run manifest: " + path.string());
  os << j.dump(2) << "\n";
}

SynthConfig synth_config_from_json(const json& j) {
  SynthConfig c;
  c.action_count = j.value("action_count", c.action_count);
  c.videos_per_action = j.value("videos_per_action", c.videos_per_action);
  c.clips_per_video = j.value("clips_per_video", c.clips_per_video);
  c.latent_dim = j.value("latent_dim", c.latent_dim);
  c.feature_dim = j.value("feature_dim", c.feature_dim);
  c.noise_sigma = j.value("noise_sigma", c.noise_sigma);
  c.flow_width = j.value("flow_width", c.flow_width);
  c.flow_height = j.value("flow_height", c.flow_height);
  c.frame_count = j.value("frame_count", c.frame_count);
  const std::string coupling = j.value("coupling", std::string("linear"));
  if (coupling == "linear") {
    c.coupling = SynthConfig::Coupling::linear;
  } else if (coupling == "nonlinear") {
    c.coupling = SynthConfig::Coupling::nonlinear;
  } else {
    throw Error("unknown coupling: " + coupling);
  }
  return c;
}

struct SplitPairs {
  Eigen::MatrixXd src, tgt;
  std::vector<std::string> query_ids;
};

SplitPairs stack_split(const Dataset& d, const FeatureMatrix& store,
                       const std::string& split, const std::string& kind,
                       Direction dir) {
  const View exo_view = direction_exo_view(dir);
  const bool ego_source = direction_is_ego_source(dir);
  std::vector<FeaturePair> pairs;
  for (auto& fp : enumerate_feature_pairs(d, split, kind, store))
    if (fp.view == exo_view) pairs.push_back(std::move(fp));
  if (pairs.empty())
    throw Error("no " + to_string(exo_view) + "-view pairs in split '" + split + "'");
  SplitPairs out;
  const Eigen::Index dim = pairs.front().source.size();
  out.src.resize(static_cast<Eigen::Index>(pairs.size()), dim);
  out.tgt.resize(static_cast<Eigen::Index>(pairs.size()), dim);
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    const Eigen::VectorXd& ego = pairs[i].source;
    const Eigen::VectorXd& exo = pairs[i].target;
    out.src.row(static_cast<Eigen::Index>(i)) = (ego_source ? ego : exo).transpose();
    out.tgt.row(static_cast<Eigen::Index>(i)) = (ego_source ? exo : ego).transpose();
    out.query_ids.push_back(ego_source ? pairs[i].ego_id : pairs[i].exo_id);
  }
  return out;
}

Eigen::MatrixXd vstack(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  Eigen::MatrixXd out(a.rows() + b.rows(), a.cols());
  out.topRows(a.rows()) = a;
  out.bottomRows(b.rows()) = b;
  return out;
}

int run_synth(const std::string& out, const std::string& config_path,
              std::uint64_t seed, bool flow_level) {
  SynthConfig c =
      config_path.empty() ? SynthConfig{} : synth_config_from_json(load_json(config_path));
  c.seed = seed;
  c.validate();
  fs::create_directories(out);

  json cfg;
  cfg["action_count"] = c.action_count;
  cfg["videos_per_action"] = c.videos_per_action;
  cfg["clips_per_video"] = c.clips_per_video;
  cfg["latent_dim"] = c.latent_dim;
  cfg["feature_dim"] = c.feature_dim;
  cfg["noise_sigma"] = c.noise_sigma;
  cfg["coupling"] = c.coupling == SynthConfig::Coupling::linear ? "linear" : "nonlinear";
  cfg["level"] = flow_level ? "flow" : "feature";

  if (flow_level) {
    SynthFlowData data = generate_flow_dataset(c);
    save_manifest(data.dataset, out + "/manifest.json");
    fs::create_directories(out + "/clips");
    for (const auto& clip : data.clips)
      save_flow_clip(clip, out + "/clips/" + clip.clip_id + ".xvmf");
  } else {
    SynthFeatureData data = generate_feature_pairs(c);
    save_manifest(data.dataset, out + "/manifest.json");
    data.features.save(out + "/features.xvft");
  }
  write_run_manifest(out, "synth", seed, cfg);
  return 0;
}

int run_hoof(const std::string& flows_dir, const std::string& out, int bins) {
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(flows_dir))
    if (e.is_regular_file()) files.push_back(e.path());
  if (files.empty()) throw Error("no flow clips in " + flows_dir);
  std::sort(files.begin(), files.end());

  FeatureMatrix store(FeatureKind::hoof32, bins);
  for (const auto& f : files) {
    const FlowClip clip = load_flow_clip(f.string());
    store.add_row(clip.clip_id, hoof(clip, bins));
  }
  store.save(out);
  write_run_manifest(out, "hoof", 0, {{"flows", flows_dir}, {"bins", bins}});
  return 0;
}

int run_pca_fit(const std::string& features, const std::string& out, int dim) {
  const FeatureMatrix x = FeatureMatrix::load(features);
  const PcaModel m = pca_fit(x, dim);
  m.save(out);
  write_run_manifest(out, "pca fit", 0, {{"features", features}, {"dim", dim}});
  return 0;
}

int run_pca_apply(const std::string& features, const std::string& model,
                  const std::string& out) {
  const FeatureMatrix x = FeatureMatrix::load(features);
  const PcaModel m = PcaModel::load(model);
  pca_apply(m, x).save(out);
  write_run_manifest(out, "pca apply", 0, {{"features", features}, {"model", model}});
  return 0;
}

int run_split(const std::string& manifest, const std::string& out, int train, int val,
              int test, std::uint64_t seed) {
  Dataset d = load_manifest(manifest);
  split_dataset(d, {train, val, test}, seed);
  save_manifest(d, out);
  write_run_manifest(out, "split", seed,
                     {{"manifest", manifest}, {"train", train}, {"val", val}, {"test", test}});
  return 0;
}

int run_train(const std::string& manifest, const std::string& features,
              const std::string& model, const std::string& direction,
              const std::string& feature, const std::string& out,
              const TrainConfig& train) {
  const Dataset d = load_manifest(manifest);
  const FeatureMatrix store = FeatureMatrix::load(features);
  const Direction dir = direction_from_string(direction);
  const FeatureKind kind = feature_kind_from_string(feature);
  const SplitPairs tr = stack_split(d, store, "train", feature, dir);
  const SplitPairs va = stack_split(d, store, "val", feature, dir);
  const Eigen::MatrixXd src_full = vstack(tr.src, va.src);
  const Eigen::MatrixXd tgt_full = vstack(tr.tgt, va.tgt);

  fs::create_directories(out);
  if (model == "uniform") {
    MapperModel m;
    m.variant = MapperModel::Variant::direct;
    m.direction = dir;
    save_model(m, out);
  } else if (model == "ols") {
    MapperModel m = fit_ols(src_full, tgt_full);
    m.direction = dir;
    save_model(m, out);
  } else if (model == "ridge") {
    MapperModel m = ridge_protocol(tr.src, tr.tgt, va.src, va.tgt, train);
    m.direction = dir;
    save_model(m, out);
  } else if (model == "reconstruction") {
    auto result = reconstruction_protocol(kind, tr.src, tr.tgt, va.src, va.tgt, train);
    MapperModel m;
    m.variant = MapperModel::Variant::reconstruction;
    m.net = std::move(result.model);
    m.direction = dir;
    m.source_kind = m.target_kind = kind;
    save_model(m, out);
    write_epoch_logs_csv(result.phase1, out + "/epochs_phase1.csv");
    write_epoch_logs_csv(result.phase2, out + "/epochs_phase2.csv");
  } else if (model == "two_stream") {
    auto result = two_stream_protocol(kind, tr.src, tr.tgt, va.src, va.tgt, train);
    result.model.direction = dir;
    save_model(result.model, out);
    write_epoch_logs_csv(result.phase1, out + "/epochs_phase1.csv");
    write_epoch_logs_csv(result.phase2, out + "/epochs_phase2.csv");
  } else {
    throw Error("unknown model: " + model);
  }
  write_run_manifest(out, "train", train.seed,
                     {{"manifest", manifest},
                      {"features", features},
                      {"model", model},
                      {"direction", direction},
                      {"feature", feature}});
  return 0;
}

int run_eval(const std::string& manifest, const std::string& features,
             const std::string& model_dir, const std::string& direction,
             const std::string& feature, const std::string& metric_name,
             const std::string& out) {
  const Dataset d = load_manifest(manifest);
  const FeatureMatrix store = FeatureMatrix::load(features);
  const Direction dir = direction_from_string(direction);
  const Metric metric = metric_from_string(metric_name);
  const SplitPairs te = stack_split(d, store, "test", feature, dir);

  std::vector<RankingResult> results;
  if (model_dir_variant(model_dir) == "two_stream") {
    TwoStreamScorer scorer = load_scorer(model_dir);
    for (Eigen::Index q = 0; q < te.src.rows(); ++q)
      results.push_back(rank_gallery_scored(scorer, te.src.row(q).transpose(), te.tgt,
                                            static_cast<int>(q), te.query_ids[q]));
  } else {
    const MapperModel mapper = load_mapper(model_dir);
    for (Eigen::Index q = 0; q < te.src.rows(); ++q)
      results.push_back(rank_gallery_mapped(mapper, te.src.row(q).transpose(), te.tgt,
                                            static_cast<int>(q), metric, te.query_ids[q]));
  }
  const std::vector<double> curve = cmc(results);
  const double a = auc(curve);

  fs::create_directories(out);
  {
    std::ofstream os(out + "/cmc.csv");
    os << "k,cmc_k\n";
    os.precision(10);
    for (std::size_t k = 0; k < curve.size(); ++k) os << (k + 1) << "," << curve[k] << "\n";
  }
  {
    json j;
    j["auc"] = a;
    j["gallery_size"] = static_cast<int>(te.tgt.rows());
    j["metric"] = to_string(metric);
    j["tie_policy"] = "pessimistic";
    std::ofstream os(out + "/metrics.json");
    os << j.dump(2) << "\n";
  }
  write_run_manifest(out, "eval", 0,
                     {{"manifest", manifest},
                      {"features", features},
                      {"model_dir", model_dir},
                      {"direction", direction},
                      {"metric", metric_name}});
  std::cout << "auc " << a << "\n";
  return 0;
}

int run_report(const std::string& manifest, const std::string& features,
               const std::string& feature, const std::vector<std::string>& directions,
               const std::vector<std::string>& models, const std::string& metric_name,
               const std::string& out, const TrainConfig& train) {
  const Dataset d = load_manifest(manifest);
  const FeatureMatrix store = FeatureMatrix::load(features);
  ExperimentConfig config;
  config.kind = feature_kind_from_string(feature);
  config.metric = metric_from_string(metric_name);
  config.train = train;
  if (!directions.empty()) {
    config.directions.clear();
    for (const auto& s : directions) config.directions.push_back(direction_from_string(s));
  }
  if (!models.empty()) config.models = models;
  const Report report = run_experiment(config, d, store);
  write_report(report, config, out);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"cross-view motion mapping pipeline"};
  app.require_subcommand(1);

  std::string out, config_path, manifest, features, model, model_dir;
  std::string direction = "ego2side";
  std::string feature = "hoof32";
  std::string metric = "euclidean";
  std::vector<std::string> directions, models;
  std::uint64_t seed = 0;
  bool flow_level = false;
  int bins = 32, pca_dim = 128;
  int n_train = 0, n_val = 0, n_test = 0;
  TrainConfig train;

  auto* synth = app.add_subcommand("synth", "generate a synthetic paired dataset");
  synth->add_option("--out", out, "output directory")->required();
  synth->add_option("--config", config_path, "generator config (JSON)");
  synth->add_option("--seed", seed, "master seed");
  synth->add_flag("--flow", flow_level, "emit flow clips instead of features");

  auto* hoof_cmd = app.add_subcommand("hoof", "flow clips -> HOOF feature store");
  hoof_cmd->add_option("--flows", manifest, "directory of flow clip files")->required();
  hoof_cmd->add_option("--out", out, "output feature store path")->required();
  hoof_cmd->add_option("--bins", bins, "histogram bins");

  auto* pca = app.add_subcommand("pca", "PCA fit / apply");
  pca->require_subcommand(1);
  auto* pca_fit_cmd = pca->add_subcommand("fit", "fit a PCA basis");
  pca_fit_cmd->add_option("--features", features, "input feature store")->required();
  pca_fit_cmd->add_option("--out", out, "output model directory")->required();
  pca_fit_cmd->add_option("--dim", pca_dim, "output dimensionality");
  auto* pca_apply_cmd = pca->add_subcommand("apply", "project a feature store");
  pca_apply_cmd->add_option("--features", features, "input feature store")->required();
  pca_apply_cmd->add_option("--model", model, "PCA model directory")->required();
  pca_apply_cmd->add_option("--out", out, "output feature store path")->required();

  auto* split = app.add_subcommand("split", "assign video-level splits");
  split->add_option("--manifest", manifest, "input manifest")->required();
  split->add_option("--out", out, "output manifest")->required();
  split->add_option("--train", n_train, "train videos")->required();
  split->add_option("--val", n_val, "val videos")->required();
  split->add_option("--test", n_test, "test videos")->required();
  split->add_option("--seed", seed, "split seed");

  auto add_train_flags = [&](CLI::App* cmd) {
    cmd->add_option("--seed", train.seed, "training seed");
    cmd->add_option("--batch-size", train.batch_size, "mini-batch size");
    cmd->add_option("--epochs", train.max_epochs, "max epochs");
    cmd->add_option("--lr", train.lr, "Adam learning rate");
    cmd->add_option("--negative-ratio", train.negative_ratio, "negatives per positive");
    cmd->add_option("--lambda", train.ridge_lambda, "ridge lambda");
    cmd->add_flag("--ridge-grid", train.ridge_grid, "grid-select lambda on val");
  };

  auto* train_cmd = app.add_subcommand("train", "fit one model for one direction");
  train_cmd->add_option("--manifest", manifest, "dataset manifest")->required();
  train_cmd->add_option("--features", features, "feature store")->required();
  train_cmd->add_option("--model", model, "uniform|ols|ridge|reconstruction|two_stream")
      ->required();
  train_cmd->add_option("--direction", direction, "mapping direction");
  train_cmd->add_option("--feature", feature, "hoof32|c3d128");
  train_cmd->add_option("--out", out, "output model directory")->required();
  add_train_flags(train_cmd);

  auto* eval_cmd = app.add_subcommand("eval", "rank the test gallery with a model");
  eval_cmd->add_option("--manifest", manifest, "dataset manifest")->required();
  eval_cmd->add_option("--features", features, "feature store")->required();
  eval_cmd->add_option("--model-dir", model_dir, "trained model directory")->required();
  eval_cmd->add_option("--direction", direction, "mapping direction");
  eval_cmd->add_option("--feature", feature, "hoof32|c3d128");
  eval_cmd->add_option("--metric", metric, "euclidean|cosine");
  eval_cmd->add_option("--out", out, "output directory")->required();

  auto* report_cmd = app.add_subcommand("report", "full directions x models experiment");
  report_cmd->add_option("--manifest", manifest, "dataset manifest")->required();
  report_cmd->add_option("--features", features, "feature store")->required();
  report_cmd->add_option("--feature", feature, "hoof32|c3d128");
  report_cmd->add_option("--direction", directions, "directions to run (repeatable)");
  report_cmd->add_option("--model", models, "models to run (repeatable)");
  report_cmd->add_option("--metric", metric, "euclidean|cosine");
  report_cmd->add_option("--out", out, "output directory")->required();
  add_train_flags(report_cmd);

  CLI11_PARSE(app, argc, argv);

  try {
    if (synth->parsed()) return run_synth(out, config_path, seed, flow_level);
    if (hoof_cmd->parsed()) return run_hoof(manifest, out, bins);
    if (pca->parsed()) {
      if (pca_fit_cmd->parsed()) return run_pca_fit(features, out, pca_dim);
      return run_pca_apply(features, model, out);
    }
    if (split->parsed()) return run_split(manifest, out, n_train, n_val, n_test, seed);
    if (train_cmd->parsed())
      return run_train(manifest, features, model, direction, feature, out, train);
    if (eval_cmd->parsed())
      return run_eval(manifest, features, model_dir, direction, feature, metric, out);
    if (report_cmd->parsed())
      return run_report(manifest, features, feature, directions, models, metric, out, train);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  std::cerr << "error: no subcommand\n";
  return 1;
}
