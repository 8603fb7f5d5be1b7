#include "xview/experiment.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>

#include <nlohmann/json.hpp>

#include "xview/error.hpp"

namespace xview {

using nlohmann::json;

std::string model_display_name(const std::string& model) {
  if (model == "random") return "Random";
  if (model == "uniform") return "Uniform";
  if (model == "ols") return "Regression";
  if (model == "ridge") return "Regression L2";
  if (model == "reconstruction") return "Non-linear Mapping";
  if (model == "two_stream") return "Two-stream";
  throw Error("unknown model: " + model);
}

void ExperimentConfig::validate() const {
  if (directions.empty()) throw Error("ExperimentConfig: no directions");
  if (models.empty()) throw Error("ExperimentConfig: no models");
  for (const auto& m : models) model_display_name(m);  // rejects unknown names
  train.validate();
}

namespace {

struct DirectionData {
  Eigen::MatrixXd src_train, tgt_train;
  Eigen::MatrixXd src_val, tgt_val;
  Eigen::MatrixXd src_test, tgt_test;
  std::vector<std::string> test_query_ids;
};

// Stacks the split's feature pairs for one direction; source/target follow
// the direction (ego->exo or exo->ego).
void fill_split(const Dataset& d, const FeatureMatrix& store, const std::string& split,
                const std::string& kind, Direction dir, Eigen::MatrixXd& src,
                Eigen::MatrixXd& tgt, std::vector<std::string>* query_ids) {
  const View exo_view = direction_exo_view(dir);
  const bool ego_source = direction_is_ego_source(dir);
  std::vector<FeaturePair> pairs;
  for (auto& fp : enumerate_feature_pairs(d, split, kind, store))
    if (fp.view == exo_view) pairs.push_back(std::move(fp));
  if (pairs.empty())
    throw Error("no " + to_string(exo_view) + "-view pairs in split '" + split + "'");
  const Eigen::Index dim = pairs.front().source.size();
  src.resize(static_cast<Eigen::Index>(pairs.size()), dim);
  tgt.resize(static_cast<Eigen::Index>(pairs.size()), dim);
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    const Eigen::VectorXd& ego = pairs[i].source;
    const Eigen::VectorXd& exo = pairs[i].target;
    src.row(static_cast<Eigen::Index>(i)) = (ego_source ? ego : exo).transpose();
    tgt.row(static_cast<Eigen::Index>(i)) = (ego_source ? exo : ego).transpose();
    if (query_ids)
      query_ids->push_back(ego_source ? pairs[i].ego_id : pairs[i].exo_id);
  }
}

DirectionData collect_direction(const Dataset& d, const FeatureMatrix& store,
                                const std::string& kind, Direction dir) {
  DirectionData data;
  fill_split(d, store, "train", kind, dir, data.src_train, data.tgt_train, nullptr);
  fill_split(d, store, "val", kind, dir, data.src_val, data.tgt_val, nullptr);
  fill_split(d, store, "test", kind, dir, data.src_test, data.tgt_test,
             &data.test_query_ids);
  return data;
}

Eigen::MatrixXd vstack(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  Eigen::MatrixXd out(a.rows() + b.rows(), a.cols());
  out.topRows(a.rows()) = a;
  out.bottomRows(b.rows()) = b;
  return out;
}

std::vector<RankingResult> rank_all_mapped(const MapperModel& m, const DirectionData& data,
                                           Metric metric) {
  std::vector<RankingResult> results;
  for (Eigen::Index q = 0; q < data.src_test.rows(); ++q)
    results.push_back(rank_gallery_mapped(m, data.src_test.row(q).transpose(),
                                          data.tgt_test, static_cast<int>(q), metric,
                                          data.test_query_ids[static_cast<std::size_t>(q)]));
  return results;
}

}  // namespace

Report run_experiment(const ExperimentConfig& config, const Dataset& dataset,
                      const FeatureMatrix& store) {
  config.validate();
  const std::string kind = to_string(config.kind);

  Report report;
  for (Direction dir : config.directions) {
    DirectionData data = collect_direction(dataset, store, kind, dir);
    DirectionResult row;
    row.direction = dir;
    row.gallery_size = static_cast<int>(data.tgt_test.rows());
    const int n = row.gallery_size;

    // Linear-family fits use train + val (no epoch selection involved).
    const Eigen::MatrixXd src_full = vstack(data.src_train, data.src_val);
    const Eigen::MatrixXd tgt_full = vstack(data.tgt_train, data.tgt_val);

    for (const std::string& model : config.models) {
      if (model == "random") {
        row.auc[model] = random_baseline_auc(n);
        std::vector<double> curve(static_cast<std::size_t>(n));
        for (int k = 1; k <= n; ++k)
          curve[static_cast<std::size_t>(k) - 1] = static_cast<double>(k) / n;
        row.cmc_curves[model] = curve;
        continue;
      }
      std::vector<RankingResult> results;
      if (model == "uniform") {
        MapperModel m;
        m.variant = MapperModel::Variant::direct;
        m.direction = dir;
        results = rank_all_mapped(m, data, config.metric);
      } else if (model == "ols") {
        MapperModel m = fit_ols(src_full, tgt_full);
        m.direction = dir;
        results = rank_all_mapped(m, data, config.metric);
      } else if (model == "ridge") {
        MapperModel m = ridge_protocol(data.src_train, data.tgt_train, data.src_val,
                                       data.tgt_val, config.train);
        m.direction = dir;
        results = rank_all_mapped(m, data, config.metric);
      } else if (model == "reconstruction") {
        auto protocol = reconstruction_protocol(config.kind, data.src_train,
                                                data.tgt_train, data.src_val,
                                                data.tgt_val, config.train);
        MapperModel m;
        m.variant = MapperModel::Variant::reconstruction;
        m.net = std::move(protocol.model);
        m.direction = dir;
        results = rank_all_mapped(m, data, config.metric);
      } else if (model == "two_stream") {
        auto protocol = two_stream_protocol(config.kind, data.src_train, data.tgt_train,
                                            data.src_val, data.tgt_val, config.train);
        for (Eigen::Index q = 0; q < data.src_test.rows(); ++q)
          results.push_back(rank_gallery_scored(
              protocol.model, data.src_test.row(q).transpose(), data.tgt_test,
              static_cast<int>(q), data.test_query_ids[static_cast<std::size_t>(q)]));
      }
      row.cmc_curves[model] = cmc(results);
      row.auc[model] = auc(row.cmc_curves[model]);
    }
    report.rows.push_back(std::move(row));
  }
  return report;
}

void write_report(const Report& report, const ExperimentConfig& config,
                  const std::string& out_dir) {
  namespace fs = std::filesystem;
  fs::create_directories(out_dir);

  // Summary table, directions x models.
  {
    std::ofstream os(out_dir + "/summary.csv");
    if (!os) throw Error("cannot open for writing: " + out_dir + "/summary.csv");
    os << "direction";
    for (const auto& m : config.models) os << "," << model_display_name(m);
    os << "\n";
    os.precision(6);
    for (const auto& row : report.rows) {
      os << to_string(row.direction);
      for (const auto& m : config.models) os << "," << row.auc.at(m);
      os << "\n";
    }
  }
  {
    json j;
    j["metric"] = to_string(config.metric);
    j["tie_policy"] = "pessimistic";
    j["feature_kind"] = to_string(config.kind);
    j["columns"] = json::array();
    for (const auto& m : config.models) j["columns"].push_back(model_display_name(m));
    j["rows"] = json::array();
    for (const auto& row : report.rows) {
      json r;
      r["direction"] = to_string(row.direction);
      r["gallery_size"] = row.gallery_size;
      for (const auto& m : config.models) r["auc"][m] = row.auc.at(m);
      j["rows"].push_back(r);
    }
    std::ofstream os(out_dir + "/summary.json");
    if (!os) throw Error("cannot open for writing: " + out_dir + "/summary.json");
    os << j.dump(2) << "\n";
  }

  {
    json j;
    j["command"] = "report";
    j["seed"] = config.train.seed;
    j["metric"] = to_string(config.metric);
    j["feature_kind"] = to_string(config.kind);
    j["directions"] = json::array();
    for (Direction d : config.directions) j["directions"].push_back(to_string(d));
    j["models"] = config.models;
    j["train"] = {{"batch_size", config.train.batch_size},
                  {"max_epochs", config.train.max_epochs},
                  {"lr", config.train.lr},
                  {"negative_ratio", config.train.negative_ratio},
                  {"ridge_lambda", config.train.ridge_lambda},
                  {"ridge_grid", config.train.ridge_grid}};
    j["format_versions"] = {{"flow", 1}, {"features", 1}, {"model", 1}};
    std::ofstream os(out_dir + "/run_manifest.json");
    if (!os) throw Error("cannot open for writing: " + out_dir + "/run_manifest.json");
    os << j.dump(2) << "\n";
  }

  // Per-model curves plus a plots-ready long format.
  std::ofstream long_os(out_dir + "/cmc_long.csv");
  if (!long_os) throw Error("cannot open for writing: " + out_dir + "/cmc_long.csv");
  long_os << "model,direction,k,cmc_k\n";
  long_os.precision(10);
  for (const auto& row : report.rows) {
    for (const auto& m : config.models) {
      const auto& curve = row.cmc_curves.at(m);
      std::ofstream os(out_dir + "/cmc_" + to_string(row.direction) + "_" + m + ".csv");
      os << "k,cmc_k\n";
      os.precision(10);
      for (std::size_t k = 0; k < curve.size(); ++k) {
        os << (k + 1) << "," << curve[k] << "\n";
        long_os << m << "," << to_string(row.direction) << "," << (k + 1) << ","
                << curve[k] << "\n";
      }
    }
  }
}

}  // namespace xview
