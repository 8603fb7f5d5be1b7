#pragma once

#include <map>
#include <string>
#include <vector>

#include "xview/datamodel.hpp"
#include "xview/eval.hpp"
#include "xview/training.hpp"

namespace xview {

// Table column order mirrors the report layout.
inline const std::vector<std::string> kModelColumns = {
    "random", "uniform", "ols", "ridge", "reconstruction", "two_stream"};

std::string model_display_name(const std::string& model);

struct ExperimentConfig {
  FeatureKind kind = FeatureKind::hoof32;
  std::vector<Direction> directions = {Direction::ego2side, Direction::side2ego,
                                       Direction::ego2top, Direction::top2ego};
  std::vector<std::string> models = kModelColumns;
  TrainConfig train;
  Metric metric = Metric::euclidean;

  void validate() const;
};

struct DirectionResult {
  Direction direction = Direction::ego2side;
  int gallery_size = 0;
  std::map<std::string, double> auc;                        // model -> AUC %
  std::map<std::string, std::vector<double>> cmc_curves;    // model -> CMC(k)
};

struct Report {
  std::vector<DirectionResult> rows;
};

// Trains every requested model per direction on the train(/val) splits and
// evaluates every test query against the full test gallery of the target
// view. The "random" column is the analytic baseline 100 (N+1) / (2N).
Report run_experiment(const ExperimentConfig& config, const Dataset& dataset,
                      const FeatureMatrix& store);

// Emits summary.csv / summary.json (directions x models), one
// cmc_<direction>_<model>.csv per curve, a plots-ready long-format
// cmc_long.csv (model,direction,k,cmc_k), and run_manifest.json.
void write_report(const Report& report, const ExperimentConfig& config,
                  const std::string& out_dir);

}  // namespace xview
