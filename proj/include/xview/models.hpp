#pragma once

#include <Eigen/Dense>
#include <string>

#include "xview/datamodel.hpp"
#include "xview/features.hpp"
#include "xview/nn.hpp"

namespace xview {

enum class Direction { ego2side, side2ego, ego2top, top2ego };

std::string to_string(Direction d);
Direction direction_from_string(const std::string& s);
bool direction_is_ego_source(Direction d);
View direction_exo_view(Direction d);

// Any trained source -> target-space transform usable for ranking by
// distance. `direct` is the identity baseline and requires equal dims.
struct MapperModel {
  enum class Variant { direct, linear, ridge, reconstruction };
  Variant variant = Variant::direct;

  Eigen::MatrixXd weights;  // target_dim x source_dim (linear/ridge)
  Eigen::VectorXd bias;     // empty unless fitted with a bias column
  double lambda = 0.0;
  Network net;  // reconstruction only

  FeatureKind source_kind = FeatureKind::hoof32;
  FeatureKind target_kind = FeatureKind::hoof32;
  Direction direction = Direction::ego2side;

  // Rows = samples; reconstruction nets run in infer mode.
  Eigen::MatrixXd map(const Eigen::MatrixXd& x) const;
  Eigen::VectorXd map(const Eigen::VectorXd& x) const;

  static std::string variant_name(Variant v);
  static Variant variant_from_string(const std::string& s);
};

// W = argmin sum ||W x_i - y_i||^2 via column-pivoted QR. Rank-deficient
// inputs raise an error pointing at fit_ridge.
MapperModel fit_ols(const Eigen::MatrixXd& x, const Eigen::MatrixXd& y,
                    bool with_bias = false);

// W = argmin sum ||W x_i - y_i||^2 + lambda ||W||_F^2 via the regularized
// normal equations; well-posed for any lambda > 0.
MapperModel fit_ridge(const Eigen::MatrixXd& x, const Eigen::MatrixXd& y,
                      double lambda, bool with_bias = false);

// 5 dense blocks; hidden blocks carry BatchNorm + ReLU, the output block is
// a plain affine layer (targets are signed).
// hoof32: 32-64-128-64-32; c3d128: 128-256-256-128-128.
Network build_reconstruction_net(FeatureKind kind, Rng rng);

// Two-stream match scorer: each stream is Dense+BatchNorm+ReLU x2
// (hoof32: 64-128; c3d128: 128-256); head = sigmoid(dot(a, b)). Streams do
// not share weights.
struct TwoStreamScorer {
  Network stream_source;
  Network stream_target;
  FeatureKind kind = FeatureKind::hoof32;
  Direction direction = Direction::ego2side;
};

TwoStreamScorer build_two_stream(FeatureKind kind, Rng rng);

// Infer-mode match probabilities, one per row pair.
Eigen::VectorXd score_batch(TwoStreamScorer& s, const Eigen::MatrixXd& x_src,
                            const Eigen::MatrixXd& x_tgt);
double score_pair(TwoStreamScorer& s, const Eigen::VectorXd& x_src,
                  const Eigen::VectorXd& x_tgt);

// Model directory: meta.json (variant, dims, hyperparameters, direction,
// feature kinds) + weights.bin (all parameters in declaration order,
// float32 little-endian).
void save_model(const MapperModel& m, const std::string& dir);
MapperModel load_mapper(const std::string& dir);
void save_model(const TwoStreamScorer& s, const std::string& dir);
TwoStreamScorer load_scorer(const std::string& dir);

// Variant tag stored in <dir>/meta.json, for dispatch without loading.
std::string model_dir_variant(const std::string& dir);

}  // namespace xview
