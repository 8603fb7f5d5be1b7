#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

#include "xview/models.hpp"
#include "xview/nn.hpp"

namespace xview {

struct TrainConfig {
  int batch_size = 100;
  int max_epochs = 60;
  std::uint64_t seed = 0;
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_epsilon = 1e-8;
  int negative_ratio = 10;
  double ridge_lambda = 1.0;
  bool ridge_grid = false;  // select lambda over {1e-3 .. 1e3} by val MSE

  void validate() const;
};

struct EpochLog {
  int epoch = 0;  // 1-based
  double train_loss = 0.0;
  double val_loss = 0.0;
  double seconds = 0.0;
};

// epoch,train_loss,val_loss,seconds
void write_epoch_logs_csv(const std::vector<EpochLog>& logs, const std::string& path);

// Mini-batch MSE training with per-epoch seeded shuffling. Full batches
// plus one ragged tail batch (dropped if its size is < 2). Validation loss
// is evaluated in infer mode after each epoch; pass empty matrices to skip.
std::vector<EpochLog> train_reconstruction(Network& net,
                                           const Eigen::MatrixXd& x_train,
                                           const Eigen::MatrixXd& y_train,
                                           const Eigen::MatrixXd& x_val,
                                           const Eigen::MatrixXd& y_val,
                                           const TrainConfig& config, int epochs);

struct NegativeSample {
  int source_pair = 0;
  int target_pair = 0;  // always != source_pair
};

// ratio * n_pairs non-correspondent (source_i, target_j) index pairs, i != j.
std::vector<NegativeSample> sample_negatives(int n_pairs, int ratio, Rng& rng);

// Weighted-BCE training of the two-stream scorer. Each epoch uses all
// positives (weight 1/n_pos) plus freshly sampled negatives (weight
// 1/n_neg); validation uses a fixed seed-frozen negative set.
std::vector<EpochLog> train_two_stream(TwoStreamScorer& scorer,
                                       const Eigen::MatrixXd& src_train,
                                       const Eigen::MatrixXd& tgt_train,
                                       const Eigen::MatrixXd& src_val,
                                       const Eigen::MatrixXd& tgt_val,
                                       const TrainConfig& config, int epochs);

// 1-based index of the first minimum of the per-epoch validation losses.
int select_epoch(const std::vector<double>& val_losses);

struct ReconstructionProtocolResult {
  Network model;
  int chosen_epoch = 0;
  std::vector<EpochLog> phase1;
  std::vector<EpochLog> phase2;
};

// Two-phase protocol: train on the train set up to max_epochs recording
// validation loss, pick the first-loss-minimizing epoch e*, then rebuild
// from the same seed and train on train+val for exactly e* epochs.
ReconstructionProtocolResult reconstruction_protocol(
    FeatureKind kind, const Eigen::MatrixXd& x_train, const Eigen::MatrixXd& y_train,
    const Eigen::MatrixXd& x_val, const Eigen::MatrixXd& y_val,
    const TrainConfig& config);

struct TwoStreamProtocolResult {
  TwoStreamScorer model;
  int chosen_epoch = 0;
  std::vector<EpochLog> phase1;
  std::vector<EpochLog> phase2;
};

TwoStreamProtocolResult two_stream_protocol(
    FeatureKind kind, const Eigen::MatrixXd& src_train, const Eigen::MatrixXd& tgt_train,
    const Eigen::MatrixXd& src_val, const Eigen::MatrixXd& tgt_val,
    const TrainConfig& config);

// Ridge with optional validation-grid lambda selection (decade steps,
// 1e-3 .. 1e3), refit on train+val with the winner.
MapperModel ridge_protocol(const Eigen::MatrixXd& x_train, const Eigen::MatrixXd& y_train,
                           const Eigen::MatrixXd& x_val, const Eigen::MatrixXd& y_val,
                           const TrainConfig& config);

}  // namespace xview
