#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

#include "xview/rng.hpp"

namespace xview {

enum class Activation { relu, identity };
enum class Mode { train, infer };

struct DenseLayer {
  Eigen::MatrixXd weights;  // out_dim x in_dim
  Eigen::VectorXd bias;     // out_dim
};

struct BatchNormLayer {
  Eigen::VectorXd gamma, beta;
  Eigen::VectorXd running_mean, running_var;
  double momentum = 0.99;
  double epsilon = 1e-3;
};

// One block: Dense -> optional BatchNorm -> activation.
struct Block {
  DenseLayer dense;
  std::optional<BatchNormLayer> bn;
  Activation act = Activation::relu;
};

struct BlockSpec {
  int out_dim = 0;
  bool batch_norm = true;
  Activation act = Activation::relu;
};

struct Network {
  int input_dim = 0;
  std::vector<Block> blocks;

  int output_dim() const { return blocks.empty() ? input_dim : static_cast<int>(blocks.back().dense.bias.size()); }

  // Glorot-uniform weights, zero bias, gamma 1, beta 0; deterministic per rng.
  static Network build(int input_dim, const std::vector<BlockSpec>& specs, Rng rng);
};

// Cached intermediates from a train-mode forward pass, consumed by backward.
struct ForwardCache {
  Eigen::MatrixXd input;
  struct BlockCache {
    Eigen::MatrixXd block_input;  // rows = samples
    Eigen::MatrixXd pre_bn;       // dense output
    Eigen::MatrixXd normalized;   // (x - mu) / sqrt(var + eps), if bn
    Eigen::VectorXd batch_mean, batch_var, inv_std;
    Eigen::MatrixXd pre_act;      // after bn (or == pre_bn)
    Eigen::MatrixXd output;       // after activation
  };
  std::vector<BlockCache> blocks;
  Eigen::MatrixXd output;
  bool valid = false;
};

// Batch is rows = samples. Train mode normalizes by batch statistics and,
// when update_running is set, folds them into the running estimates:
// running <- momentum * running + (1 - momentum) * batch_stat.
// Infer mode uses running statistics and is row-wise pure.
Eigen::MatrixXd forward(Network& net, const Eigen::MatrixXd& batch, Mode mode,
                        ForwardCache* cache = nullptr, bool update_running = true);

struct Gradients {
  struct BlockGrads {
    Eigen::MatrixXd weights;
    Eigen::VectorXd bias;
    Eigen::VectorXd gamma, beta;
  };
  std::vector<BlockGrads> blocks;

  static Gradients zeros_like(const Network& net);
};

// Reverse-mode gradients through the cached train-mode pass, including the
// batch-statistics paths of BatchNorm. Returns the gradient w.r.t. the
// batch input.
Eigen::MatrixXd backward(const Network& net, const ForwardCache& cache,
                         const Eigen::MatrixXd& output_grad, Gradients& grads);

struct AdamState {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::int64_t step = 0;
  std::vector<Eigen::VectorXd> m, v;  // one flat pair per parameter tensor

  static AdamState init(const Network& net, double lr = 1e-3);
};

// Standard bias-corrected Adam update. Throws on non-finite gradients.
void adam_step(Network& net, const Gradients& grads, AdamState& state);

struct LossValue {
  double value = 0.0;
  Eigen::MatrixXd grad;  // w.r.t. predictions
};

// Mean over the batch of squared Euclidean distance; grad = 2 (pred - target) / n.
LossValue mse_loss(const Eigen::MatrixXd& pred, const Eigen::MatrixXd& target);

struct ScalarLossValue {
  double value = 0.0;
  Eigen::VectorXd grad;  // w.r.t. probabilities
};

// (sum_i w_i * bce(p_i, y_i)) / sum_i w_i, probabilities clamped to
// [1e-7, 1 - 1e-7].
ScalarLossValue weighted_bce_loss(const Eigen::VectorXd& probabilities,
                                  const Eigen::VectorXd& labels,
                                  const Eigen::VectorXd& weights);

// Flattened read/write access to every parameter of the network, in
// declaration order (weights, bias, [gamma, beta]) per block.
std::vector<double*> parameter_ptrs(Network& net);
std::vector<double> flatten_parameters(const Network& net);
void unflatten_parameters(Network& net, const std::vector<double>& flat);
std::vector<double> flatten_gradients(const Network& net, const Gradients& grads);

// Max relative error between backpropagated and central finite-difference
// gradients of `loss` (Richardson-extrapolated from steps h and h/2).
// `loss` must evaluate the full objective for the current parameters
// without mutating running stats. `stride` > 1 checks every stride-th
// parameter; gradients below 1e-4 are compared absolutely because finite
// differences on a 64-bit loss cannot resolve them to 1e-6 relative.
double gradient_check(Network& net,
                      const std::function<double()>& loss_value,
                      const std::function<Gradients()>& loss_grad,
                      double h = 1e-5, std::size_t stride = 1);

}  // namespace xview
