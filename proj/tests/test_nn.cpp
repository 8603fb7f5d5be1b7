#include <doctest.h>

#include <cmath>
#include <limits>

#include "xview/error.hpp"
#include "xview/models.hpp"
#include "xview/nn.hpp"

using namespace xview;

namespace {

Eigen::MatrixXd random_batch(int n, int d, Rng& rng) {
  Eigen::MatrixXd m(n, d);
  for (int r = 0; r < n; ++r)
    for (int c = 0; c < d; ++c) m(r, c) = rng.normal();
  return m;
}

// Max relative backprop-vs-finite-difference error for an MSE objective.
double check_mse_net(Network& net, const Eigen::MatrixXd& x, const Eigen::MatrixXd& y,
                     std::size_t stride = 1) {
  auto loss_value = [&]() {
    Network copy = net;  // finite differences must not touch running stats
    return mse_loss(forward(copy, x, Mode::train, nullptr, false), y).value;
  };
  auto loss_grad = [&]() {
    ForwardCache cache;
    Network copy = net;
    const Eigen::MatrixXd pred = forward(copy, x, Mode::train, &cache, false);
    Gradients grads = Gradients::zeros_like(net);
    backward(net, cache, mse_loss(pred, y).grad, grads);
    return grads;
  };
  return gradient_check(net, loss_value, loss_grad, 1e-5, stride);
}

}  // namespace

TEST_CASE("identity dense block with relu clips negatives") {
  Network net;
  net.input_dim = 2;
  Block b;
  b.dense.weights = Eigen::MatrixXd::Identity(2, 2);
  b.dense.bias = Eigen::VectorXd::Zero(2);
  b.act = Activation::relu;
  net.blocks.push_back(b);
  Eigen::MatrixXd x(1, 2);
  x << -1.0, 2.0;
  const Eigen::MatrixXd out = forward(net, x, Mode::infer);
  CHECK(out(0, 0) == 0.0);
  CHECK(out(0, 1) == 2.0);
}

TEST_CASE("train-mode batchnorm standardizes the batch") {
  Network net;
  net.input_dim = 1;
  Block b;
  b.dense.weights = Eigen::MatrixXd::Identity(1, 1);
  b.dense.bias = Eigen::VectorXd::Zero(1);
  BatchNormLayer bn;
  bn.gamma = Eigen::VectorXd::Ones(1);
  bn.beta = Eigen::VectorXd::Zero(1);
  bn.running_mean = Eigen::VectorXd::Zero(1);
  bn.running_var = Eigen::VectorXd::Ones(1);
  bn.epsilon = 1e-12;
  b.bn = bn;
  b.act = Activation::identity;
  net.blocks.push_back(b);

  Eigen::MatrixXd x(4, 1);
  x << 3.0, 7.0, 5.0, 5.0;  // mean 5, var 2
  const Eigen::MatrixXd out = forward(net, x, Mode::train);
  CHECK(std::abs(out.mean()) < 1e-9);
  CHECK(out.array().square().mean() == doctest::Approx(1.0).epsilon(1e-6));
}

TEST_CASE("train-mode batchnorm rejects batch of one") {
  Network net = build_reconstruction_net(FeatureKind::hoof32, Rng(0));
  Eigen::MatrixXd x = Eigen::MatrixXd::Zero(1, 32);
  CHECK_THROWS_AS(forward(net, x, Mode::train), Error);
  CHECK_NOTHROW(forward(net, x, Mode::infer));
}

TEST_CASE("infer-mode output is independent of batch composition") {
  Rng rng(5);
  Network net = build_reconstruction_net(FeatureKind::hoof32, rng.stream("init"));
  // Push running stats off their init values first.
  Eigen::MatrixXd warm = random_batch(16, 32, rng);
  forward(net, warm, Mode::train);

  const Eigen::MatrixXd a = random_batch(1, 32, rng);
  const Eigen::MatrixXd b = random_batch(1, 32, rng);
  Eigen::MatrixXd both(2, 32);
  both.row(0) = a.row(0);
  both.row(1) = b.row(0);
  const Eigen::MatrixXd out_both = forward(net, both, Mode::infer);
  const Eigen::MatrixXd out_a = forward(net, a, Mode::infer);
  const Eigen::MatrixXd out_b = forward(net, b, Mode::infer);
  CHECK((out_both.row(0) - out_a.row(0)).cwiseAbs().maxCoeff() < 1e-12);
  CHECK((out_both.row(1) - out_b.row(0)).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("running statistics update follows the momentum rule") {
  Network net;
  net.input_dim = 1;
  Block b;
  b.dense.weights = Eigen::MatrixXd::Identity(1, 1);
  b.dense.bias = Eigen::VectorXd::Zero(1);
  BatchNormLayer bn;
  bn.gamma = Eigen::VectorXd::Ones(1);
  bn.beta = Eigen::VectorXd::Zero(1);
  bn.running_mean = Eigen::VectorXd::Zero(1);
  bn.running_var = Eigen::VectorXd::Ones(1);
  bn.momentum = 0.99;
  b.bn = bn;
  b.act = Activation::identity;
  net.blocks.push_back(b);

  Eigen::MatrixXd x(2, 1);
  x << 4.0, 8.0;  // mean 6, biased var 4
  forward(net, x, Mode::train);
  CHECK(net.blocks[0].bn->running_mean[0] == doctest::Approx(0.06).epsilon(1e-12));
  CHECK(net.blocks[0].bn->running_var[0] == doctest::Approx(0.99 + 0.04).epsilon(1e-12));
}

TEST_CASE("single linear layer matches the closed-form MSE gradient") {
  Rng rng(7);
  Network net;
  net.input_dim = 3;
  Block b;
  b.dense.weights = random_batch(2, 3, rng);
  b.dense.bias = Eigen::VectorXd::Zero(2);
  b.act = Activation::identity;
  net.blocks.push_back(b);

  const Eigen::MatrixXd x = random_batch(1, 3, rng);
  const Eigen::MatrixXd y = random_batch(1, 2, rng);
  ForwardCache cache;
  const Eigen::MatrixXd pred = forward(net, x, Mode::train, &cache);
  Gradients grads = Gradients::zeros_like(net);
  backward(net, cache, mse_loss(pred, y).grad, grads);

  const Eigen::MatrixXd expected =
      2.0 * (net.blocks[0].dense.weights * x.row(0).transpose() - y.row(0).transpose()) *
      x.row(0);
  CHECK((grads.blocks[0].weights - expected).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("gradient check passes for both reconstruction architectures") {
  Rng rng(19);
  for (FeatureKind kind : {FeatureKind::hoof32, FeatureKind::c3d128}) {
    const int d = kind == FeatureKind::hoof32 ? 32 : 128;
    Network net = build_reconstruction_net(kind, rng.stream("init"));
    const Eigen::MatrixXd x = random_batch(8, d, rng);
    // Targets near the current output keep the loss O(1), so the 1e-6
    // relative bound is not eaten by finite-difference rounding noise.
    Network probe = net;
    const Eigen::MatrixXd y =
        forward(probe, x, Mode::train, nullptr, false) + 0.1 * random_batch(8, d, rng);
    // Spot-check the wide net with a stride to keep the suite fast.
    CHECK(check_mse_net(net, x, y, kind == FeatureKind::c3d128 ? 32 : 2) < 1e-6);
  }
}

TEST_CASE("gradient check passes for the two-stream objective") {
  Rng rng(23);
  TwoStreamScorer scorer = build_two_stream(FeatureKind::hoof32, rng.stream("init"));
  // Post-ReLU embeddings are nonnegative, so raw dot products sit far out on
  // the sigmoid's flat tail where the clamp kills finite differences. Shrink
  // the final BatchNorm gain to keep scores in the live range.
  for (Network* s : {&scorer.stream_source, &scorer.stream_target})
    s->blocks.back().bn->gamma *= 0.05;
  const int n = 6;
  const Eigen::MatrixXd xs = random_batch(n, 32, rng);
  const Eigen::MatrixXd xt = random_batch(n, 32, rng);
  Eigen::VectorXd labels(n), weights(n);
  for (int i = 0; i < n; ++i) {
    labels[i] = i % 2;
    weights[i] = i % 2 ? 0.5 : 0.25;
  }

  auto objective = [&](TwoStreamScorer& s, ForwardCache* cs, ForwardCache* ct,
                       Eigen::VectorXd* dz_out) {
    const Eigen::MatrixXd a = forward(s.stream_source, xs, Mode::train, cs, false);
    const Eigen::MatrixXd b = forward(s.stream_target, xt, Mode::train, ct, false);
    const Eigen::VectorXd z = (a.array() * b.array()).rowwise().sum();
    const Eigen::VectorXd p = (1.0 / (1.0 + (-z.array()).exp())).matrix();
    const ScalarLossValue loss = weighted_bce_loss(p, labels, weights);
    if (dz_out) {
      *dz_out = (loss.grad.array() * p.array() * (1.0 - p.array())).matrix();
      // Cached stream outputs are needed by the caller via a, b.
    }
    return loss.value;
  };

  // Check each stream separately; the other stream's parameters are fixed.
  for (int which = 0; which < 2; ++which) {
    Network& net = which == 0 ? scorer.stream_source : scorer.stream_target;
    auto loss_value = [&]() { return objective(scorer, nullptr, nullptr, nullptr); };
    auto loss_grad = [&]() {
      ForwardCache cs, ct;
      Eigen::VectorXd dz;
      objective(scorer, &cs, &ct, &dz);
      const Eigen::MatrixXd& a = cs.output;
      const Eigen::MatrixXd& b = ct.output;
      Gradients grads = Gradients::zeros_like(net);
      if (which == 0)
        backward(scorer.stream_source, cs, Eigen::MatrixXd(dz.asDiagonal() * b), grads);
      else
        backward(scorer.stream_target, ct, Eigen::MatrixXd(dz.asDiagonal() * a), grads);
      return grads;
    };
    CHECK(gradient_check(net, loss_value, loss_grad, 1e-5, 2) < 1e-6);
  }
}

TEST_CASE("adam basics") {
  Rng rng(31);
  Network net;
  net.input_dim = 1;
  Block b;
  b.dense.weights = Eigen::MatrixXd::Zero(1, 1);
  b.dense.bias = Eigen::VectorXd::Zero(1);
  b.act = Activation::identity;
  net.blocks.push_back(b);
  AdamState adam = AdamState::init(net, 0.1);

  // Zero gradient leaves parameters untouched.
  Gradients zero = Gradients::zeros_like(net);
  adam_step(net, zero, adam);
  CHECK(net.blocks[0].dense.weights(0, 0) == 0.0);
  CHECK(net.blocks[0].dense.bias[0] == 0.0);

  // First step with a constant gradient moves by about lr per coordinate.
  Gradients g = Gradients::zeros_like(net);
  g.blocks[0].weights(0, 0) = 3.7;
  AdamState fresh = AdamState::init(net, 0.1);
  Network net2 = net;
  adam_step(net2, g, fresh);
  CHECK(std::abs(net2.blocks[0].dense.weights(0, 0) + 0.1) < 1e-6);

  // Non-finite gradients abort.
  g.blocks[0].weights(0, 0) = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS(adam_step(net2, g, fresh), Error);
}

TEST_CASE("adam minimizes a scalar quadratic") {
  // f(w) = (w - 3)^2 from w = 0, lr 0.1, 500 steps.
  Network net;
  net.input_dim = 1;
  Block b;
  b.dense.weights = Eigen::MatrixXd::Zero(1, 1);
  b.dense.bias = Eigen::VectorXd::Zero(1);
  b.act = Activation::identity;
  net.blocks.push_back(b);
  AdamState adam = AdamState::init(net, 0.1);
  for (int i = 0; i < 500; ++i) {
    Gradients g = Gradients::zeros_like(net);
    g.blocks[0].weights(0, 0) = 2.0 * (net.blocks[0].dense.weights(0, 0) - 3.0);
    g.blocks[0].bias[0] = 0.0;
    adam_step(net, g, adam);
  }
  CHECK(std::abs(net.blocks[0].dense.weights(0, 0) - 3.0) < 1e-3);
}

TEST_CASE("mse_loss values") {
  Eigen::MatrixXd p(1, 4), t(1, 4);
  p << 1, 2, 3, 4;
  t = p;
  CHECK(mse_loss(p, t).value == 0.0);
  t.setZero();
  p.setOnes();
  CHECK(mse_loss(p, t).value == doctest::Approx(4.0).epsilon(1e-15));

  Eigen::MatrixXd p2(2, 1), t2(2, 1);
  p2 << 1, 5;
  t2 << 0, 2;  // per-sample losses 1 and 9
  CHECK(mse_loss(p2, t2).value == doctest::Approx(5.0).epsilon(1e-15));
}

TEST_CASE("weighted_bce_loss values") {
  Eigen::VectorXd p(1), y(1), w(1);
  p << 0.5;
  y << 1.0;
  w << 1.0;
  CHECK(weighted_bce_loss(p, y, w).value == doctest::Approx(std::log(2.0)).epsilon(1e-12));

  Eigen::VectorXd pp(2), yy(2), ww(2);
  pp << 1.0, 0.0;
  yy << 1.0, 0.0;
  ww << 1.0, 1.0;
  CHECK(weighted_bce_loss(pp, yy, ww).value <= 1.7e-7);  // clamp floor

  // Zero-weight samples contribute nothing.
  Eigen::VectorXd p3(2), y3(2), w3(2);
  p3 << 0.5, 0.9;
  y3 << 1.0, 0.0;
  w3 << 2.0, 0.0;
  CHECK(weighted_bce_loss(p3, y3, w3).value ==
        doctest::Approx(std::log(2.0)).epsilon(1e-12));
}
