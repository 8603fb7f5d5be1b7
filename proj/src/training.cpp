#include "xview/training.hpp"

#include <chrono>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>

#include "xview/error.hpp"

namespace xview {

void TrainConfig::validate() const {
  if (batch_size < 2) throw Error("TrainConfig: batch_size must be >= 2");
  if (max_epochs < 1) throw Error("TrainConfig: max_epochs must be >= 1");
  if (negative_ratio < 1) throw Error("TrainConfig: negative_ratio must be >= 1");
}

void write_epoch_logs_csv(const std::vector<EpochLog>& logs, const std::string& path) {
  std::ofstream os(path);
  if (!os) throw Error("cannot open for writing: " + path);
  os << "epoch,train_loss,val_loss,seconds\n";
  os.precision(17);
  for (const auto& l : logs)
    os << l.epoch << "," << l.train_loss << "," << l.val_loss << "," << l.seconds << "\n";
}

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

// Full batches plus one ragged tail (dropped when its size is < 2).
std::vector<std::pair<int, int>> batch_ranges(int n, int batch_size) {
  std::vector<std::pair<int, int>> out;
  int start = 0;
  while (start < n) {
    const int len = std::min(batch_size, n - start);
    if (len >= 2) out.push_back({start, len});
    start += len;
  }
  return out;
}

Eigen::MatrixXd take_rows(const Eigen::MatrixXd& m, const std::vector<int>& idx,
                          int start, int len) {
  Eigen::MatrixXd out(len, m.cols());
  for (int i = 0; i < len; ++i) out.row(i) = m.row(idx[start + i]);
  return out;
}

}  // namespace

std::vector<EpochLog> train_reconstruction(Network& net,
                                           const Eigen::MatrixXd& x_train,
                                           const Eigen::MatrixXd& y_train,
                                           const Eigen::MatrixXd& x_val,
                                           const Eigen::MatrixXd& y_val,
                                           const TrainConfig& config, int epochs) {
  config.validate();
  if (x_train.rows() == 0) throw Error("train_reconstruction: empty training set");
  if (x_train.rows() != y_train.rows())
    throw Error("train_reconstruction: X/Y row count mismatch");

  const Rng root(config.seed);
  AdamState adam = AdamState::init(net, config.lr);
  adam.beta1 = config.beta1;
  adam.beta2 = config.beta2;
  adam.epsilon = config.adam_epsilon;

  std::vector<int> order(static_cast<std::size_t>(x_train.rows()));
  std::iota(order.begin(), order.end(), 0);

  std::vector<EpochLog> logs;
  for (int epoch = 1; epoch <= epochs; ++epoch) {
    const auto t0 = Clock::now();
    Rng shuffle_rng = root.stream("shuffle").stream(static_cast<std::uint64_t>(epoch));
    shuffle_rng.shuffle(order);

    double loss_sum = 0.0;
    int batch_count = 0;
    ForwardCache cache;
    Gradients grads;
    for (const auto& [start, len] : batch_ranges(static_cast<int>(order.size()),
                                                 config.batch_size)) {
      const Eigen::MatrixXd xb = take_rows(x_train, order, start, len);
      const Eigen::MatrixXd yb = take_rows(y_train, order, start, len);
      const Eigen::MatrixXd pred = forward(net, xb, Mode::train, &cache);
      const LossValue loss = mse_loss(pred, yb);
      if (!std::isfinite(loss.value))
        throw Error("train_reconstruction: non-finite loss at epoch " +
                    std::to_string(epoch));
      backward(net, cache, loss.grad, grads);
      adam_step(net, grads, adam);
      loss_sum += loss.value;
      ++batch_count;
    }

    EpochLog log;
    log.epoch = epoch;
    log.train_loss = batch_count > 0 ? loss_sum / batch_count : 0.0;
    if (x_val.rows() > 0) {
      const Eigen::MatrixXd pv = forward(net, x_val, Mode::infer);
      log.val_loss = mse_loss(pv, y_val).value;
    }
    log.seconds = seconds_since(t0);
    logs.push_back(log);
  }
  return logs;
}

std::vector<NegativeSample> sample_negatives(int n_pairs, int ratio, Rng& rng) {
  if (n_pairs < 2) throw Error("sample_negatives: need at least 2 distinct pairs");
  if (ratio < 1) throw Error("sample_negatives: ratio must be >= 1");
  std::vector<NegativeSample> out;
  out.reserve(static_cast<std::size_t>(n_pairs) * ratio);
  for (int k = 0; k < n_pairs * ratio; ++k) {
    const int i = static_cast<int>(rng.uniform_index(static_cast<std::size_t>(n_pairs)));
    // Uniform over j != i.
    int j = static_cast<int>(rng.uniform_index(static_cast<std::size_t>(n_pairs - 1)));
    if (j >= i) ++j;
    out.push_back({i, j});
  }
  return out;
}

namespace {

struct ScoredBatch {
  Eigen::MatrixXd src, tgt;
  Eigen::VectorXd labels, weights;
};

ScoredBatch build_scored_set(const Eigen::MatrixXd& src, const Eigen::MatrixXd& tgt,
                             const std::vector<NegativeSample>& negatives) {
  const int n_pos = static_cast<int>(src.rows());
  const int n_neg = static_cast<int>(negatives.size());
  ScoredBatch b;
  b.src.resize(n_pos + n_neg, src.cols());
  b.tgt.resize(n_pos + n_neg, tgt.cols());
  b.labels.resize(n_pos + n_neg);
  b.weights.resize(n_pos + n_neg);
  for (int i = 0; i < n_pos; ++i) {
    b.src.row(i) = src.row(i);
    b.tgt.row(i) = tgt.row(i);
    b.labels[i] = 1.0;
    b.weights[i] = 1.0 / n_pos;
  }
  for (int k = 0; k < n_neg; ++k) {
    b.src.row(n_pos + k) = src.row(negatives[k].source_pair);
    b.tgt.row(n_pos + k) = tgt.row(negatives[k].target_pair);
    b.labels[n_pos + k] = 0.0;
    b.weights[n_pos + k] = 1.0 / n_neg;
  }
  return b;
}

// Weighted BCE of the scorer on a fixed set, infer mode.
double scored_set_loss(TwoStreamScorer& scorer, const ScoredBatch& b) {
  const Eigen::VectorXd p = score_batch(scorer, b.src, b.tgt);
  return weighted_bce_loss(p, b.labels, b.weights).value;
}

}  // namespace

std::vector<EpochLog> train_two_stream(TwoStreamScorer& scorer,
                                       const Eigen::MatrixXd& src_train,
                                       const Eigen::MatrixXd& tgt_train,
                                       const Eigen::MatrixXd& src_val,
                                       const Eigen::MatrixXd& tgt_val,
                                       const TrainConfig& config, int epochs) {
  config.validate();
  if (src_train.rows() < 2) throw Error("train_two_stream: need at least 2 pairs");
  if (src_train.rows() != tgt_train.rows())
    throw Error("train_two_stream: source/target row count mismatch");

  const Rng root(config.seed);
  AdamState adam_src = AdamState::init(scorer.stream_source, config.lr);
  AdamState adam_tgt = AdamState::init(scorer.stream_target, config.lr);
  for (AdamState* s : {&adam_src, &adam_tgt}) {
    s->beta1 = config.beta1;
    s->beta2 = config.beta2;
    s->epsilon = config.adam_epsilon;
  }

  // Seed-frozen validation negatives keep epoch selection stable.
  ScoredBatch val_set;
  const bool have_val = src_val.rows() >= 2;
  if (have_val) {
    Rng val_rng = root.stream("val_negatives");
    val_set = build_scored_set(
        src_val, tgt_val,
        sample_negatives(static_cast<int>(src_val.rows()), config.negative_ratio, val_rng));
  }

  std::vector<EpochLog> logs;
  for (int epoch = 1; epoch <= epochs; ++epoch) {
    const auto t0 = Clock::now();
    Rng neg_rng = root.stream("negatives").stream(static_cast<std::uint64_t>(epoch));
    ScoredBatch set = build_scored_set(
        src_train, tgt_train,
        sample_negatives(static_cast<int>(src_train.rows()), config.negative_ratio, neg_rng));

    std::vector<int> order(static_cast<std::size_t>(set.src.rows()));
    std::iota(order.begin(), order.end(), 0);
    Rng shuffle_rng = root.stream("shuffle").stream(static_cast<std::uint64_t>(epoch));
    shuffle_rng.shuffle(order);

    double loss_sum = 0.0;
    int batch_count = 0;
    ForwardCache cache_src, cache_tgt;
    Gradients grads_src, grads_tgt;
    for (const auto& [start, len] : batch_ranges(static_cast<int>(order.size()),
                                                 config.batch_size)) {
      const Eigen::MatrixXd xs = take_rows(set.src, order, start, len);
      const Eigen::MatrixXd xt = take_rows(set.tgt, order, start, len);
      Eigen::VectorXd yb(len), wb(len);
      for (int i = 0; i < len; ++i) {
        yb[i] = set.labels[order[start + i]];
        wb[i] = set.weights[order[start + i]];
      }

      const Eigen::MatrixXd a = forward(scorer.stream_source, xs, Mode::train, &cache_src);
      const Eigen::MatrixXd b = forward(scorer.stream_target, xt, Mode::train, &cache_tgt);
      const Eigen::VectorXd z = (a.array() * b.array()).rowwise().sum();
      const Eigen::VectorXd p = (1.0 / (1.0 + (-z.array()).exp())).matrix();
      const ScalarLossValue loss = weighted_bce_loss(p, yb, wb);
      if (!std::isfinite(loss.value))
        throw Error("train_two_stream: non-finite loss at epoch " + std::to_string(epoch));

      // Chain through the sigmoid head: dL/dz = dL/dp * p * (1 - p).
      const Eigen::VectorXd dz =
          (loss.grad.array() * p.array() * (1.0 - p.array())).matrix();
      const Eigen::MatrixXd da = dz.asDiagonal() * b;
      const Eigen::MatrixXd db = dz.asDiagonal() * a;
      backward(scorer.stream_source, cache_src, da, grads_src);
      backward(scorer.stream_target, cache_tgt, db, grads_tgt);
      adam_step(scorer.stream_source, grads_src, adam_src);
      adam_step(scorer.stream_target, grads_tgt, adam_tgt);
      loss_sum += loss.value;
      ++batch_count;
    }

    EpochLog log;
    log.epoch = epoch;
    log.train_loss = batch_count > 0 ? loss_sum / batch_count : 0.0;
    if (have_val) log.val_loss = scored_set_loss(scorer, val_set);
    log.seconds = seconds_since(t0);
    logs.push_back(log);
  }
  return logs;
}

int select_epoch(const std::vector<double>& val_losses) {
  if (val_losses.empty()) throw Error("select_epoch: empty loss sequence");
  int best = 1;
  for (int i = 1; i < static_cast<int>(val_losses.size()); ++i)
    if (val_losses[i] < val_losses[best - 1]) best = i + 1;
  return best;
}

namespace {

Eigen::MatrixXd vstack(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  if (a.rows() == 0) return b;
  if (b.rows() == 0) return a;
  Eigen::MatrixXd out(a.rows() + b.rows(), a.cols());
  out.topRows(a.rows()) = a;
  out.bottomRows(b.rows()) = b;
  return out;
}

}  // namespace

ReconstructionProtocolResult reconstruction_protocol(
    FeatureKind kind, const Eigen::MatrixXd& x_train, const Eigen::MatrixXd& y_train,
    const Eigen::MatrixXd& x_val, const Eigen::MatrixXd& y_val,
    const TrainConfig& config) {
  const Rng root(config.seed);
  ReconstructionProtocolResult out;

  Network phase1 = build_reconstruction_net(kind, root.stream("recon_init"));
  out.phase1 =
      train_reconstruction(phase1, x_train, y_train, x_val, y_val, config, config.max_epochs);
  std::vector<double> val_losses;
  for (const auto& l : out.phase1) val_losses.push_back(l.val_loss);
  out.chosen_epoch = select_epoch(val_losses);

  // Phase 2: same init, train + val, exactly e* epochs, validation unused.
  out.model = build_reconstruction_net(kind, root.stream("recon_init"));
  out.phase2 = train_reconstruction(out.model, vstack(x_train, x_val),
                                    vstack(y_train, y_val), Eigen::MatrixXd(),
                                    Eigen::MatrixXd(), config, out.chosen_epoch);
  return out;
}

TwoStreamProtocolResult two_stream_protocol(
    FeatureKind kind, const Eigen::MatrixXd& src_train, const Eigen::MatrixXd& tgt_train,
    const Eigen::MatrixXd& src_val, const Eigen::MatrixXd& tgt_val,
    const TrainConfig& config) {
  const Rng root(config.seed);
  TwoStreamProtocolResult out;

  TwoStreamScorer phase1 = build_two_stream(kind, root.stream("scorer_init"));
  out.phase1 = train_two_stream(phase1, src_train, tgt_train, src_val, tgt_val, config,
                                config.max_epochs);
  std::vector<double> val_losses;
  for (const auto& l : out.phase1) val_losses.push_back(l.val_loss);
  out.chosen_epoch = select_epoch(val_losses);

  out.model = build_two_stream(kind, root.stream("scorer_init"));
  out.phase2 = train_two_stream(out.model, vstack(src_train, src_val),
                                vstack(tgt_train, tgt_val), Eigen::MatrixXd(),
                                Eigen::MatrixXd(), config, out.chosen_epoch);
  return out;
}

MapperModel ridge_protocol(const Eigen::MatrixXd& x_train, const Eigen::MatrixXd& y_train,
                           const Eigen::MatrixXd& x_val, const Eigen::MatrixXd& y_val,
                           const TrainConfig& config) {
  double lambda = config.ridge_lambda;
  if (config.ridge_grid && x_val.rows() > 0) {
    double best_mse = std::numeric_limits<double>::infinity();
    for (int e = -3; e <= 3; ++e) {
      const double cand = std::pow(10.0, e);
      const MapperModel m = fit_ridge(x_train, y_train, cand);
      const double mse = mse_loss(m.map(x_val), y_val).value;
      if (mse < best_mse) {
        best_mse = mse;
        lambda = cand;
      }
    }
  }
  return fit_ridge(vstack(x_train, x_val), vstack(y_train, y_val), lambda);
}

}  // namespace xview
