// End-to-end acceptance suite. Prints one line per criterion and exits
// nonzero if any fails. Criterion 8/9 retrieval quality is computed with a
// local brute-force evaluator rather than the library's ranking code, so
// the two implementations vouch for each other.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <functional>
#include <string>
#include <vector>

#include "xview/eval.hpp"
#include "xview/experiment.hpp"
#include "xview/synth.hpp"

using namespace xview;

namespace {

Eigen::MatrixXd random_matrix(int n, int d, Rng& rng) {
  Eigen::MatrixXd m(n, d);
  for (int r = 0; r < n; ++r)
    for (int c = 0; c < d; ++c) m(r, c) = rng.normal();
  return m;
}

bool criterion_ols() {
  Rng rng(1);
  const Eigen::MatrixXd w_star = random_matrix(8, 8, rng);
  const Eigen::MatrixXd x = random_matrix(200, 8, rng);
  const MapperModel m = fit_ols(x, x * w_star.transpose());
  if ((m.weights - w_star).norm() >= 1e-8) return false;

  Eigen::MatrixXd xs(3, 1), ys(3, 1);
  xs << 1, 2, 3;
  ys << 2, 4, 6;
  return std::abs(fit_ols(xs, ys).weights(0, 0) - 2.0) < 1e-12;
}

bool criterion_ridge() {
  Eigen::MatrixXd xs(3, 1), ys(3, 1);
  xs << 1, 2, 3;
  ys << 2, 4, 6;
  if (std::abs(fit_ridge(xs, ys, 14.0).weights(0, 0) - 1.0) >= 1e-12) return false;

  Rng rng(2);
  const Eigen::MatrixXd x = random_matrix(60, 5, rng);
  const Eigen::MatrixXd y = random_matrix(60, 3, rng);
  if ((fit_ridge(x, y, 0.0).weights - fit_ols(x, y).weights).norm() >= 1e-8) return false;

  double prev = fit_ridge(x, y, 1e-3).weights.norm();
  for (int e = -2; e <= 3; ++e) {
    const double cur = fit_ridge(x, y, std::pow(10.0, e)).weights.norm();
    if (cur > prev + 1e-12) return false;
    prev = cur;
  }
  return true;
}

double check_mse_net(Network& net, const Eigen::MatrixXd& x, const Eigen::MatrixXd& y,
                     std::size_t stride) {
  auto loss_value = [&]() {
    Network copy = net;
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

bool criterion_gradients() {
  Rng rng(19);
  for (FeatureKind kind : {FeatureKind::hoof32, FeatureKind::c3d128}) {
    const int d = kind == FeatureKind::hoof32 ? 32 : 128;
    Network net = build_reconstruction_net(kind, rng.stream("init"));
    const Eigen::MatrixXd x = random_matrix(8, d, rng);
    // Targets near the current output keep the loss O(1), away from the
    // finite-difference noise floor.
    Network probe = net;
    const Eigen::MatrixXd y =
        forward(probe, x, Mode::train, nullptr, false) + 0.1 * random_matrix(8, d, rng);
    if (check_mse_net(net, x, y, kind == FeatureKind::c3d128 ? 64 : 4) >= 1e-6)
      return false;
  }

  for (FeatureKind kind : {FeatureKind::hoof32, FeatureKind::c3d128}) {
    const int d = kind == FeatureKind::hoof32 ? 32 : 128;
    TwoStreamScorer scorer = build_two_stream(kind, rng.stream("ts"));
    // Keep raw dot products inside the sigmoid's live range (away from the
    // probability clamp) so finite differences see the same objective.
    for (Network* s : {&scorer.stream_source, &scorer.stream_target})
      s->blocks.back().bn->gamma *= 0.05;
    const int n = 6;
    const Eigen::MatrixXd xs = random_matrix(n, d, rng);
    const Eigen::MatrixXd xt = random_matrix(n, d, rng);
    Eigen::VectorXd labels(n), weights(n);
    for (int i = 0; i < n; ++i) {
      labels[i] = i % 2;
      weights[i] = i % 2 ? 0.5 : 0.25;
    }
    auto objective = [&](ForwardCache* cs, ForwardCache* ct, Eigen::VectorXd* dz_out) {
      const Eigen::MatrixXd a = forward(scorer.stream_source, xs, Mode::train, cs, false);
      const Eigen::MatrixXd b = forward(scorer.stream_target, xt, Mode::train, ct, false);
      const Eigen::VectorXd z = (a.array() * b.array()).rowwise().sum();
      const Eigen::VectorXd p = (1.0 / (1.0 + (-z.array()).exp())).matrix();
      const ScalarLossValue loss = weighted_bce_loss(p, labels, weights);
      if (dz_out) *dz_out = (loss.grad.array() * p.array() * (1.0 - p.array())).matrix();
      return loss.value;
    };
    for (int which = 0; which < 2; ++which) {
      Network& net = which == 0 ? scorer.stream_source : scorer.stream_target;
      auto loss_value = [&]() { return objective(nullptr, nullptr, nullptr); };
      auto loss_grad = [&]() {
        ForwardCache cs, ct;
        Eigen::VectorXd dz;
        objective(&cs, &ct, &dz);
        Gradients grads = Gradients::zeros_like(net);
        if (which == 0)
          backward(scorer.stream_source, cs, Eigen::MatrixXd(dz.asDiagonal() * ct.output),
                   grads);
        else
          backward(scorer.stream_target, ct, Eigen::MatrixXd(dz.asDiagonal() * cs.output),
                   grads);
        return grads;
      };
      if (gradient_check(net, loss_value, loss_grad, 1e-5,
                         kind == FeatureKind::c3d128 ? 32 : 4) >= 1e-6)
        return false;
    }
  }
  return true;
}

FlowClip clip_of_vectors(const std::vector<std::pair<double, double>>& vecs) {
  FlowClip clip;
  clip.clip_id = "fixture";
  FlowField f(static_cast<int>(vecs.size()), 1);
  for (std::size_t i = 0; i < vecs.size(); ++i) {
    f.u[i] = vecs[i].first;
    f.v[i] = vecs[i].second;
  }
  clip.fields.push_back(f);
  return clip;
}

bool criterion_hoof() {
  Rng rng(4);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<std::pair<double, double>> vecs;
    for (int i = 0; i < 30; ++i) vecs.push_back({rng.normal(), rng.normal()});
    if (std::abs(hoof(clip_of_vectors(vecs)).sum() - 1.0) >= 1e-9) return false;
  }

  const Eigen::VectorXd hand = hoof(clip_of_vectors({{1.0, 0.0}, {0.0, 3.0}}));
  if (std::abs(hand[0] - 0.25) >= 1e-12 || std::abs(hand[8] - 0.75) >= 1e-12) return false;

  std::vector<std::pair<double, double>> centered;
  for (int b : {0, 3, 3, 17, 30}) {
    const double theta = (b + 0.5) * 2.0 * M_PI / 32.0;
    centered.push_back({std::cos(theta), std::sin(theta)});
  }
  const FlowClip clip = clip_of_vectors(centered);
  const Eigen::VectorXd h = hoof(clip);
  const Eigen::VectorXd hr = hoof(rotate_vectors(clip, 2.0 * M_PI / 32.0));
  for (int b = 0; b < 32; ++b)
    if (std::abs(hr[(b + 1) % 32] - h[b]) >= 1e-12) return false;
  const Eigen::VectorXd hf = hoof(flip_horizontal(clip));
  for (int b = 0; b < 32; ++b)
    if (std::abs(hf[((15 - b) % 32 + 32) % 32] - h[b]) >= 1e-12) return false;
  return true;
}

bool criterion_pca() {
  Rng rng(8);
  const int n = 500, d = 30;
  Eigen::MatrixXd basis = random_matrix(3, d, rng);
  Eigen::MatrixXd rows(n, d);
  for (int i = 0; i < n; ++i)
    rows.row(i) = random_matrix(1, 3, rng) * basis + Eigen::RowVectorXd::Constant(d, 0.3);
  std::vector<std::string> ids;
  for (int i = 0; i < n; ++i) ids.push_back("c" + std::to_string(i));
  const FeatureMatrix x =
      FeatureMatrix::from_rows(FeatureKind::c3d4096, std::move(ids), std::move(rows));
  const PcaModel m = pca_fit(x, 3);

  const Eigen::MatrixXd gram = m.components * m.components.transpose();
  if ((gram - Eigen::MatrixXd::Identity(3, 3)).cwiseAbs().maxCoeff() >= 1e-8) return false;

  const FeatureMatrix proj = pca_apply(m, x);
  for (int i = 0; i < x.rows(); ++i) {
    const Eigen::VectorXd rec =
        m.mean + m.components.transpose() * proj.data().row(i).transpose();
    if ((rec - x.data().row(i).transpose()).norm() >= 1e-8) return false;
  }

  std::vector<std::string> pid = {"mean"};
  Eigen::MatrixXd prow(1, d);
  prow.row(0) = m.mean.transpose();
  const FeatureMatrix probe =
      FeatureMatrix::from_rows(FeatureKind::c3d4096, std::move(pid), std::move(prow));
  return pca_apply(m, probe).data().row(0).cwiseAbs().maxCoeff() < 1e-10;
}

bool criterion_eval_analytics() {
  std::vector<RankingResult> results;
  for (int r : {1, 2, 1, 4}) results.push_back({"q", r, 4});
  const std::vector<double> curve = cmc(results);
  const double expected[4] = {0.5, 0.75, 0.75, 1.0};
  for (int k = 0; k < 4; ++k)
    if (curve[static_cast<std::size_t>(k)] != expected[k]) return false;
  if (auc(curve) != 75.0) return false;

  std::vector<RankingResult> perfect(6, {"q", 1, 9});
  if (auc(cmc(perfect)) != 100.0) return false;

  Rng rng(5);
  std::vector<RankingResult> rand_ranks;
  for (int i = 0; i < 1000; ++i)
    rand_ranks.push_back({"q", static_cast<int>(rng.uniform_index(100)) + 1, 100});
  const double a = auc(cmc(rand_ranks));
  return a >= 47.0 && a <= 53.0;
}

bool criterion_protocol() {
  if (select_epoch({0.9, 0.5, 0.6, 0.5}) != 2) return false;

  Rng rng(41);
  const Eigen::MatrixXd x = random_matrix(30, 32, rng);
  const Eigen::MatrixXd w = random_matrix(32, 32, rng) * 0.1;
  const Eigen::MatrixXd y = x * w.transpose() + 0.3 * random_matrix(30, 32, rng);
  const Eigen::MatrixXd xv = random_matrix(10, 32, rng);
  const Eigen::MatrixXd yv = xv * w.transpose() + 0.3 * random_matrix(10, 32, rng);
  TrainConfig cfg;
  cfg.batch_size = 10;
  cfg.max_epochs = 8;
  cfg.seed = 3;

  const auto r1 = reconstruction_protocol(FeatureKind::hoof32, x, y, xv, yv, cfg);
  if (r1.phase2.size() != static_cast<std::size_t>(r1.chosen_epoch)) return false;

  // Byte determinism: same seed, same everything.
  const auto r2 = reconstruction_protocol(FeatureKind::hoof32, x, y, xv, yv, cfg);
  if (r1.chosen_epoch != r2.chosen_epoch) return false;
  if (flatten_parameters(r1.model) != flatten_parameters(r2.model)) return false;
  for (std::size_t e = 0; e < r1.phase1.size(); ++e)
    if (r1.phase1[e].train_loss != r2.phase1[e].train_loss ||
        r1.phase1[e].val_loss != r2.phase1[e].val_loss)
      return false;
  return true;
}

// ---- Criteria 8 and 9: end-to-end on the nonlinear synthetic benchmark ----

struct BenchSplits {
  Eigen::MatrixXd src_train, tgt_train;
  Eigen::MatrixXd src_val, tgt_val;
  Eigen::MatrixXd src_test, tgt_test;
};

// 170 videos (100/20/50), sigma 0.1, latent 8, HOOF-sized features,
// nonlinear coupling; evaluated on the ego -> side direction.
BenchSplits make_benchmark(std::uint64_t seed) {
  SynthConfig c;
  c.action_count = 5;
  c.videos_per_action = 34;
  // 8 clips per video keep the 60-epoch batch-100 budget at a usable number
  // of optimizer steps for the reconstruction net.
  c.clips_per_video = 8;
  c.latent_dim = 8;
  c.feature_dim = 32;
  c.noise_sigma = 0.1;
  c.coupling = SynthConfig::Coupling::nonlinear;
  c.seed = seed;
  SynthFeatureData data = generate_feature_pairs(c);
  split_dataset(data.dataset, {100, 20, 50}, seed + 1000);

  BenchSplits out;
  auto stack = [&](const std::string& split, Eigen::MatrixXd& src, Eigen::MatrixXd& tgt) {
    std::vector<FeaturePair> pairs;
    for (auto& fp : enumerate_feature_pairs(data.dataset, split, "hoof32", data.features))
      if (fp.view == View::side) pairs.push_back(std::move(fp));
    src.resize(static_cast<Eigen::Index>(pairs.size()), 32);
    tgt.resize(static_cast<Eigen::Index>(pairs.size()), 32);
    for (std::size_t i = 0; i < pairs.size(); ++i) {
      src.row(static_cast<Eigen::Index>(i)) = pairs[i].source.transpose();
      tgt.row(static_cast<Eigen::Index>(i)) = pairs[i].target.transpose();
    }
  };
  stack("train", out.src_train, out.tgt_train);
  stack("val", out.src_val, out.tgt_val);
  stack("test", out.src_test, out.tgt_test);
  return out;
}

// Exhaustive pairwise-distance evaluation, written from the AUC definition:
// AUC = 100 * mean_q (N - rank_q + 1) / N with pessimistic tie ranks.
double brute_auc_mapped(const Eigen::MatrixXd& mapped, const Eigen::MatrixXd& gallery) {
  const int n = static_cast<int>(gallery.rows());
  double sum = 0.0;
  for (int q = 0; q < n; ++q) {
    const double d_truth = (mapped.row(q) - gallery.row(q)).squaredNorm();
    int rank = 0;
    for (int g = 0; g < n; ++g)
      if ((mapped.row(q) - gallery.row(g)).squaredNorm() <= d_truth) ++rank;
    sum += static_cast<double>(n - rank + 1) / n;
  }
  return 100.0 * sum / n;
}

double brute_auc_scored(TwoStreamScorer& scorer, const Eigen::MatrixXd& queries,
                        const Eigen::MatrixXd& gallery) {
  const int n = static_cast<int>(gallery.rows());
  Eigen::MatrixXd scores(n, n);
  for (int q = 0; q < n; ++q)
    for (int g = 0; g < n; ++g)
      scores(q, g) =
          score_pair(scorer, queries.row(q).transpose(), gallery.row(g).transpose());
  double sum = 0.0;
  for (int q = 0; q < n; ++q) {
    int rank = 0;
    for (int g = 0; g < n; ++g)
      if (scores(q, g) >= scores(q, q)) ++rank;
    sum += static_cast<double>(n - rank + 1) / n;
  }
  return 100.0 * sum / n;
}

Eigen::MatrixXd vstack(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  Eigen::MatrixXd out(a.rows() + b.rows(), a.cols());
  out.topRows(a.rows()) = a;
  out.bottomRows(b.rows()) = b;
  return out;
}

bool criterion_end_to_end() {
  const BenchSplits bench = make_benchmark(101);
  TrainConfig cfg;
  cfg.batch_size = 100;
  cfg.max_epochs = 60;
  cfg.seed = 101;

  const double uniform = brute_auc_mapped(bench.src_test, bench.tgt_test);

  const MapperModel ols = fit_ols(vstack(bench.src_train, bench.src_val),
                                  vstack(bench.tgt_train, bench.tgt_val));
  const double ols_auc = brute_auc_mapped(ols.map(bench.src_test), bench.tgt_test);

  const auto recon = reconstruction_protocol(FeatureKind::hoof32, bench.src_train,
                                             bench.tgt_train, bench.src_val,
                                             bench.tgt_val, cfg);
  MapperModel recon_mapper;
  recon_mapper.variant = MapperModel::Variant::reconstruction;
  recon_mapper.net = recon.model;
  const double recon_auc =
      brute_auc_mapped(recon_mapper.map(bench.src_test), bench.tgt_test);

  auto two_stream = two_stream_protocol(FeatureKind::hoof32, bench.src_train,
                                        bench.tgt_train, bench.src_val, bench.tgt_val,
                                        cfg);
  const double ts_auc = brute_auc_scored(two_stream.model, bench.src_test, bench.tgt_test);

  std::printf("  uniform %.2f | ols %.2f | reconstruction %.2f | two_stream %.2f\n",
              uniform, ols_auc, recon_auc, ts_auc);
  bool ok = true;
  ok &= uniform >= 45.0 && uniform <= 58.0;
  ok &= ols_auc >= uniform + 10.0;
  ok &= recon_auc >= ols_auc + 5.0;
  ok &= ts_auc >= uniform + 15.0;
  return ok;
}

bool criterion_linear_beats_chance() {
  for (std::uint64_t seed : {101, 102, 103, 104, 105}) {
    const BenchSplits bench = make_benchmark(seed);
    const double uniform = brute_auc_mapped(bench.src_test, bench.tgt_test);
    const MapperModel ols = fit_ols(vstack(bench.src_train, bench.src_val),
                                    vstack(bench.tgt_train, bench.tgt_val));
    const double ols_auc = brute_auc_mapped(ols.map(bench.src_test), bench.tgt_test);
    std::printf("  seed %llu: uniform %.2f, ols %.2f\n",
                static_cast<unsigned long long>(seed), uniform, ols_auc);
    if (!(ols_auc > 50.0 && ols_auc > uniform)) return false;
  }
  return true;
}

}  // namespace

int main() {
  struct Criterion {
    const char* name;
    std::function<bool()> run;
  };
  const std::vector<Criterion> criteria = {
      {"ols oracle recovery", criterion_ols},
      {"ridge closed form", criterion_ridge},
      {"gradient fidelity", criterion_gradients},
      {"hoof contract", criterion_hoof},
      {"pca contract", criterion_pca},
      {"evaluation analytics", criterion_eval_analytics},
      {"protocol fidelity", criterion_protocol},
      {"end-to-end ordering", criterion_end_to_end},
      {"linear beats chance", criterion_linear_beats_chance},
  };

  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    bool ok = false;
    std::string detail;
    try {
      ok = criteria[i].run();
    } catch (const std::exception& e) {
      detail = std::string(" (") + e.what() + ")";
    }
    std::printf("criterion %zu (%s): %s%s\n", i + 1, criteria[i].name,
                ok ? "PASS" : "FAIL", detail.c_str());
    if (!ok) ++failures;
  }
  return failures == 0 ? 0 : 1;
}
