#include "xview/eval.hpp"

#include <cmath>

#include "xview/error.hpp"

namespace xview {

std::string to_string(Metric m) {
  return m == Metric::euclidean ? "euclidean" : "cosine";
}

Metric metric_from_string(const std::string& s) {
  if (s == "euclidean") return Metric::euclidean;
  if (s == "cosine") return Metric::cosine;
  throw Error("unknown metric: " + s);
}

namespace {

Eigen::VectorXd distances(const Eigen::VectorXd& q, const Eigen::MatrixXd& gallery,
                          Metric metric) {
  const Eigen::Index n = gallery.rows();
  Eigen::VectorXd d(n);
  if (metric == Metric::euclidean) {
    for (Eigen::Index i = 0; i < n; ++i)
      d[i] = (gallery.row(i).transpose() - q).norm();
  } else {
    const double qn = q.norm();
    for (Eigen::Index i = 0; i < n; ++i) {
      const double gn = gallery.row(i).norm();
      const double denom = qn * gn;
      // Zero vectors have undefined direction; treat as maximally distant.
      d[i] = denom > 0.0 ? 1.0 - gallery.row(i).dot(q) / denom : 2.0;
    }
  }
  return d;
}

// Pessimistic rank: count of rows at least as good as the truth, ties
// included, so tied models cannot fake chance performance.
int pessimistic_rank_ascending(const Eigen::VectorXd& values, int truth_row) {
  const double t = values[truth_row];
  int rank = 0;
  for (Eigen::Index i = 0; i < values.size(); ++i)
    if (values[i] <= t) ++rank;
  return rank;
}

}  // namespace

RankingResult rank_gallery_mapped(const MapperModel& mapper,
                                  const Eigen::VectorXd& query,
                                  const Eigen::MatrixXd& gallery, int truth_row,
                                  Metric metric, const std::string& query_id) {
  if (truth_row < 0 || truth_row >= gallery.rows())
    throw Error("rank_gallery_mapped: ground-truth row " + std::to_string(truth_row) +
                " not in gallery of size " + std::to_string(gallery.rows()));
  const Eigen::VectorXd mapped = mapper.map(query);
  if (mapped.size() != gallery.cols())
    throw Error("rank_gallery_mapped: mapped query dim " + std::to_string(mapped.size()) +
                " does not match gallery dim " + std::to_string(gallery.cols()));
  RankingResult r;
  r.query_id = query_id;
  r.gallery_size = static_cast<int>(gallery.rows());
  r.rank = pessimistic_rank_ascending(distances(mapped, gallery, metric), truth_row);
  return r;
}

RankingResult rank_gallery_scored(TwoStreamScorer& scorer,
                                  const Eigen::VectorXd& query,
                                  const Eigen::MatrixXd& gallery, int truth_row,
                                  const std::string& query_id) {
  if (truth_row < 0 || truth_row >= gallery.rows())
    throw Error("rank_gallery_scored: ground-truth row " + std::to_string(truth_row) +
                " not in gallery of size " + std::to_string(gallery.rows()));
  const Eigen::MatrixXd queries = query.transpose().replicate(gallery.rows(), 1);
  const Eigen::VectorXd scores = score_batch(scorer, queries, gallery);
  RankingResult r;
  r.query_id = query_id;
  r.gallery_size = static_cast<int>(gallery.rows());
  // Descending sort: negate and reuse the ascending tie rule.
  r.rank = pessimistic_rank_ascending(-scores, truth_row);
  return r;
}

std::vector<double> cmc(const std::vector<RankingResult>& results) {
  if (results.empty()) throw Error("cmc: no ranking results");
  const int n = results.front().gallery_size;
  for (const auto& r : results) {
    if (r.gallery_size != n)
      throw Error("cmc: mixed gallery sizes (" + std::to_string(r.gallery_size) +
                  " vs " + std::to_string(n) + ")");
    if (r.rank < 1 || r.rank > n)
      throw Error("cmc: rank out of range for query '" + r.query_id + "'");
  }
  std::vector<double> curve(static_cast<std::size_t>(n), 0.0);
  for (const auto& r : results) curve[static_cast<std::size_t>(r.rank) - 1] += 1.0;
  double acc = 0.0;
  for (auto& c : curve) {
    acc += c;
    c = acc / static_cast<double>(results.size());
  }
  return curve;
}

double auc(const std::vector<double>& curve) {
  if (curve.empty()) throw Error("auc: empty curve");
  double sum = 0.0;
  for (double c : curve) sum += c;
  return 100.0 * sum / static_cast<double>(curve.size());
}

double random_baseline_auc(int gallery_size) {
  if (gallery_size < 1) throw Error("random_baseline_auc: empty gallery");
  return 100.0 * (gallery_size + 1) / (2.0 * gallery_size);
}

}  // namespace xview
