#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "xview/models.hpp"

namespace xview {

enum class Metric { euclidean, cosine };

std::string to_string(Metric m);
Metric metric_from_string(const std::string& s);

struct RankingResult {
  std::string query_id;
  int rank = 1;          // 1-based position of the ground-truth match
  int gallery_size = 0;  // rank <= gallery_size
};

// Rank of the truth row when gallery rows are sorted by ascending distance
// to the mapped query. Ties take the pessimistic (worst) position.
RankingResult rank_gallery_mapped(const MapperModel& mapper,
                                  const Eigen::VectorXd& query,
                                  const Eigen::MatrixXd& gallery, int truth_row,
                                  Metric metric, const std::string& query_id = "");

// Descending-score ranking with the two-stream scorer; pessimistic ties.
RankingResult rank_gallery_scored(TwoStreamScorer& scorer,
                                  const Eigen::VectorXd& query,
                                  const Eigen::MatrixXd& gallery, int truth_row,
                                  const std::string& query_id = "");

// CMC(k) = fraction of queries whose rank is <= k, k = 1..N.
std::vector<double> cmc(const std::vector<RankingResult>& results);

// 100 * mean_k CMC(k); 100 for perfect retrieval, 100/N for all-worst.
double auc(const std::vector<double>& curve);

// Analytic expectation for uniformly random ranks: 100 * (N + 1) / (2N).
double random_baseline_auc(int gallery_size);

}  // namespace xview
