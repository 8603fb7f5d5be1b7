#pragma once

#include <Eigen/Dense>
#include <string>
#include <unordered_map>
#include <vector>

#include "xview/flow.hpp"

namespace xview {

enum class FeatureKind { hoof32, c3d4096, c3d128 };

std::string to_string(FeatureKind k);
FeatureKind feature_kind_from_string(const std::string& s);
int feature_dim(FeatureKind k);

// clip_id-indexed matrix of fixed-dimension descriptors, one row per clip.
class FeatureMatrix {
 public:
  FeatureMatrix() = default;
  explicit FeatureMatrix(FeatureKind kind, int dim) : kind_(kind), dim_(dim) {}

  // Bulk construction; ids.size() must equal data.rows().
  static FeatureMatrix from_rows(FeatureKind kind, std::vector<std::string> ids,
                                 Eigen::MatrixXd data);

  void add_row(const std::string& clip_id, const Eigen::VectorXd& row);
  bool has(const std::string& clip_id) const { return index_.count(clip_id) > 0; }
  Eigen::VectorXd row(const std::string& clip_id) const;
  int row_index(const std::string& clip_id) const;

  int rows() const { return static_cast<int>(ids_.size()); }
  int dim() const { return dim_; }
  FeatureKind kind() const { return kind_; }
  const std::vector<std::string>& ids() const { return ids_; }
  const Eigen::MatrixXd& data() const { return data_; }

  // Binary file: magic "XVFT", u32 version=1, u32 rows, u32 dim, then
  // rows*dim float32 row-major little-endian, plus a JSON sidecar
  // (<path>.json) mapping clip_id -> row index.
  void save(const std::string& path) const;
  static FeatureMatrix load(const std::string& path);

 private:
  FeatureKind kind_ = FeatureKind::hoof32;
  int dim_ = 0;
  Eigen::MatrixXd data_;  // rows() x dim_
  std::vector<std::string> ids_;
  std::unordered_map<std::string, int> index_;
};

// Magnitude-weighted full-circle [0, 2pi) orientation histogram over every
// flow vector of every field in the clip, L1-normalized once per clip.
// A clip with zero total magnitude maps to the uniform histogram.
Eigen::VectorXd hoof(const FlowClip& clip, int bin_count = 32);

struct PcaModel {
  Eigen::VectorXd mean;         // input_dim
  Eigen::MatrixXd components;   // out_dim x input_dim, orthonormal rows
  Eigen::VectorXd eigenvalues;  // out_dim, non-increasing

  void save(const std::string& dir) const;
  static PcaModel load(const std::string& dir);
};

// Top-out_dim principal directions of the sample covariance, via thin SVD of
// the centered data. Component signs are fixed so each row's
// largest-magnitude entry is positive.
PcaModel pca_fit(const FeatureMatrix& x, int out_dim = 128);

// rows -> components * (row - mean); no whitening.
FeatureMatrix pca_apply(const PcaModel& m, const FeatureMatrix& x);

}  // namespace xview
