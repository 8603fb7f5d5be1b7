#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "xview/features.hpp"

namespace xview {

enum class View { ego, side, top };

std::string to_string(View v);
View view_from_string(const std::string& s);

// Augmentation tag for a pair: none, horizontal flip, or rot(k) meaning a
// k * 30 degree rotation of the top-view flow (k in 1..11).
struct Augmentation {
  enum class Kind { none, hflip, rot };
  Kind kind = Kind::none;
  int k = 0;

  std::string str() const;
  static Augmentation parse(const std::string& s);
  bool operator==(const Augmentation&) const = default;
};

struct ClipRef {
  std::string clip_id;
  std::string video_id;
  View view = View::ego;
  std::string actor;
  std::string action;
  int frame_count = 16;
  std::map<std::string, std::string> feature_keys;
};

// One temporally aligned (ego, exo) clip correspondence.
struct ClipPair {
  std::string ego;  // clip_id
  std::string exo;  // clip_id
  View view = View::side;
  Augmentation augmentation;
};

struct SplitCounts {
  int train = 0;
  int val = 0;
  int test = 0;
};

struct Dataset {
  std::vector<ClipRef> clips;
  std::vector<ClipPair> pairs;
  std::map<std::string, std::vector<std::string>> splits;  // split -> video ids

  const ClipRef& clip(const std::string& clip_id) const;
  bool has_clip(const std::string& clip_id) const;

  // Distinct video ids referenced by paired clips, sorted.
  std::vector<std::string> paired_video_ids() const;

  // Split containing the given video id, or "" if unassigned.
  std::string split_of_video(const std::string& video_id) const;

  // Checks all type invariants: unique clip ids, pair references resolve,
  // pair views consistent, rot only on top view, splits video-disjoint.
  void validate() const;

  // Canonical ordering: clips sorted by clip_id, pairs by (ego, exo).
  void canonicalize();
};

// UTF-8 JSON manifest with keys "clips", "pairs", "splits". Parse and
// invariant errors name the offending clip/pair.
Dataset load_manifest(const std::string& path);
void save_manifest(const Dataset& d, const std::string& path);

// Seeded video-level split. Videos linked by a pair (ego video and exo
// video of the same pair) are assigned as a unit so no pair straddles two
// splits; augmented clips follow their video automatically.
void split_dataset(Dataset& d, const SplitCounts& counts, std::uint64_t seed);

struct FeaturePair {
  std::string ego_id;
  std::string exo_id;
  Eigen::VectorXd source;  // ego feature
  Eigen::VectorXd target;  // exo feature
  View view = View::side;
  Augmentation augmentation;
};

// One entry per ClipPair whose video belongs to the split, sorted by
// (ego, exo) clip id. Throws if a referenced feature is missing.
std::vector<FeaturePair> enumerate_feature_pairs(const Dataset& d,
                                                 const std::string& split,
                                                 const std::string& feature_kind,
                                                 const FeatureMatrix& store);

}  // namespace xview
