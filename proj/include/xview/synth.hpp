#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "xview/datamodel.hpp"
#include "xview/flow.hpp"

namespace xview {

// Seeded generator of paired ego/exo data, the desk-scale stand-in for a
// recorded two-view dataset. Feature-level generation exercises the
// learning stack; flow-level generation exercises the HOOF pipeline.
struct SynthConfig {
  int action_count = 7;
  int videos_per_action = 4;
  int clips_per_video = 5;
  int latent_dim = 8;
  int feature_dim = 32;  // 32 -> hoof32-shaped, 128 -> c3d128-shaped
  double noise_sigma = 0.1;
  enum class Coupling { linear, nonlinear };
  Coupling coupling = Coupling::linear;
  std::uint64_t seed = 0;

  // Flow-level generation only.
  int flow_width = 24;
  int flow_height = 24;
  int frame_count = 16;

  int total_videos() const { return action_count * videos_per_action; }
  void validate() const;
};

// Action names cycle through the default seven-motion vocabulary.
std::string synth_action_name(int action_index);

struct SynthFeatureData {
  Dataset dataset;        // splits empty; exo views alternate side/top by video
  FeatureMatrix features; // one row per ego and exo clip
};

// Per clip: latent z = action prototype + unit Gaussian jitter;
// ego = A_ego z + sigma * eps; exo = A_exo z + sigma * eps (linear) or
// A_exo tanh(g P z) + sigma * eps with a fixed latent permutation P and
// saturating gain g. When the feature space is wide enough, the exo
// coupling matrix is orthogonalized against the ego one.
// A matrices, prototypes and P are fixed per seed; every (video, clip)
// draws from its own named RNG stream.
SynthFeatureData generate_feature_pairs(const SynthConfig& c);

struct SynthFlowData {
  Dataset dataset;
  std::vector<FlowClip> clips;  // ego and exo clips, ids match the dataset
};

// Parametric per-action flow programs (distinct base directions, per-action
// temporal envelopes); the ego clip is a deterministic transform of the exo
// program plus noise. 16 frames -> 15 fields.
SynthFlowData generate_flow_dataset(const SynthConfig& c);

}  // namespace xview
