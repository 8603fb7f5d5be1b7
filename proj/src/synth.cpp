#include "xview/synth.hpp"

#include <cmath>
#include <numeric>

#include "xview/error.hpp"
#include "xview/rng.hpp"

namespace xview {

namespace {

const char* kActionNames[7] = {"walking",      "jogging", "running", "hand_waving",
                               "hand_clapping", "boxing",  "push_ups"};

std::string pad3(int v) {
  char buf[8];
  std::snprintf(buf, sizeof buf, "%03d", v);
  return buf;
}

std::string pad2(int v) {
  char buf[8];
  std::snprintf(buf, sizeof buf, "%02d", v);
  return buf;
}

}  // namespace

void SynthConfig::validate() const {
  if (action_count < 1 || videos_per_action < 1 || clips_per_video < 1 ||
      latent_dim < 1 || feature_dim < 1)
    throw Error("SynthConfig: counts must be >= 1");
  if (noise_sigma < 0.0) throw Error("SynthConfig: noise_sigma must be >= 0");
  if (latent_dim > feature_dim)
    throw Error("SynthConfig: latent_dim must not exceed feature_dim");
  if (frame_count < 2) throw Error("SynthConfig: frame_count must be >= 2");
}

std::string synth_action_name(int action_index) {
  std::string base = kActionNames[action_index % 7];
  if (action_index < 7) return base;
  return base + "_" + std::to_string(action_index / 7);
}

namespace {

Eigen::VectorXd gaussian_vector(Rng& rng, int n, double scale = 1.0) {
  Eigen::VectorXd v(n);
  for (int i = 0; i < n; ++i) v[i] = scale * rng.normal();
  return v;
}

Eigen::MatrixXd gaussian_matrix(Rng& rng, int rows, int cols, double scale) {
  Eigen::MatrixXd m(rows, cols);
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c) m(r, c) = scale * rng.normal();
  return m;
}

struct VideoLayout {
  int action = 0;
  View exo_view = View::side;
  std::string video_id;
};

VideoLayout video_layout(const SynthConfig& c, int v) {
  VideoLayout l;
  l.action = v % c.action_count;
  l.exo_view = (v % 2 == 0) ? View::side : View::top;
  l.video_id = "v" + pad3(v);
  return l;
}

void add_clip_pair(Dataset& d, const VideoLayout& l, int clip, int frame_count) {
  const std::string exo_name = to_string(l.exo_view);
  ClipRef ego;
  ego.clip_id = l.video_id + "_ego_c" + pad2(clip);
  ego.video_id = l.video_id;
  ego.view = View::ego;
  ego.actor = "actor0";
  ego.action = synth_action_name(l.action);
  ego.frame_count = frame_count;
  ClipRef exo = ego;
  exo.clip_id = l.video_id + "_" + exo_name + "_c" + pad2(clip);
  exo.view = l.exo_view;
  d.clips.push_back(ego);
  d.clips.push_back(exo);
  ClipPair p;
  p.ego = ego.clip_id;
  p.exo = exo.clip_id;
  p.view = l.exo_view;
  d.pairs.push_back(p);
}

}  // namespace

SynthFeatureData generate_feature_pairs(const SynthConfig& c) {
  c.validate();
  const Rng root(c.seed);

  Rng proto_rng = root.stream("prototypes");
  std::vector<Eigen::VectorXd> prototypes;
  for (int a = 0; a < c.action_count; ++a)
    prototypes.push_back(gaussian_vector(proto_rng, c.latent_dim));

  Rng mat_rng = root.stream("coupling_matrices");
  const double scale = 1.0 / std::sqrt(static_cast<double>(c.latent_dim));
  const Eigen::MatrixXd a_ego = gaussian_matrix(mat_rng, c.feature_dim, c.latent_dim, scale);
  Eigen::MatrixXd a_exo = gaussian_matrix(mat_rng, c.feature_dim, c.latent_dim, scale);
  if (2 * c.latent_dim <= c.feature_dim) {
    // Give the two views disjoint observation subspaces: project the exo
    // columns out of span(A_ego), keeping their norms. Raw ego and exo
    // features then carry no systematic alignment, so an identity mapper
    // scores at chance instead of drifting with the seed.
    const Eigen::MatrixXd q =
        Eigen::HouseholderQR<Eigen::MatrixXd>(a_ego).householderQ() *
        Eigen::MatrixXd::Identity(c.feature_dim, c.latent_dim);
    for (int j = 0; j < c.latent_dim; ++j) {
      const double norm = a_exo.col(j).norm();
      a_exo.col(j) -= q * (q.transpose() * a_exo.col(j));
      a_exo.col(j) *= norm / a_exo.col(j).norm();
    }
  }

  // Fixed latent permutation for the nonlinear coupling.
  std::vector<int> perm(static_cast<std::size_t>(c.latent_dim));
  std::iota(perm.begin(), perm.end(), 0);
  Rng perm_rng = root.stream("latent_permutation");
  perm_rng.shuffle(perm);

  SynthFeatureData out;
  const FeatureKind kind = c.feature_dim == 128 ? FeatureKind::c3d128 : FeatureKind::hoof32;
  const int n_clips = c.total_videos() * c.clips_per_video;
  Eigen::MatrixXd rows(2 * n_clips, c.feature_dim);
  std::vector<std::string> ids;
  ids.reserve(static_cast<std::size_t>(2 * n_clips));

  int row = 0;
  for (int v = 0; v < c.total_videos(); ++v) {
    const VideoLayout layout = video_layout(c, v);
    for (int k = 0; k < c.clips_per_video; ++k) {
      add_clip_pair(out.dataset, layout, k, 16);
      Rng clip_rng = root.stream("video:" + layout.video_id)
                         .stream(static_cast<std::uint64_t>(k));

      Eigen::VectorXd z = prototypes[layout.action] + gaussian_vector(clip_rng, c.latent_dim);
      Eigen::VectorXd ego = a_ego * z + gaussian_vector(clip_rng, c.feature_dim, c.noise_sigma);
      Eigen::VectorXd exo;
      if (c.coupling == SynthConfig::Coupling::linear) {
        exo = a_exo * z;
      } else {
        // Half the coordinates stay monotone in z (linearly rankable, so a
        // linear map beats chance); half are even-symmetric, which a linear
        // map cannot represent but a ReLU net learns with two units.
        Eigen::VectorXd pz(c.latent_dim);
        for (int i = 0; i < c.latent_dim; ++i) {
          const double zi = z[perm[i]];
          pz[i] = (i % 2 == 0) ? std::tanh(3.0 * zi) : std::abs(zi);
        }
        exo = a_exo * pz;
      }
      exo += gaussian_vector(clip_rng, c.feature_dim, c.noise_sigma);

      const auto& pair = out.dataset.pairs.back();
      ids.push_back(pair.ego);
      rows.row(row++) = ego.transpose();
      ids.push_back(pair.exo);
      rows.row(row++) = exo.transpose();
    }
  }
  out.features = FeatureMatrix::from_rows(kind, std::move(ids), std::move(rows));
  out.dataset.canonicalize();
  out.dataset.validate();
  return out;
}

namespace {

// Per-action temporal magnitude envelope over the clip, in [0.2, 1.2].
double action_envelope(int action, int frame, int frame_count) {
  const double t = static_cast<double>(frame) / frame_count;
  switch (action % 4) {
    case 0: return 0.7 + 0.5 * std::sin(2.0 * M_PI * t);            // oscillatory gait
    case 1: return 0.7 + 0.5 * std::sin(4.0 * M_PI * t);            // faster cadence
    case 2: return frame % 4 < 2 ? 1.2 : 0.2;                       // alternating bursts
    default: return 0.9 - 0.6 * std::abs(2.0 * t - 1.0);            // ramp up/down
  }
}

FlowField render_field(int w, int h, double angle, double magnitude,
                       double noise_sigma, Rng& rng) {
  FlowField f(w, h);
  const double u0 = magnitude * std::cos(angle);
  const double v0 = magnitude * std::sin(angle);
  for (std::size_t i = 0; i < f.size(); ++i) {
    f.u[i] = u0 + noise_sigma * rng.normal();
    f.v[i] = v0 + noise_sigma * rng.normal();
  }
  return f;
}

}  // namespace

SynthFlowData generate_flow_dataset(const SynthConfig& c) {
  c.validate();
  const Rng root(c.seed);
  SynthFlowData out;

  for (int v = 0; v < c.total_videos(); ++v) {
    const VideoLayout layout = video_layout(c, v);
    // Base motion direction, well separated across actions.
    const double base_angle = 2.0 * M_PI * layout.action / c.action_count + 0.1;
    // First-person counterpart: roughly opposite apparent motion.
    const double ego_angle = base_angle + M_PI + 0.2;

    for (int k = 0; k < c.clips_per_video; ++k) {
      add_clip_pair(out.dataset, layout, k, c.frame_count);
      Rng clip_rng = root.stream("flow_video:" + layout.video_id)
                         .stream(static_cast<std::uint64_t>(k));

      FlowClip exo_clip, ego_clip;
      exo_clip.clip_id = out.dataset.pairs.back().exo;
      ego_clip.clip_id = out.dataset.pairs.back().ego;
      for (int t = 0; t < c.frame_count - 1; ++t) {
        // Small angular wobble keeps the histogram mass within a few bins.
        const double wobble = 0.25 * std::sin(2.0 * M_PI * t / (c.frame_count - 1));
        const double mag = action_envelope(layout.action, t, c.frame_count - 1);
        exo_clip.fields.push_back(render_field(c.flow_width, c.flow_height,
                                               base_angle + wobble, mag,
                                               c.noise_sigma, clip_rng));
        ego_clip.fields.push_back(render_field(c.flow_width, c.flow_height,
                                               ego_angle + wobble, 0.8 * mag,
                                               c.noise_sigma, clip_rng));
      }
      out.clips.push_back(std::move(ego_clip));
      out.clips.push_back(std::move(exo_clip));
    }
  }
  out.dataset.canonicalize();
  out.dataset.validate();
  return out;
}

}  // namespace xview
