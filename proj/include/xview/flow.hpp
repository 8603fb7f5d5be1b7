#pragma once

#include <string>
#include <vector>

namespace xview {

// Dense 2-D motion field for one frame transition. u is the horizontal
// displacement in pixels/frame, v the vertical one, both row-major.
struct FlowField {
  int width = 0;
  int height = 0;
  std::vector<double> u;
  std::vector<double> v;

  FlowField() = default;
  FlowField(int w, int h) : width(w), height(h), u(static_cast<std::size_t>(w) * h, 0.0), v(static_cast<std::size_t>(w) * h, 0.0) {}

  std::size_t idx(int x, int y) const { return static_cast<std::size_t>(y) * width + x; }
  std::size_t size() const { return u.size(); }

  // Throws on shape mismatch or non-finite entries.
  void validate() const;
};

// Ordered flow fields for one clip (frame_count - 1 fields).
struct FlowClip {
  std::string clip_id;
  std::vector<FlowField> fields;

  void validate() const;
};

// Simple grayscale image for the built-in flow estimator.
struct GrayImage {
  int width = 0;
  int height = 0;
  std::vector<double> pixels;  // row-major, arbitrary intensity scale

  GrayImage() = default;
  GrayImage(int w, int h) : width(w), height(h), pixels(static_cast<std::size_t>(w) * h, 0.0) {}
  double& at(int x, int y) { return pixels[static_cast<std::size_t>(y) * width + x]; }
  double at(int x, int y) const { return pixels[static_cast<std::size_t>(y) * width + x]; }
};

// Mirror the grid left-right and negate the horizontal component. Matches
// what flipping the source video and recomputing flow would produce.
FlowField flip_horizontal(const FlowField& f);
FlowClip flip_horizontal(const FlowClip& c);

// Rotate each motion vector by phi radians in place on the grid. Pixel
// positions are untouched; valid for orientation-histogram features, which
// are position-free.
FlowField rotate_vectors(const FlowField& f, double phi);
FlowClip rotate_vectors(const FlowClip& c, double phi);

// Single-scale Lucas-Kanade with Sobel gradients. Pixels whose structure
// tensor has a smaller eigenvalue below `eigen_threshold` get zero flow.
FlowField lk_dense_flow(const GrayImage& frame_a, const GrayImage& frame_b,
                        int window, double eigen_threshold = 1e-4);

// Binary clip file: magic "XVMF", u32 version=1, u32 width, u32 height,
// u32 field_count, then field_count * width * height interleaved (u, v)
// float32 pairs, row-major, little-endian.
void save_flow_clip(const FlowClip& clip, const std::string& path);
FlowClip load_flow_clip(const std::string& path);

}  // namespace xview
