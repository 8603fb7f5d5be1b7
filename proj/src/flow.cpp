#include "xview/flow.hpp"

#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>

#include "xview/error.hpp"

namespace xview {

void FlowField::validate() const {
  if (width <= 0 || height <= 0)
    throw Error("FlowField: non-positive dimensions");
  const std::size_t n = static_cast<std::size_t>(width) * height;
  if (u.size() != n || v.size() != n)
    throw Error("FlowField: u/v size does not match width*height");
  for (std::size_t i = 0; i < n; ++i) {
    if (!std::isfinite(u[i]) || !std::isfinite(v[i]))
      throw Error("FlowField: non-finite entry at index " + std::to_string(i));
  }
}

void FlowClip::validate() const {
  if (fields.empty()) throw Error("FlowClip '" + clip_id + "': empty");
  const int w = fields.front().width;
  const int h = fields.front().height;
  for (const auto& f : fields) {
    f.validate();
    if (f.width != w || f.height != h)
      throw Error("FlowClip '" + clip_id + "': inconsistent field dimensions");
  }
}

FlowField flip_horizontal(const FlowField& f) {
  FlowField out(f.width, f.height);
  for (int y = 0; y < f.height; ++y) {
    for (int x = 0; x < f.width; ++x) {
      const std::size_t src = f.idx(x, y);
      const std::size_t dst = f.idx(f.width - 1 - x, y);
      out.u[dst] = -f.u[src];
      out.v[dst] = f.v[src];
    }
  }
  return out;
}

FlowClip flip_horizontal(const FlowClip& c) {
  FlowClip out;
  out.clip_id = c.clip_id;
  out.fields.reserve(c.fields.size());
  for (const auto& f : c.fields) out.fields.push_back(flip_horizontal(f));
  return out;
}

FlowField rotate_vectors(const FlowField& f, double phi) {
  const double c = std::cos(phi);
  const double s = std::sin(phi);
  FlowField out(f.width, f.height);
  for (std::size_t i = 0; i < f.size(); ++i) {
    out.u[i] = f.u[i] * c - f.v[i] * s;
    out.v[i] = f.u[i] * s + f.v[i] * c;
  }
  return out;
}

FlowClip rotate_vectors(const FlowClip& c, double phi) {
  FlowClip out;
  out.clip_id = c.clip_id;
  out.fields.reserve(c.fields.size());
  for (const auto& f : c.fields) out.fields.push_back(rotate_vectors(f, phi));
  return out;
}

namespace {

// Sobel derivatives with clamped borders.
void sobel(const GrayImage& img, std::vector<double>& gx, std::vector<double>& gy) {
  const int w = img.width, h = img.height;
  gx.assign(static_cast<std::size_t>(w) * h, 0.0);
  gy.assign(static_cast<std::size_t>(w) * h, 0.0);
  auto px = [&](int x, int y) {
    x = std::max(0, std::min(w - 1, x));
    y = std::max(0, std::min(h - 1, y));
    return img.at(x, y);
  };
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const std::size_t i = static_cast<std::size_t>(y) * w + x;
      gx[i] = (px(x + 1, y - 1) + 2 * px(x + 1, y) + px(x + 1, y + 1) -
               px(x - 1, y - 1) - 2 * px(x - 1, y) - px(x - 1, y + 1)) / 8.0;
      gy[i] = (px(x - 1, y + 1) + 2 * px(x, y + 1) + px(x + 1, y + 1) -
               px(x - 1, y - 1) - 2 * px(x, y - 1) - px(x + 1, y - 1)) / 8.0;
    }
  }
}

}  // namespace

FlowField lk_dense_flow(const GrayImage& frame_a, const GrayImage& frame_b,
                        int window, double eigen_threshold) {
  if (frame_a.width != frame_b.width || frame_a.height != frame_b.height)
    throw Error("lk_dense_flow: frame dimension mismatch");
  if (window < 3 || window % 2 == 0)
    throw Error("lk_dense_flow: window must be odd and >= 3");

  const int w = frame_a.width, h = frame_a.height;
  std::vector<double> gx, gy;
  sobel(frame_a, gx, gy);
  std::vector<double> gt(static_cast<std::size_t>(w) * h);
  for (std::size_t i = 0; i < gt.size(); ++i)
    gt[i] = frame_b.pixels[i] - frame_a.pixels[i];

  const int r = window / 2;
  FlowField out(w, h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      double sxx = 0, sxy = 0, syy = 0, sxt = 0, syt = 0;
      for (int dy = -r; dy <= r; ++dy) {
        const int yy = std::max(0, std::min(h - 1, y + dy));
        for (int dx = -r; dx <= r; ++dx) {
          const int xx = std::max(0, std::min(w - 1, x + dx));
          const std::size_t i = static_cast<std::size_t>(yy) * w + xx;
          sxx += gx[i] * gx[i];
          sxy += gx[i] * gy[i];
          syy += gy[i] * gy[i];
          sxt += gx[i] * gt[i];
          syt += gy[i] * gt[i];
        }
      }
      // Smaller eigenvalue of the 2x2 structure tensor.
      const double tr = sxx + syy;
      const double det = sxx * syy - sxy * sxy;
      const double disc = std::sqrt(std::max(0.0, tr * tr / 4.0 - det));
      const double lambda_min = tr / 2.0 - disc;
      if (lambda_min < eigen_threshold) continue;  // leave (0, 0)
      const std::size_t i = out.idx(x, y);
      out.u[i] = (-syy * sxt + sxy * syt) / det;
      out.v[i] = (sxy * sxt - sxx * syt) / det;
    }
  }
  return out;
}

namespace {

constexpr char kFlowMagic[4] = {'X', 'V', 'M', 'F'};

void write_u32(std::ostream& os, std::uint32_t x) {
  unsigned char b[4] = {static_cast<unsigned char>(x & 0xff),
                        static_cast<unsigned char>((x >> 8) & 0xff),
                        static_cast<unsigned char>((x >> 16) & 0xff),
                        static_cast<unsigned char>((x >> 24) & 0xff)};
  os.write(reinterpret_cast<const char*>(b), 4);
}

std::uint32_t read_u32(std::istream& is) {
  unsigned char b[4];
  is.read(reinterpret_cast<char*>(b), 4);
  return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
         (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

void write_f32(std::ostream& os, float f) {
  std::uint32_t bits;
  std::memcpy(&bits, &f, 4);
  write_u32(os, bits);
}

float read_f32(std::istream& is) {
  const std::uint32_t bits = read_u32(is);
  float f;
  std::memcpy(&f, &bits, 4);
  return f;
}

}  // namespace

void save_flow_clip(const FlowClip& clip, const std::string& path) {
  clip.validate();
  std::ofstream os(path, std::ios::binary);
  if (!os) throw Error("cannot open for writing: " + path);
  os.write(kFlowMagic, 4);
  write_u32(os, 1);  // version
  write_u32(os, static_cast<std::uint32_t>(clip.fields.front().width));
  write_u32(os, static_cast<std::uint32_t>(clip.fields.front().height));
  write_u32(os, static_cast<std::uint32_t>(clip.fields.size()));
  for (const auto& f : clip.fields) {
    for (std::size_t i = 0; i < f.size(); ++i) {
      write_f32(os, static_cast<float>(f.u[i]));
      write_f32(os, static_cast<float>(f.v[i]));
    }
  }
  if (!os) throw Error("write failed: " + path);
}

FlowClip load_flow_clip(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw Error("cannot open: " + path);
  char magic[4];
  is.read(magic, 4);
  if (!is || std::memcmp(magic, kFlowMagic, 4) != 0)
    throw Error("bad flow clip magic in " + path);
  const std::uint32_t version = read_u32(is);
  if (version != 1) throw Error("unsupported flow clip version in " + path);
  const std::uint32_t width = read_u32(is);
  const std::uint32_t height = read_u32(is);
  const std::uint32_t count = read_u32(is);
  FlowClip clip;
  clip.clip_id = std::filesystem::path(path).stem().string();
  clip.fields.reserve(count);
  for (std::uint32_t k = 0; k < count; ++k) {
    FlowField f(static_cast<int>(width), static_cast<int>(height));
    for (std::size_t i = 0; i < f.size(); ++i) {
      f.u[i] = read_f32(is);
      f.v[i] = read_f32(is);
    }
    clip.fields.push_back(std::move(f));
  }
  if (!is) throw Error("truncated flow clip: " + path);
  clip.validate();
  return clip;
}

}  // namespace xview
