#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>

#include "xview/error.hpp"
#include "xview/flow.hpp"
#include "xview/rng.hpp"

using namespace xview;

namespace {

FlowField make_field(int w, int h, double u, double v) {
  FlowField f(w, h);
  for (std::size_t i = 0; i < f.size(); ++i) {
    f.u[i] = u;
    f.v[i] = v;
  }
  return f;
}

FlowField random_field(int w, int h, Rng& rng) {
  FlowField f(w, h);
  for (std::size_t i = 0; i < f.size(); ++i) {
    f.u[i] = rng.normal();
    f.v[i] = rng.normal();
  }
  return f;
}

}  // namespace

TEST_CASE("flip_horizontal on a 1x2 field") {
  FlowField f(2, 1);
  f.u = {1.0, 0.0};
  f.v = {0.0, 2.0};
  const FlowField g = flip_horizontal(f);
  CHECK(g.u[0] == 0.0);
  CHECK(g.v[0] == 2.0);
  CHECK(g.u[1] == -1.0);
  CHECK(g.v[1] == 0.0);
}

TEST_CASE("flip_horizontal is an exact involution") {
  Rng rng(1);
  const FlowField f = random_field(7, 5, rng);
  const FlowField g = flip_horizontal(flip_horizontal(f));
  for (std::size_t i = 0; i < f.size(); ++i) {
    CHECK(g.u[i] == f.u[i]);
    CHECK(g.v[i] == f.v[i]);
  }
}

TEST_CASE("flip of a uniform field negates u only") {
  const FlowField g = flip_horizontal(make_field(4, 4, 3.0, -1.0));
  for (std::size_t i = 0; i < g.size(); ++i) {
    CHECK(g.u[i] == -3.0);
    CHECK(g.v[i] == -1.0);
  }
}

TEST_CASE("rotate_vectors basic angles") {
  const FlowField f = make_field(1, 1, 1.0, 0.0);
  const FlowField quarter = rotate_vectors(f, M_PI / 2.0);
  CHECK(std::abs(quarter.u[0]) < 1e-12);
  CHECK(quarter.v[0] == doctest::Approx(1.0).epsilon(1e-12));
  const FlowField thirty = rotate_vectors(f, M_PI / 6.0);
  CHECK(thirty.u[0] == doctest::Approx(0.8660254).epsilon(1e-7));
  CHECK(thirty.v[0] == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("rotation composes and preserves magnitude") {
  Rng rng(2);
  const FlowField f = random_field(6, 4, rng);
  const FlowField once = rotate_vectors(rotate_vectors(f, 0.3), 0.9);
  const FlowField combined = rotate_vectors(f, 1.2);
  const FlowField full = rotate_vectors(f, 2.0 * M_PI);
  for (std::size_t i = 0; i < f.size(); ++i) {
    CHECK(std::abs(once.u[i] - combined.u[i]) < 1e-9);
    CHECK(std::abs(once.v[i] - combined.v[i]) < 1e-9);
    CHECK(std::abs(full.u[i] - f.u[i]) < 1e-9);
    const double m0 = std::hypot(f.u[i], f.v[i]);
    const double m1 = std::hypot(once.u[i], once.v[i]);
    CHECK(std::abs(m1 - m0) <= 1e-12 * std::max(1.0, m0));
  }
}

TEST_CASE("lk_dense_flow recovers a 1px shift of a smooth image") {
  const int w = 48, h = 48;
  GrayImage a(w, h), b(w, h);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      auto intensity = [](int xx, int yy) {
        return 100.0 * std::sin(0.35 * xx) * std::cos(0.28 * yy);
      };
      a.at(x, y) = intensity(x, y);
      b.at(x, y) = intensity(x - 1, y);  // content moved right by 1px
    }
  const FlowField f = lk_dense_flow(a, b, 7);
  std::vector<double> us, vs;
  for (int y = 8; y < h - 8; ++y)
    for (int x = 8; x < w - 8; ++x) {
      us.push_back(f.u[f.idx(x, y)]);
      vs.push_back(f.v[f.idx(x, y)]);
    }
  std::sort(us.begin(), us.end());
  std::sort(vs.begin(), vs.end());
  const double med_u = us[us.size() / 2];
  const double med_v = vs[vs.size() / 2];
  CHECK(med_u > 0.8);
  CHECK(med_u < 1.2);
  CHECK(std::abs(med_v) < 0.2);
}

TEST_CASE("lk_dense_flow degenerate cases") {
  GrayImage a(16, 16), b(16, 16);
  for (int y = 0; y < 16; ++y)
    for (int x = 0; x < 16; ++x) a.at(x, y) = b.at(x, y) = std::sin(0.5 * x * y);
  const FlowField same = lk_dense_flow(a, b, 5);
  for (std::size_t i = 0; i < same.size(); ++i) {
    CHECK(std::abs(same.u[i]) < 1e-9);
    CHECK(std::abs(same.v[i]) < 1e-9);
  }

  GrayImage flat_a(16, 16), flat_b(16, 16);
  for (auto& p : flat_b.pixels) p = 0.0;
  const FlowField gated = lk_dense_flow(flat_a, flat_b, 5);
  for (std::size_t i = 0; i < gated.size(); ++i) {
    CHECK(gated.u[i] == 0.0);
    CHECK(gated.v[i] == 0.0);
  }

  GrayImage wrong(8, 16);
  CHECK_THROWS_AS(lk_dense_flow(flat_a, wrong, 5), Error);
}

TEST_CASE("flow clip file round-trip") {
  Rng rng(9);
  FlowClip clip;
  clip.clip_id = "clipA";
  for (int i = 0; i < 3; ++i) clip.fields.push_back(random_field(5, 4, rng));

  const std::string path =
      (std::filesystem::temp_directory_path() / "xview_test_clip.xvmf").string();
  save_flow_clip(clip, path);
  const FlowClip back = load_flow_clip(path);
  REQUIRE(back.fields.size() == 3);
  for (std::size_t k = 0; k < 3; ++k)
    for (std::size_t i = 0; i < clip.fields[k].size(); ++i) {
      // float32 quantization on disk
      CHECK(back.fields[k].u[i] == doctest::Approx(clip.fields[k].u[i]).epsilon(1e-6));
      CHECK(back.fields[k].v[i] == doctest::Approx(clip.fields[k].v[i]).epsilon(1e-6));
    }
  std::filesystem::remove(path);
  CHECK_THROWS_AS(load_flow_clip(path), Error);
}
