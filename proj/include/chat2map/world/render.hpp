#pragma once

#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

#include "chat2map/core/tensor.hpp"
#include "chat2map/geo/local_map.hpp"
#include "chat2map/geo/pose.hpp"
#include "chat2map/world/scene.hpp"

namespace chat2map::world {

using geo::LocalMap;
using geo::Pose;

constexpr double kNoHit = std::numeric_limits<double>::infinity();

struct DepthScan {
  std::vector<double> ranges;  // kNoHit sentinel when nothing within max_range
  double fov = 90.0;           // degrees
  int n_rays = 31;
  double max_range = 3.1;

  // Angular offset of ray k from the heading, degrees; k runs left to right.
  double offset_deg(int k) const {
    if (n_rays == 1) return 0.0;
    return fov / 2.0 - k * (fov / (n_rays - 1));
  }
};

struct RgbProxy {
  TensorF pixels;  // [H, W, 3] in [0, 1]
};

// Rays cast from a lattice node run exactly along gridlines, making the
// traversed cell column ambiguous. All casts nudge the origin this far toward
// the ego's right so the choice is deterministic and identical between the
// world traversal and the local wedge traversal.
constexpr double kRayNudge = 1e-6;

namespace detail {

struct RayHit {
  double t = kNoHit;   // distance to first occupied-cell boundary
  int r = -1, c = -1;  // hit cell (scene grid), valid when t finite
};

// Amanatides-Woo grid traversal from (ox, oy) along unit direction (dx, dy),
// stopping at the first occupied cell or at t > t_max.
inline RayHit raycast(const Scene& s, double ox, double oy, double dx, double dy,
                      double t_max) {
  const double cs = s.cell_size;
  int c = static_cast<int>(std::floor(ox / cs));
  int r = static_cast<int>(std::floor(oy / cs));
  const int step_c = dx > 0 ? 1 : -1;
  const int step_r = dy > 0 ? 1 : -1;
  const double inf = std::numeric_limits<double>::infinity();
  double t_max_x = inf, t_max_y = inf, t_dx = inf, t_dy = inf;
  if (dx != 0) {
    double next = (c + (dx > 0 ? 1 : 0)) * cs;
    t_max_x = (next - ox) / dx;
    t_dx = cs / std::abs(dx);
  }
  if (dy != 0) {
    double next = (r + (dy > 0 ? 1 : 0)) * cs;
    t_max_y = (next - oy) / dy;
    t_dy = cs / std::abs(dy);
  }
  if (s.occupied(r, c)) throw std::runtime_error("raycast: origin inside occupied cell");
  // On a (near-)exact crossing tie the ray passes through a lattice corner; we
  // step diagonally so zero-length cell grazes touch neither side cell. The
  // local-grid traversal in the wedge projection uses the same rule, keeping
  // the two traversals cell-for-cell consistent.
  const double tie_tol = 1e-12;
  while (true) {
    double t;
    if (std::abs(t_max_x - t_max_y) <= tie_tol) {
      t = t_max_x;
      c += step_c;
      r += step_r;
      t_max_x += t_dx;
      t_max_y += t_dy;
    } else if (t_max_x < t_max_y) {
      t = t_max_x;
      c += step_c;
      t_max_x += t_dx;
    } else {
      t = t_max_y;
      r += step_r;
      t_max_y += t_dy;
    }
    if (t > t_max) return {};
    if (s.occupied(r, c)) return {t, r, c};
  }
}

}  // namespace detail

inline DepthScan render_depth(const Scene& scene, const Pose& pose, double fov = 90.0,
                              int n_rays = 31, double max_range = 3.1) {
  if (scene.occupied_at(pose.x, pose.y))
    throw std::runtime_error("render_depth: pose inside occupied cell");
  DepthScan scan;
  scan.fov = fov;
  scan.n_rays = n_rays;
  scan.max_range = max_range;
  scan.ranges.resize(static_cast<size_t>(n_rays));
  double hc, hs;
  geo::dir_of(pose.theta, hc, hs);
  double ox = pose.x + kRayNudge * hs;  // right = heading rotated -90 degrees
  double oy = pose.y - kRayNudge * hc;
  for (int k = 0; k < n_rays; ++k) {
    double dx, dy;
    geo::unit_dir(pose.theta + scan.offset_deg(k), dx, dy);
    auto hit = detail::raycast(scene, ox, oy, dx, dy, max_range);
    scan.ranges[static_cast<size_t>(k)] = hit.t;
  }
  return scan;
}

// False-color egocentric view: one ray per column, hue from the hit structure's
// surface id, intensity decaying with distance and shaded by a vertical
// gradient. No-hit columns stay black.
inline RgbProxy render_rgb_proxy(const Scene& scene, const Pose& pose, int h_img = 32,
                                 int w_img = 32, double fov = 90.0, double max_range = 3.1) {
  if (scene.occupied_at(pose.x, pose.y))
    throw std::runtime_error("render_rgb_proxy: pose inside occupied cell");
  RgbProxy img;
  img.pixels = TensorF({h_img, w_img, 3});
  for (int c = 0; c < w_img; ++c) {
    double off = fov / 2.0 - (c + 0.5) * (fov / w_img);
    double a = (pose.theta + off) * M_PI / 180.0;
    auto hit = detail::raycast(scene, pose.x, pose.y, std::cos(a), std::sin(a), max_range);
    if (hit.t == kNoHit) continue;
    int32_t sid = scene.surface(hit.r, hit.c);
    // Fixed hue palette keyed by surface id.
    double hue = std::fmod(sid * 0.37, 1.0);
    double rr = 0.5 + 0.5 * std::cos(2 * M_PI * hue);
    double gg = 0.5 + 0.5 * std::cos(2 * M_PI * (hue + 1.0 / 3.0));
    double bb = 0.5 + 0.5 * std::cos(2 * M_PI * (hue + 2.0 / 3.0));
    double fade = 1.0 - 0.8 * (hit.t / max_range);
    for (int r = 0; r < h_img; ++r) {
      double shade = 0.4 + 0.6 * (1.0 - static_cast<double>(r) / (h_img - 1));
      float v = static_cast<float>(fade * shade);
      img.pixels.at3(r, c, 0) = static_cast<float>(rr) * v;
      img.pixels.at3(r, c, 1) = static_cast<float>(gg) * v;
      img.pixels.at3(r, c, 2) = static_cast<float>(bb) * v;
    }
  }
  return img;
}

// Ground-truth egocentric crop: H x W cells around the pose, rotated so the ego
// faces up. The ego sits on the grid node at the bottom-left corner of cell
// (H/2, W/2); channel 1 is all ones (ground truth is fully observed); points
// beyond the scene extent count as occupied.
inline LocalMap gt_local_map(const Scene& scene, const Pose& pose, int H = 64, int W = 64) {
  if (scene.occupied_at(pose.x, pose.y))
    throw std::runtime_error("gt_local_map: pose inside occupied cell");
  LocalMap m = LocalMap::make(H, W, H / 2, W / 2, scene.cell_size);
  for (int r = 0; r < H; ++r) {
    for (int c = 0; c < W; ++c) {
      // Cell centre at half-cell offsets from the anchor node, so samples land
      // in scene-cell interiors when the pose sits on the scene lattice.
      double f = (m.anchor_r - r - 0.5) * m.cell_size;
      double l = (c - m.anchor_c + 0.5) * m.cell_size;
      double uc, us;
      geo::dir_of(pose.theta, uc, us);
      double x = pose.x + f * uc + l * us;
      double y = pose.y + f * us - l * uc;
      m.cells.at3(r, c, 0) = scene.occupied_at(x, y) ? 1.0f : 0.0f;
      m.cells.at3(r, c, 1) = 1.0f;
    }
  }
  return m;
}

}  // namespace chat2map::world
