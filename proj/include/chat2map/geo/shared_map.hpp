#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "chat2map/core/tensor.hpp"
#include "chat2map/geo/local_map.hpp"
#include "chat2map/geo/pose.hpp"

namespace chat2map::geo {

// Finalized shared map: binary occupancy plus a seen mask (count > 0).
struct BinaryMap {
  TensorF cells;  // [G, G, 2], channel 0 occupancy, channel 1 seen
  double cell_size = 0.1;
  int anchor_r = 0, anchor_c = 0;  // origin node of the episode frame
};

// Registration accumulator over a G x G canvas in the episode reference frame
// (the frame of the first ego's first pose, "up" = that ego's heading).
// Each cell keeps a running sum of registered occupancy values and the number
// of updates it received.
struct SharedMapAccumulator {
  TensorF sum;                  // [G, G]
  std::vector<int32_t> count;   // G * G
  double cell_size = 0.1;
  int anchor_r = 0, anchor_c = 0;

  int size() const { return static_cast<int>(sum.shape[0]); }

  // Canvases are capped at 128.4 m on a side (1284 cells at 0.1 m).
  static constexpr double kMaxExtentM = 128.4;

  static SharedMapAccumulator make(int G, double cell_size = 0.1) {
    if (G * cell_size > kMaxExtentM + 1e-9)
      throw std::runtime_error("shared map canvas exceeds maximum extent");
    SharedMapAccumulator acc;
    acc.sum = TensorF({G, G});
    acc.count.assign(static_cast<size_t>(G) * G, 0);
    acc.cell_size = cell_size;
    acc.anchor_r = G / 2;
    acc.anchor_c = G / 2;
    return acc;
  }
};

enum class ResampleMode { Nearest, Bilinear };

// Which local cells count as the registered footprint: all of them, or only
// those marked seen (binary observation wedges carry 0 in unseen cells, which
// must not dilute the running average).
enum class RegisterMode { Full, SeenOnly };

namespace detail {

// Local-frame (forward f, rightward l) coordinates of the centre of canvas
// cell (R, C) for a local map registered at `pose`. The canvas is laid out
// like a scene grid in episode-frame coordinates: columns along +x, rows along
// -y (row 0 at maximum y), with the frame origin on the anchor node.
inline void canvas_to_local(const SharedMapAccumulator& acc, const Pose& pose, int R, int C,
                            double& f, double& l) {
  double x = (C - acc.anchor_c + 0.5) * acc.cell_size;
  double y = (acc.anchor_r - R - 0.5) * acc.cell_size;
  double dx = x - pose.x, dy = y - pose.y;
  double uc, us;
  dir_of(pose.theta, uc, us);
  f = dx * uc + dy * us;   // along heading
  l = dx * us - dy * uc;   // along rightward = heading rotated -90 degrees
}

}  // namespace detail

// Registers `local` into the accumulator at `pose` (normalized, episode
// frame). Gather-style resampling: every canvas cell whose centre falls inside
// the local extent reads the local map (nearest neighbour or bilinear) and
// receives one update. For poses on the cell lattice with 90-degree-multiple
// headings, nearest-neighbour resampling is an exact cell permutation.
inline SharedMapAccumulator& register_local(SharedMapAccumulator& acc, const LocalMap& local,
                                            const Pose& pose,
                                            ResampleMode resample = ResampleMode::Nearest,
                                            RegisterMode mode = RegisterMode::Full) {
  const int G = acc.size();
  const int h = local.height(), w = local.width();
  const double cs = local.cell_size;
  // The footprint must fit on the canvas: check the local map's corners.
  {
    double half = G / 2.0 * acc.cell_size;
    double uc, us;
    dir_of(pose.theta, uc, us);
    for (double f : {local.anchor_r * cs, (local.anchor_r - h) * cs}) {
      for (double l : {-local.anchor_c * cs, (w - local.anchor_c) * cs}) {
        double x = pose.x + f * uc + l * us;
        double y = pose.y + f * us - l * uc;
        if (std::abs(x) > half + 1e-9 || std::abs(y) > half + 1e-9)
          throw std::runtime_error("register_local: footprint exceeds canvas extent");
      }
    }
  }
  // Clip the scan to a bounding box around the local footprint.
  double rad = cs * (std::max(local.anchor_r, h - local.anchor_r) +
                     std::max(local.anchor_c, w - local.anchor_c) + 2);
  int R_lo = std::max(0, static_cast<int>(std::floor(acc.anchor_r - (pose.y + rad) / acc.cell_size)) - 1);
  int R_hi = std::min(G, static_cast<int>(std::ceil(acc.anchor_r - (pose.y - rad) / acc.cell_size)) + 1);
  int C_lo = std::max(0, static_cast<int>(std::floor(acc.anchor_c + (pose.x - rad) / acc.cell_size)) - 1);
  int C_hi = std::min(G, static_cast<int>(std::ceil(acc.anchor_c + (pose.x + rad) / acc.cell_size)) + 1);
  for (int R = R_lo; R < R_hi; ++R) {
    for (int C = C_lo; C < C_hi; ++C) {
      double f, l;
      detail::canvas_to_local(acc, pose, R, C, f, l);
      // Continuous local raster coordinates of that point.
      double rr = local.anchor_r - 0.5 - f / cs;
      double cc = local.anchor_c - 0.5 + l / cs;
      float occ, seen;
      if (resample == ResampleMode::Nearest) {
        int r = static_cast<int>(std::lround(rr));
        int c = static_cast<int>(std::lround(cc));
        if (r < 0 || r >= h || c < 0 || c >= w) continue;
        occ = local.cells.at3(r, c, 0);
        seen = local.cells.at3(r, c, 1);
      } else {
        int r0 = static_cast<int>(std::floor(rr));
        int c0 = static_cast<int>(std::floor(cc));
        if (r0 < -1 || r0 >= h || c0 < -1 || c0 >= w) continue;
        double ar = rr - r0, ac = cc - c0;
        auto sample = [&](int r, int c, int ch) -> double {
          if (r < 0 || r >= h || c < 0 || c >= w) return 0.0;
          return local.cells.at3(r, c, ch);
        };
        occ = static_cast<float>(
            (1 - ar) * ((1 - ac) * sample(r0, c0, 0) + ac * sample(r0, c0 + 1, 0)) +
            ar * ((1 - ac) * sample(r0 + 1, c0, 0) + ac * sample(r0 + 1, c0 + 1, 0)));
        seen = static_cast<float>(
            (1 - ar) * ((1 - ac) * sample(r0, c0, 1) + ac * sample(r0, c0 + 1, 1)) +
            ar * ((1 - ac) * sample(r0 + 1, c0, 1) + ac * sample(r0 + 1, c0 + 1, 1)));
      }
      if (mode == RegisterMode::SeenOnly && seen < 0.5f) continue;
      acc.sum.at2(R, C) += occ;
      ++acc.count[static_cast<size_t>(R) * G + C];
    }
  }
  return acc;
}

// Normalizes sums by counts and thresholds at `threshold`; exact ties are
// declared occupied (conservative for navigation). Cells never updated stay
// unseen.
inline BinaryMap finalize_shared(const SharedMapAccumulator& acc, double threshold = 0.5) {
  const int G = acc.size();
  BinaryMap out;
  out.cells = TensorF({G, G, 2});
  out.cell_size = acc.cell_size;
  out.anchor_r = acc.anchor_r;
  out.anchor_c = acc.anchor_c;
  for (int R = 0; R < G; ++R) {
    for (int C = 0; C < G; ++C) {
      int32_t n = acc.count[static_cast<size_t>(R) * G + C];
      if (n == 0) continue;
      double mean = acc.sum.at2(R, C) / n;
      out.cells.at3(R, C, 0) = mean >= threshold ? 1.0f : 0.0f;
      out.cells.at3(R, C, 1) = 1.0f;
    }
  }
  return out;
}

}  // namespace chat2map::geo
