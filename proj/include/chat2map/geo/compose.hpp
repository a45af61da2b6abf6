#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "chat2map/geo/pose.hpp"
#include "chat2map/geo/shared_map.hpp"
#include "chat2map/world/render.hpp"

namespace chat2map::geo {

// Smallest even canvas size (cells) that contains H x W local maps registered
// at every pose, with poses expressed relative to `ref`.
inline int canvas_size_for(const std::vector<Pose>& poses, const Pose& ref, int H, int W,
                           double cell_size = 0.1) {
  double reach = 0.0;
  for (const auto& p : poses) {
    Pose n = normalize_pose(p, ref);
    reach = std::max(reach, std::max(std::abs(n.x), std::abs(n.y)));
  }
  double local_rad = cell_size * (std::max(H, W) + 2);
  int G = 2 * static_cast<int>(std::ceil((reach + local_rad) / cell_size)) + 4;
  return G + (G % 2);
}

// Registers the ground-truth local crop for every pose (relative to `ref`) and
// finalizes: the evaluation target over the union of local footprints.
inline BinaryMap compose_gt_shared(const world::Scene& scene, const std::vector<Pose>& poses,
                                   const Pose& ref, int H = 64, int W = 64, int G = 0) {
  if (G == 0) G = canvas_size_for(poses, ref, H, W, scene.cell_size);
  auto acc = SharedMapAccumulator::make(G, scene.cell_size);
  for (const auto& p : poses) {
    LocalMap local = world::gt_local_map(scene, p, H, W);
    register_local(acc, local, normalize_pose(p, ref), ResampleMode::Nearest,
                   RegisterMode::Full);
  }
  return finalize_shared(acc);
}

}  // namespace chat2map::geo
