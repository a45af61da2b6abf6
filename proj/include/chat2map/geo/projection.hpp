#pragma once

#include <cmath>
#include <limits>

#include "chat2map/geo/local_map.hpp"
#include "chat2map/world/render.hpp"

namespace chat2map::geo {

// Projects a planar depth scan into an egocentric two-channel occupancy map.
// Each ray is traversed through the local grid (same exact traversal as the
// renderer): cells strictly before the hit become (free, seen), the hit cell
// becomes (occupied, seen), everything else stays (0, unseen). The ego sits on
// the node at the bottom-left corner of cell (H, W/2), i.e. on the bottom edge.
inline LocalMap depth_to_local_occupancy(const world::DepthScan& scan, int H = 31, int W = 31,
                                         double cell_size = 0.1) {
  LocalMap m = LocalMap::make(H, W, H, W / 2, cell_size);
  const double tol = 1e-9;
  for (int k = 0; k < scan.n_rays; ++k) {
    double range = scan.ranges[static_cast<size_t>(k)];
    bool hit = std::isfinite(range);
    double t_stop = hit ? range : scan.max_range;
    // Ray direction in (forward, rightward) coordinates from the anchor node.
    double df, ds;
    geo::unit_dir(scan.offset_deg(k), df, ds);
    double dl = -ds;  // positive angular offset points left
    // Grid traversal over local cells; a = forward cell index from the ego,
    // b = rightward cell index. Same stepping rules as the world raycast,
    // including the rightward origin nudge and the diagonal step on ties.
    // The nudged origin sits at (f, l) = (0, +kRayNudge), inside cell b = 0.
    int a = 0, b = 0;
    const double inf = std::numeric_limits<double>::infinity();
    double t_max_f = cell_size / df;  // df > 0 across a < 180 degree FoV
    double t_df = cell_size / df;
    double t_max_l = inf, t_dl = inf;
    if (dl != 0) {
      t_max_l = ((dl > 0 ? 1 : 0) * cell_size - world::kRayNudge) / dl;
      t_dl = cell_size / std::abs(dl);
    }
    const double tie_tol = 1e-12;
    // Sliver traversals (the boundary rays clip cell corners by ~kRayNudge)
    // are not marked seen; a hit in such a cell is still recorded.
    const double sliver_tol = 1e-5;
    double t_entry = 0.0;
    while (true) {
      int r = m.anchor_r - 1 - a;
      int c = m.anchor_c + b;
      bool inside = r >= 0 && r < H && c >= 0 && c < W;
      if (t_entry > t_stop + tol) break;
      if (inside) {
        if (hit && std::abs(t_entry - range) <= tol) {
          m.cells.at3(r, c, 0) = 1.0f;
          m.cells.at3(r, c, 1) = 1.0f;
          break;
        }
        double seg_end = std::min(std::min(t_max_f, t_max_l), t_stop);
        if (t_entry < t_stop - tol && seg_end - t_entry > sliver_tol) {
          m.cells.at3(r, c, 1) = 1.0f;  // free and seen: occupancy stays 0
        }
      }
      if (std::abs(t_max_f - t_max_l) <= tie_tol) {
        t_entry = t_max_f;
        ++a;
        b += dl > 0 ? 1 : -1;
        t_max_f += t_df;
        t_max_l += t_dl;
      } else if (t_max_f < t_max_l) {
        t_entry = t_max_f;
        ++a;
        t_max_f += t_df;
      } else {
        t_entry = t_max_l;
        b += dl > 0 ? 1 : -1;
        t_max_l += t_dl;
      }
      if (t_entry > scan.max_range + tol) break;
    }
  }
  return m;
}

}  // namespace chat2map::geo
