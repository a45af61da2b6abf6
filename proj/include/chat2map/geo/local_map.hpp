#pragma once

#include "chat2map/core/tensor.hpp"
#include "chat2map/geo/pose.hpp"

namespace chat2map::geo {

// Egocentric top-down occupancy crop, channels-last [h, w, 2]:
//   channel 0: occupancy (1 = occupied), channel 1: seen mask (1 = observed).
// The ego faces "up" (decreasing row) and sits on the grid node at the
// bottom-left corner of cell (anchor_r, anchor_c): cell (r, c) covers forward
// offsets [(anchor_r-r-1)*cs, (anchor_r-r)*cs] and rightward offsets
// [(c-anchor_c)*cs, (c-anchor_c+1)*cs]. When the pose lies on the scene
// lattice with a 90-degree-multiple heading, local cells coincide with scene
// cells exactly.
struct LocalMap {
  TensorF cells;
  double cell_size = 0.1;
  int anchor_r = 0;
  int anchor_c = 0;

  int height() const { return static_cast<int>(cells.shape[0]); }
  int width() const { return static_cast<int>(cells.shape[1]); }

  static LocalMap make(int h, int w, int anchor_r, int anchor_c, double cell_size = 0.1) {
    LocalMap m;
    m.cells = TensorF({h, w, 2});
    m.cell_size = cell_size;
    m.anchor_r = anchor_r;
    m.anchor_c = anchor_c;
    return m;
  }

  // World position of the centre of cell (r, c) when the map is anchored at
  // `pose` (the pose sits on the anchor node).
  Pose cell_center_world(const Pose& pose, int r, int c) const {
    double f = (anchor_r - r - 0.5) * cell_size;
    double l = (c - anchor_c + 0.5) * cell_size;
    double uc, us;
    dir_of(pose.theta, uc, us);
    // right = forward rotated -90 degrees.
    return {pose.x + f * uc + l * us, pose.y + f * us - l * uc, pose.theta};
  }
};

}  // namespace chat2map::geo
