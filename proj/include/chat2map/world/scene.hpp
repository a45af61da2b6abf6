#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "chat2map/core/rng.hpp"

namespace chat2map::world {

// Planar indoor scene: boolean occupancy raster plus per-cell structure ids.
// Cell (r, c) covers x in [c*cs, (c+1)*cs), y in [r*cs, (r+1)*cs).
struct Scene {
  int rows = 0;
  int cols = 0;
  double cell_size = 0.1;
  std::vector<uint8_t> occ;          // rows*cols, 1 = occupied
  std::vector<int32_t> surface_ids;  // rows*cols, 0 for free cells
  uint64_t seed = 0;
  std::string id;

  double height_m() const { return rows * cell_size; }
  double width_m() const { return cols * cell_size; }

  bool in_grid(int r, int c) const { return r >= 0 && r < rows && c >= 0 && c < cols; }

  bool occupied(int r, int c) const {
    if (!in_grid(r, c)) return true;  // outside extent counts as occupied
    return occ[static_cast<size_t>(r) * cols + c] != 0;
  }

  int32_t surface(int r, int c) const {
    if (!in_grid(r, c)) return 1;
    return surface_ids[static_cast<size_t>(r) * cols + c];
  }

  void set(int r, int c, bool o, int32_t id_) {
    occ[static_cast<size_t>(r) * cols + c] = o ? 1 : 0;
    surface_ids[static_cast<size_t>(r) * cols + c] = o ? id_ : 0;
  }

  int cell_row(double y) const { return static_cast<int>(std::floor(y / cell_size)); }
  int cell_col(double x) const { return static_cast<int>(std::floor(x / cell_size)); }

  bool occupied_at(double x, double y) const { return occupied(cell_row(y), cell_col(x)); }
};

struct SceneParams {
  double min_extent_m = 8.0;   // extents snapped to whole meters
  double max_extent_m = 12.0;
  int max_interior_walls = 2;  // axis-aligned walls with door gaps
  int max_obstacles = 3;       // rectangular furniture blobs
  double cell_size = 0.1;
  int retry_limit = 20;
};

namespace detail {

inline Scene empty_room(int rows, int cols, double cs) {
  Scene s;
  s.rows = rows;
  s.cols = cols;
  s.cell_size = cs;
  s.occ.assign(static_cast<size_t>(rows) * cols, 0);
  s.surface_ids.assign(static_cast<size_t>(rows) * cols, 0);
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) {
      if (r == 0 || c == 0 || r == rows - 1 || c == cols - 1) s.set(r, c, true, 1);
    }
  }
  return s;
}

inline bool free_cells_connected(const Scene& s) {
  std::vector<uint8_t> vis(s.occ.size(), 0);
  long total_free = 0;
  int sr = -1, sc = -1;
  for (int r = 0; r < s.rows; ++r) {
    for (int c = 0; c < s.cols; ++c) {
      if (!s.occupied(r, c)) {
        ++total_free;
        if (sr < 0) { sr = r; sc = c; }
      }
    }
  }
  if (total_free == 0) return false;
  std::vector<std::pair<int, int>> stack{{sr, sc}};
  vis[static_cast<size_t>(sr) * s.cols + sc] = 1;
  long seen = 0;
  while (!stack.empty()) {
    auto [r, c] = stack.back();
    stack.pop_back();
    ++seen;
    const int dr[4] = {1, -1, 0, 0}, dc[4] = {0, 0, 1, -1};
    for (int k = 0; k < 4; ++k) {
      int nr = r + dr[k], nc = c + dc[k];
      if (s.in_grid(nr, nc) && !s.occupied(nr, nc) &&
          !vis[static_cast<size_t>(nr) * s.cols + nc]) {
        vis[static_cast<size_t>(nr) * s.cols + nc] = 1;
        stack.emplace_back(nr, nc);
      }
    }
  }
  return seen == total_free;
}

}  // namespace detail

// Procedural room: boundary walls, a few interior walls with door gaps, and
// rectangular obstacles. Retries with derived seeds until the free space is a
// single connected component.
inline Scene generate_scene(uint64_t seed, const SceneParams& params = {}) {
  for (int attempt = 0; attempt < params.retry_limit; ++attempt) {
    Rng rng(Rng::derive(seed, 1000 + static_cast<uint64_t>(attempt)));
    const double cs = params.cell_size;
    const int cells_per_m = static_cast<int>(std::lround(1.0 / cs));
    // Extents snapped to whole meters (so the 1 m action lattice tiles them)
    // unless the requested range is narrower than a meter.
    auto draw_extent = [&]() {
      double e = rng.uniform(params.min_extent_m, params.max_extent_m);
      if (params.max_extent_m - params.min_extent_m >= 1.0) e = std::round(e);
      return e;
    };
    double h_ext = draw_extent(), w_ext = draw_extent();
    int h_m = static_cast<int>(std::floor(h_ext + 1e-9));
    int w_m = static_cast<int>(std::floor(w_ext + 1e-9));
    Scene s = detail::empty_room(static_cast<int>(std::lround(h_ext / cs)),
                                 static_cast<int>(std::lround(w_ext / cs)), cs);
    s.seed = seed;
    int32_t next_id = 2;

    int n_walls = params.max_interior_walls > 0
                      ? static_cast<int>(rng.uniform_int(0, params.max_interior_walls))
                      : 0;
    for (int i = 0; i < n_walls; ++i) {
      bool vertical = rng.bernoulli(0.5);
      int span_m = vertical ? h_m : w_m;
      int cross_m = vertical ? w_m : h_m;
      if (cross_m < 4 || span_m < 4) break;
      // Wall along a whole-meter line, with a >= 2 m door gap.
      int line_m = static_cast<int>(rng.uniform_int(2, cross_m - 2));
      int door_m = static_cast<int>(rng.uniform_int(1, span_m - 3));
      int line_c = line_m * cells_per_m;
      int door_lo = door_m * cells_per_m;
      int door_hi = door_lo + 2 * cells_per_m;
      int span_cells = span_m * cells_per_m;
      for (int k = 0; k < span_cells; ++k) {
        if (k >= door_lo && k < door_hi) continue;
        if (vertical)
          s.set(k, line_c, true, next_id);
        else
          s.set(line_c, k, true, next_id);
      }
      ++next_id;
    }

    int n_obs = params.max_obstacles > 0
                    ? static_cast<int>(rng.uniform_int(0, params.max_obstacles))
                    : 0;
    for (int i = 0; i < n_obs; ++i) {
      // Rectangles 0.3-0.9 m on a side, kept off the outer walls.
      int oh = static_cast<int>(rng.uniform_int(3, 9));
      int ow = static_cast<int>(rng.uniform_int(3, 9));
      if (s.rows - 2 - oh <= 2 || s.cols - 2 - ow <= 2) continue;
      int r0 = static_cast<int>(rng.uniform_int(2, s.rows - 2 - oh));
      int c0 = static_cast<int>(rng.uniform_int(2, s.cols - 2 - ow));
      for (int r = r0; r < r0 + oh; ++r)
        for (int c = c0; c < c0 + ow; ++c) s.set(r, c, true, next_id);
      ++next_id;
    }

    if (detail::free_cells_connected(s)) return s;
  }
  throw std::runtime_error("generate_scene: connectivity not achieved within retry limit");
}

}  // namespace chat2map::world
