#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "chat2map/core/rng.hpp"
#include "chat2map/geo/pose.hpp"
#include "chat2map/world/scene.hpp"

namespace chat2map::world {

using geo::Pose;

enum class EgoAction : uint8_t { MoveForward = 0, TurnLeft = 1, TurnRight = 2 };

inline const char* to_string(EgoAction a) {
  switch (a) {
    case EgoAction::MoveForward: return "MoveForward";
    case EgoAction::TurnLeft: return "TurnLeft";
    default: return "TurnRight";
  }
}

struct EpisodeConfig {
  int T = 16;                      // conversation steps
  int B = 2;                       // visual budget (used by policies, recorded here)
  double dist_min = 1.0;           // inter-ego distance range, meters
  double dist_max = 3.0;
  std::array<double, 3> speak_probs = {1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0};  // ego1 / ego2 / both
  uint64_t seed = 0;

  bool valid() const {
    double s = speak_probs[0] + speak_probs[1] + speak_probs[2];
    return T >= 1 && B >= 1 && dist_min > 0 && dist_max >= dist_min &&
           std::abs(s - 1.0) < 1e-9;
  }
};

struct TrajectoryStep {
  Pose pose_1, pose_2;
  // Actions that produced these poses from the previous step; step 1 carries
  // the placement itself, its action fields are unused defaults.
  EgoAction action_1 = EgoAction::TurnLeft;
  EgoAction action_2 = EgoAction::TurnLeft;
  bool speak_1 = false, speak_2 = false;
};

struct EpisodeRecord {
  std::string scene_id;
  EpisodeConfig config;
  uint64_t seed = 0;
  std::vector<TrajectoryStep> steps;
  std::array<int, 2> speaker_ids = {0, 1};  // voice profiles, assigned downstream
};

namespace detail {

// Egos stand on whole-meter lattice nodes. A node is standable when all four
// cells sharing it are free (gives rays leaving the node a free start cell in
// every direction).
inline bool standable(const Scene& s, int x_m, int y_m) {
  int col = static_cast<int>(std::lround(x_m / s.cell_size));
  int row = static_cast<int>(std::lround(y_m / s.cell_size));
  return !s.occupied(row, col) && !s.occupied(row - 1, col) && !s.occupied(row, col - 1) &&
         !s.occupied(row - 1, col - 1);
}

inline bool standable_pose(const Scene& s, const Pose& p) {
  return standable(s, static_cast<int>(std::lround(p.x)), static_cast<int>(std::lround(p.y)));
}

// Whole-meter forward move collision check. The path runs along a gridline;
// both cells flanking every point of the segment must be free.
inline bool move_free(const Scene& s, const Pose& from, const Pose& to) {
  if (!standable_pose(s, from) || !standable_pose(s, to)) return false;
  int cells_per_m = static_cast<int>(std::lround(1.0 / s.cell_size));
  int x0 = static_cast<int>(std::lround(from.x)) * cells_per_m;
  int y0 = static_cast<int>(std::lround(from.y)) * cells_per_m;
  int x1 = static_cast<int>(std::lround(to.x)) * cells_per_m;
  int y1 = static_cast<int>(std::lround(to.y)) * cells_per_m;
  if (y0 == y1) {
    int lo = std::min(x0, x1), hi = std::max(x0, x1);
    for (int c = lo; c < hi; ++c)
      if (s.occupied(y0, c) || s.occupied(y0 - 1, c)) return false;
  } else {
    int lo = std::min(y0, y1), hi = std::max(y0, y1);
    for (int r = lo; r < hi; ++r)
      if (s.occupied(r, x0) || s.occupied(r, x0 - 1)) return false;
  }
  return true;
}

inline Pose apply_action(const Pose& p, EgoAction a) {
  switch (a) {
    case EgoAction::MoveForward: {
      double c, s;
      geo::dir_of(p.theta, c, s);
      return {p.x + c, p.y + s, p.theta};
    }
    case EgoAction::TurnLeft:
      return {p.x, p.y, geo::wrap_angle(p.theta + 90.0)};
    default:
      return {p.x, p.y, geo::wrap_angle(p.theta - 90.0)};
  }
}

inline double ego_dist(const Pose& a, const Pose& b) {
  return std::hypot(a.x - b.x, a.y - b.y);
}

}  // namespace detail

inline Pose apply_action(const Pose& p, EgoAction a) { return detail::apply_action(p, a); }

// Samples a T-step two-ego episode: random lattice placement within the
// distance band, then per-step joint actions rejection-sampled for collisions
// and the distance constraint, speaking pattern i.i.d. over
// {only ego1, only ego2, both}.
inline EpisodeRecord generate_episode(const Scene& scene, const EpisodeConfig& config,
                                      uint64_t seed) {
  if (!config.valid()) throw std::runtime_error("generate_episode: invalid config");
  Rng rng(Rng::derive(seed, 2000));
  const int retry_limit = 400;

  // Candidate lattice nodes.
  std::vector<std::pair<int, int>> nodes;
  int h_m = static_cast<int>(std::floor(scene.height_m() + 1e-9));
  int w_m = static_cast<int>(std::floor(scene.width_m() + 1e-9));
  for (int y = 1; y < h_m; ++y)
    for (int x = 1; x < w_m; ++x)
      if (detail::standable(scene, x, y)) nodes.emplace_back(x, y);
  if (nodes.size() < 2) throw std::runtime_error("generate_episode: no standable placement");

  const double headings[4] = {0.0, 90.0, 180.0, -90.0};
  Pose p1, p2;
  bool placed = false;
  for (int attempt = 0; attempt < retry_limit && !placed; ++attempt) {
    auto [x1, y1] = nodes[static_cast<size_t>(rng.uniform_int(0, static_cast<int>(nodes.size()) - 1))];
    auto [x2, y2] = nodes[static_cast<size_t>(rng.uniform_int(0, static_cast<int>(nodes.size()) - 1))];
    double d = std::hypot(double(x1 - x2), double(y1 - y2));
    if (d < config.dist_min || d > config.dist_max) continue;
    p1 = {double(x1), double(y1), headings[rng.uniform_int(0, 3)]};
    p2 = {double(x2), double(y2), headings[rng.uniform_int(0, 3)]};
    placed = true;
  }
  if (!placed)
    throw std::runtime_error("generate_episode: no placement satisfying distance range");

  EpisodeRecord rec;
  rec.scene_id = scene.id;
  rec.config = config;
  rec.seed = seed;
  rec.steps.reserve(static_cast<size_t>(config.T));

  auto draw_speaking = [&](TrajectoryStep& st) {
    double u = rng.uniform();
    if (u < config.speak_probs[0]) {
      st.speak_1 = true;
    } else if (u < config.speak_probs[0] + config.speak_probs[1]) {
      st.speak_2 = true;
    } else {
      st.speak_1 = st.speak_2 = true;
    }
  };

  TrajectoryStep first;
  first.pose_1 = p1;
  first.pose_2 = p2;
  draw_speaking(first);
  rec.steps.push_back(first);

  for (int t = 1; t < config.T; ++t) {
    const Pose& c1 = rec.steps.back().pose_1;
    const Pose& c2 = rec.steps.back().pose_2;
    TrajectoryStep st;
    bool ok = false;
    for (int attempt = 0; attempt < retry_limit && !ok; ++attempt) {
      EgoAction a1 = static_cast<EgoAction>(rng.uniform_int(0, 2));
      EgoAction a2 = static_cast<EgoAction>(rng.uniform_int(0, 2));
      Pose n1 = detail::apply_action(c1, a1);
      Pose n2 = detail::apply_action(c2, a2);
      if (a1 == EgoAction::MoveForward && !detail::move_free(scene, c1, n1)) continue;
      if (a2 == EgoAction::MoveForward && !detail::move_free(scene, c2, n2)) continue;
      double d = detail::ego_dist(n1, n2);
      if (d < config.dist_min || d > config.dist_max) continue;
      st.pose_1 = n1;
      st.pose_2 = n2;
      st.action_1 = a1;
      st.action_2 = a2;
      ok = true;
    }
    if (!ok) {
      // Turning in place never collides and never changes the distance.
      st.pose_1 = detail::apply_action(c1, EgoAction::TurnLeft);
      st.pose_2 = detail::apply_action(c2, EgoAction::TurnLeft);
      st.action_1 = EgoAction::TurnLeft;
      st.action_2 = EgoAction::TurnLeft;
    }
    draw_speaking(st);
    rec.steps.push_back(st);
  }
  return rec;
}

}  // namespace chat2map::world
