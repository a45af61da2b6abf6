#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <tuple>
#include <vector>

#include "chat2map/core/rng.hpp"
#include "chat2map/geo/compose.hpp"
#include "chat2map/geo/projection.hpp"
#include "chat2map/geo/shared_map.hpp"
#include "chat2map/world/episode.hpp"
#include "chat2map/world/render.hpp"

namespace chat2map::eval {

// Which visual frames were captured: capture[t][ego] for t in [0, T).
// Step 1 (t index 0) is always captured for both egos and does not count
// against the budget B, which constrains steps t >= 2.
struct CaptureMask {
  std::vector<std::array<uint8_t, 2>> capture;

  int budget_used() const {
    int n = 0;
    for (size_t t = 1; t < capture.size(); ++t) n += capture[t][0] + capture[t][1];
    return n;
  }
  int frames_captured() const {
    int n = 0;
    for (const auto& c : capture) n += c[0] + c[1];
    return n;
  }
};

enum class BaselineKind { Random, Greedy, UniquePose };

// Heuristic visual-sampling baselines over a fixed trajectory.
inline CaptureMask run_baseline_policy(BaselineKind kind, const world::EpisodeRecord& episode,
                                       int B, uint64_t seed) {
  const int T = static_cast<int>(episode.steps.size());
  Rng rng(Rng::derive(seed, 3000));
  CaptureMask mask;
  mask.capture.assign(static_cast<size_t>(T), {0, 0});
  mask.capture[0] = {1, 1};
  int left = B;

  auto pose_key = [](const geo::Pose& p) {
    // Poses live on the 1 m lattice with 90 degree headings.
    long x = std::lround(p.x * 1000), y = std::lround(p.y * 1000);
    long a = std::lround(geo::wrap_angle(p.theta));
    return std::tuple<long, long, long>(x, y, a);
  };

  switch (kind) {
    case BaselineKind::Random:
      for (int t = 1; t < T && left > 0; ++t) {
        double u = rng.uniform();
        int want1 = 0, want2 = 0;
        if (u < 0.25) {
          // skip both
        } else if (u < 0.5) {
          want1 = 1;
        } else if (u < 0.75) {
          want2 = 1;
        } else {
          want1 = want2 = 1;
        }
        if (want1 + want2 > left) {
          // Budget allows one frame: keep a random one of the two egos.
          if (rng.bernoulli(0.5)) want2 = 0; else want1 = 0;
        }
        mask.capture[static_cast<size_t>(t)] = {static_cast<uint8_t>(want1),
                                                static_cast<uint8_t>(want2)};
        left -= want1 + want2;
      }
      break;
    case BaselineKind::Greedy:
      for (int t = 1; t < T && left > 0; ++t) {
        if (left >= 2) {
          mask.capture[static_cast<size_t>(t)] = {1, 1};
          left -= 2;
        } else {
          // Odd remainder: one frame for a randomly chosen ego.
          if (rng.bernoulli(0.5))
            mask.capture[static_cast<size_t>(t)] = {1, 0};
          else
            mask.capture[static_cast<size_t>(t)] = {0, 1};
          left -= 1;
        }
      }
      break;
    case BaselineKind::UniquePose: {
      std::vector<std::tuple<long, long, long>> ledger;
      auto seen = [&](const geo::Pose& p) {
        auto k = pose_key(p);
        for (const auto& e : ledger)
          if (e == k) return true;
        ledger.push_back(k);
        return false;
      };
      seen(episode.steps[0].pose_1);
      seen(episode.steps[0].pose_2);
      for (int t = 1; t < T; ++t) {
        bool novel1 = !seen(episode.steps[static_cast<size_t>(t)].pose_1);
        bool novel2 = !seen(episode.steps[static_cast<size_t>(t)].pose_2);
        if (novel1 && left > 0) {
          mask.capture[static_cast<size_t>(t)][0] = 1;
          --left;
        }
        if (novel2 && left > 0) {
          mask.capture[static_cast<size_t>(t)][1] = 1;
          --left;
        }
      }
      break;
    }
  }
  return mask;
}

enum class BaselineMapper { AllOccupied, RegisterInputs };

// All-occupied: the ground-truth composite's footprint, all declared occupied.
inline geo::BinaryMap all_occupied_map(const world::Scene& scene,
                                       const world::EpisodeRecord& episode, int local_hw = 64) {
  std::vector<geo::Pose> poses;
  for (const auto& st : episode.steps) {
    poses.push_back(st.pose_1);
    poses.push_back(st.pose_2);
  }
  geo::BinaryMap m =
      geo::compose_gt_shared(scene, poses, episode.steps[0].pose_1, local_hw, local_hw);
  for (int r = 0; r < m.cells.dim(0); ++r)
    for (int c = 0; c < m.cells.dim(1); ++c)
      if (m.cells.at3(r, c, 1) >= 0.5f) m.cells.at3(r, c, 0) = 1.0f;
  return m;
}

// Register-inputs: registers the captured frames' 90-degree depth wedges onto
// the shared canvas and finalizes; no learning involved.
inline geo::BinaryMap register_inputs_map(const world::Scene& scene,
                                          const world::EpisodeRecord& episode,
                                          const CaptureMask& mask, int G = 0,
                                          int gt_local_hw = 64) {
  std::vector<geo::Pose> poses;
  for (const auto& st : episode.steps) {
    poses.push_back(st.pose_1);
    poses.push_back(st.pose_2);
  }
  geo::Pose ref = episode.steps[0].pose_1;
  if (G == 0) G = geo::canvas_size_for(poses, ref, gt_local_hw, gt_local_hw, scene.cell_size);
  auto acc = geo::SharedMapAccumulator::make(G, scene.cell_size);
  for (size_t t = 0; t < episode.steps.size(); ++t) {
    const auto& st = episode.steps[t];
    for (int ego = 0; ego < 2; ++ego) {
      if (!mask.capture[t][ego]) continue;
      const geo::Pose& p = ego == 0 ? st.pose_1 : st.pose_2;
      auto scan = world::render_depth(scene, p);
      auto wedge = geo::depth_to_local_occupancy(scan);
      geo::register_local(acc, wedge, geo::normalize_pose(p, ref), geo::ResampleMode::Nearest,
                          geo::RegisterMode::SeenOnly);
    }
  }
  return geo::finalize_shared(acc);
}

}  // namespace chat2map::eval
