#pragma once

#include <cmath>
#include <vector>

#include "chat2map/core/rng.hpp"
#include "chat2map/eval/metrics.hpp"
#include "chat2map/geo/pose.hpp"
#include "chat2map/mapper/mapper.hpp"

namespace chat2map::policy {

struct ActionPair {
  int a_1 = 0, a_2 = 0;

  int captured() const { return a_1 + a_2; }
};

struct RewardTerms {
  double delta_q = 0;
  int rho = 0;
  double eta = 0.03;
  double r = 0;
};

// Turns the two Bernoulli probabilities into a budget-feasible action pair.
// Step 1 always captures both egos without consuming budget. Later steps
// sample each ego independently; if the joint draw overflows the remaining
// budget, the higher-probability ego keeps its frame (tie: ego 1).
inline ActionPair apply_budget_mask(double p1, double p2, int t, int& budget_left, Rng& rng) {
  if (t <= 1) return {1, 1};
  if (budget_left <= 0) return {0, 0};
  ActionPair a;
  a.a_1 = rng.bernoulli(p1) ? 1 : 0;
  a.a_2 = rng.bernoulli(p2) ? 1 : 0;
  if (a.captured() > budget_left) {
    if (p2 > p1)
      a.a_1 = 0;
    else
      a.a_2 = 0;
  }
  budget_left -= a.captured();
  return a;
}

inline bool pose_repeats(const geo::Pose& p, const std::vector<geo::Pose>& captured) {
  for (const auto& q : captured)
    if (std::abs(q.x - p.x) <= 1e-6 && std::abs(q.y - p.y) <= 1e-6 &&
        std::abs(geo::wrap_angle(q.theta - p.theta)) <= 1e-6)
      return true;
  return false;
}

// r(t) = dQ(t) - eta * rho(t). dQ compares the frozen mapper's shared-map
// quality with and without the step-t frames (both egos removed in the
// "without" branch); rho counts step-t captures whose exact pose was already
// captured earlier by either ego. With no capture at t the mapper calls are
// skipped and the reward is exactly zero.
template <typename T>
RewardTerms compute_reward(mapper::SceneMapper<T>& frozen_mapper,
                           const mapper::MapperInputs<T>& inputs_with,
                           const mapper::MapperInputs<T>& inputs_without,
                           const geo::BinaryMap& gt, const ActionPair& actions,
                           const std::vector<geo::Pose>& captured_before, int canvas_G,
                           double eta = 0.03) {
  RewardTerms rt;
  rt.eta = eta;
  if (actions.captured() > 0) {
    auto with = mapper::predict_shared_map(frozen_mapper, inputs_with, canvas_G);
    auto without = mapper::predict_shared_map(frozen_mapper, inputs_without, canvas_G);
    rt.delta_q = eval::map_quality_Q(with, gt) - eval::map_quality_Q(without, gt);
  }
  const auto& last = inputs_with.steps.back();
  if (actions.a_1 && pose_repeats(last[0].pose, captured_before)) ++rt.rho;
  if (actions.a_2 && pose_repeats(last[1].pose, captured_before)) ++rt.rho;
  rt.r = rt.delta_q - eta * rt.rho;
  return rt;
}

}  // namespace chat2map::policy
