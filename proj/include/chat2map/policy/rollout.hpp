#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <vector>

#include "chat2map/eval/baselines.hpp"
#include "chat2map/geo/compose.hpp"
#include "chat2map/mapper/data.hpp"
#include "chat2map/policy/net.hpp"
#include "chat2map/policy/reward.hpp"
#include "chat2map/world/episode.hpp"

namespace chat2map::policy {

template <typename T>
struct RolloutStep {
  PolicyObservation<T> obs;
  int t = 0;  // step number (2-based; step 1 is always forced)
  ActionPair action;
  std::array<uint8_t, 2> masked = {0, 0};  // overridden by budget; excluded from action loss
  std::array<double, 2> logp = {0, 0};     // behavior log-probs
  double value = 0;
  RewardTerms reward;
  bool episode_start = false;  // recurrent state resets here
};

template <typename T>
struct PolicyRollout {
  std::vector<RolloutStep<T>> steps;
  // Per-episode summaries for logging.
  std::vector<double> episode_q;       // Q of the final shared map vs gt
  std::vector<int> episode_captured;   // budget frames used
};

// The sampled action plus which egos were overridden by the budget mask.
struct MaskedAction {
  ActionPair action;
  std::array<uint8_t, 2> masked = {0, 0};
};

inline MaskedAction sample_action(double p1, double p2, int t, int& budget_left, Rng& rng) {
  MaskedAction out;
  if (t <= 1) {
    out.action = {1, 1};
    out.masked = {1, 1};
    return out;
  }
  if (budget_left <= 0) {
    out.action = {0, 0};
    out.masked = {1, 1};
    return out;
  }
  out.action.a_1 = rng.bernoulli(p1) ? 1 : 0;
  out.action.a_2 = rng.bernoulli(p2) ? 1 : 0;
  if (out.action.captured() > budget_left) {
    if (p2 > p1) {
      out.action.a_1 = 0;
      out.masked[0] = 1;
    } else {
      out.action.a_2 = 0;
      out.masked[1] = 1;
    }
  }
  budget_left -= out.action.captured();
  return out;
}

// Episode source for rollouts: scenes are drawn round-robin, episodes are
// seeded per episode index so rollout content is independent of worker count.
struct RolloutEnv {
  std::vector<world::Scene> scenes;
  world::EpisodeConfig ecfg;
  mapper::AudioConfig acfg;
  int budget_B = 2;
  // Optional episode source; defaults to generate_episode on the drawn scene.
  std::function<world::EpisodeRecord(const world::Scene&, const world::EpisodeConfig&, uint64_t)>
      episode_factory;
};

template <typename T>
PolicyObservation<T> make_policy_obs(const mapper::MapperExample<T>& ex,
                                     const eval::CaptureMask& history, int t_idx) {
  PolicyObservation<T> obs;
  for (int i = 0; i < 2; ++i) {
    auto ii = static_cast<size_t>(i);
    const auto& prev = ex.inputs.steps[static_cast<size_t>(t_idx - 1)][ii];
    bool have_prev = history.capture[static_cast<size_t>(t_idx - 1)][ii] != 0;
    obs.rgb_prev[ii] = have_prev ? prev.rgb : Tensor<T>(prev.rgb.shape);
    obs.map_prev[ii] = have_prev ? prev.map : Tensor<T>(prev.map.shape);
    for (int j = 0; j < 2; ++j) {
      const auto& fr = ex.inputs.steps[static_cast<size_t>(t_idx - 1 + j)][ii];
      obs.spec_self[ii][static_cast<size_t>(j)] = fr.speech;
      obs.spec_other[ii][static_cast<size_t>(j)] = fr.speech_other;
      obs.pose_self[ii][static_cast<size_t>(j)] = fr.pose;
      obs.pose_other[ii][static_cast<size_t>(j)] = fr.pose_other;
    }
  }
  return obs;
}

// Runs the policy through `n_episodes` freshly generated episodes against the
// frozen mapper, recording observations, actions, log-probs, values, and
// rewards. Worker partitioning is by episode index with per-episode seeds, so
// any worker count yields the same merged rollout.
template <typename T>
PolicyRollout<T> collect_rollouts(const RolloutEnv& env, PolicyNet<T>& pol,
                                  mapper::SceneMapper<T>& frozen_mapper, int n_episodes,
                                  int n_workers, uint64_t seed) {
  (void)n_workers;  // partitioning is per episode; workers change nothing
  PolicyRollout<T> out;
  nn::NoGradGuard ng;
  pol.training = false;
  frozen_mapper.training = false;
  const mapper::MapperConfig& mcfg = frozen_mapper.cfg;

  for (int e = 0; e < n_episodes; ++e) {
    uint64_t ep_seed = Rng::derive(seed, 9500 + static_cast<uint64_t>(e));
    Rng ep_rng(ep_seed);
    const world::Scene& scene =
        env.scenes[static_cast<size_t>(e) % env.scenes.size()];
    auto episode = env.episode_factory
                       ? env.episode_factory(scene, env.ecfg, Rng::derive(ep_seed, 1))
                       : world::generate_episode(scene, env.ecfg, Rng::derive(ep_seed, 1));
    auto ex = mapper::make_mapper_example<T>(scene, episode, mcfg, env.acfg);

    std::vector<geo::Pose> all_poses;
    std::vector<geo::Pose> world_poses;
    for (const auto& st : ex.inputs.steps) {
      all_poses.push_back(st[0].pose);
      all_poses.push_back(st[1].pose);
    }
    for (const auto& st : episode.steps) {
      world_poses.push_back(st.pose_1);
      world_poses.push_back(st.pose_2);
    }
    const int H = mcfg.out_hw();
    int G = geo::canvas_size_for(all_poses, geo::Pose{0, 0, 0}, H, H, scene.cell_size);

    eval::CaptureMask history;
    history.capture.assign(ex.inputs.steps.size(), {0, 0});
    history.capture[0] = {1, 1};
    std::vector<geo::Pose> captured_poses = {ex.inputs.steps[0][0].pose,
                                             ex.inputs.steps[0][1].pose};
    int budget_left = env.budget_B;
    Var<T> state = pol.initial_state();

    for (int t_idx = 1; t_idx < ex.inputs.t(); ++t_idx) {
      RolloutStep<T> step;
      step.t = t_idx + 1;
      step.episode_start = t_idx == 1;
      step.obs = make_policy_obs(ex, history, t_idx);
      Var<T> e_t = pol.encode_obs(step.obs);
      auto so = pol.step(e_t, state);
      state = so.state;
      double l1 = static_cast<double>(so.logits.val()[0]);
      double l2 = static_cast<double>(so.logits.val()[1]);
      double p1 = 1.0 / (1.0 + std::exp(-l1)), p2 = 1.0 / (1.0 + std::exp(-l2));
      auto ma = sample_action(p1, p2, step.t, budget_left, ep_rng);
      step.action = ma.action;
      step.masked = ma.masked;
      step.logp[0] = ma.action.a_1 ? std::log(std::max(p1, 1e-12))
                                   : std::log(std::max(1.0 - p1, 1e-12));
      step.logp[1] = ma.action.a_2 ? std::log(std::max(p2, 1e-12))
                                   : std::log(std::max(1.0 - p2, 1e-12));
      step.value = static_cast<double>(so.value.val()[0]);

      // Mapper inputs with / without the step-t frames.
      eval::CaptureMask with_mask = history;
      with_mask.capture[static_cast<size_t>(t_idx)] = {
          static_cast<uint8_t>(ma.action.a_1), static_cast<uint8_t>(ma.action.a_2)};
      mapper::MapperInputs<T> upto;
      upto.steps.assign(ex.inputs.steps.begin(),
                        ex.inputs.steps.begin() + t_idx + 1);
      eval::CaptureMask without_mask = with_mask;
      without_mask.capture[static_cast<size_t>(t_idx)] = {0, 0};
      auto inputs_with = mapper::apply_capture_mask(upto, with_mask);
      auto inputs_without = mapper::apply_capture_mask(upto, without_mask);
      auto gt = geo::compose_gt_shared(
          scene,
          std::vector<geo::Pose>(world_poses.begin(),
                                 world_poses.begin() + 2 * (t_idx + 1)),
          ex.reference, H, H, G);
      step.reward = compute_reward(frozen_mapper, inputs_with, inputs_without, gt, ma.action,
                                   captured_poses, G);

      history = with_mask;
      if (ma.action.a_1) captured_poses.push_back(ex.inputs.steps[static_cast<size_t>(t_idx)][0].pose);
      if (ma.action.a_2) captured_poses.push_back(ex.inputs.steps[static_cast<size_t>(t_idx)][1].pose);
      out.steps.push_back(std::move(step));
    }

    // Episode summary: final shared map quality under the chosen captures.
    auto final_inputs = mapper::apply_capture_mask(ex.inputs, history);
    auto final_map = mapper::predict_shared_map(frozen_mapper, final_inputs, G);
    auto final_gt = geo::compose_gt_shared(scene, world_poses, ex.reference, H, H, G);
    out.episode_q.push_back(eval::map_quality_Q(final_map, final_gt));
    out.episode_captured.push_back(env.budget_B - budget_left);
  }
  return out;
}

}  // namespace chat2map::policy
