#pragma once

#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "chat2map/core/optim.hpp"
#include "chat2map/core/serial.hpp"
#include "chat2map/policy/ppo.hpp"
#include "chat2map/policy/rollout.hpp"

namespace chat2map::policy {

struct TrainPolicyConfig {
  int updates = 20;
  int episodes_per_update = 4;
  int n_workers = 1;
  uint64_t seed = 0;
  PpoConfig ppo;
  std::filesystem::path mapper_checkpoint;  // must hold a phase-2 mapper
  std::filesystem::path out_dir;            // empty: no logs/checkpoints
};

struct TrainPolicyResult {
  std::vector<double> mean_rewards;   // per update
  std::vector<double> mean_q;         // per update, final-map quality
  std::vector<PpoDiagnostics> diags;  // per update
};

// Loads the frozen mapper weights into `mapper` and verifies the checkpoint
// was produced by phase-2 mapper training. Returns the loaded metadata.
template <typename T>
io::json load_frozen_mapper(mapper::SceneMapper<T>& mapper,
                            const std::filesystem::path& ckpt) {
  auto params = mapper.params();
  io::json meta = io::load_checkpoint(ckpt, params);
  if (meta.value("kind", std::string()) != "mapper")
    throw std::runtime_error("load_frozen_mapper: checkpoint is not a mapper checkpoint");
  if (meta.value("phase", 0) != 2)
    throw std::runtime_error(
        "load_frozen_mapper: policy training requires a phase-2 mapper checkpoint");
  mapper.training = false;
  return meta;
}

// PPO training loop against the frozen mapper. The mapper parameters are
// hashed before and after; any drift aborts the run.
template <typename T>
TrainPolicyResult train_policy(PolicyNet<T>& pol, mapper::SceneMapper<T>& frozen_mapper,
                               const RolloutEnv& env, const TrainPolicyConfig& cfg) {
  auto mparams = frozen_mapper.params();
  std::string hash_before = io::param_hash(mparams);

  auto params = pol.params();
  nn::Adam<T> opt(params, static_cast<T>(cfg.ppo.lr));

  const bool persist = !cfg.out_dir.empty();
  std::optional<io::JsonlWriter> log;
  if (persist) {
    std::filesystem::create_directories(cfg.out_dir);
    log.emplace(cfg.out_dir / "policy_reward.jsonl");
  }

  TrainPolicyResult res;
  for (int u = 0; u < cfg.updates; ++u) {
    uint64_t roll_seed = Rng::derive(cfg.seed, 9000 + static_cast<uint64_t>(u));
    auto roll = collect_rollouts(env, pol, frozen_mapper, cfg.episodes_per_update,
                                 cfg.n_workers, roll_seed);
    auto diag = ppo_update(pol, opt, roll, cfg.ppo);
    double q = 0, cap = 0;
    for (double v : roll.episode_q) q += v;
    for (int c : roll.episode_captured) cap += c;
    q /= static_cast<double>(roll.episode_q.size());
    cap /= static_cast<double>(roll.episode_captured.size());
    res.mean_rewards.push_back(diag.mean_reward);
    res.mean_q.push_back(q);
    res.diags.push_back(diag);
    if (persist)
      log->row({{"update", u},
                {"mean_reward", diag.mean_reward},
                {"mean_q", q},
                {"mean_captured", cap},
                {"action_loss", diag.action_loss},
                {"value_loss", diag.value_loss},
                {"entropy", diag.entropy},
                {"clip_fraction", diag.clip_fraction}});
  }

  std::string hash_after = io::param_hash(mparams);
  if (hash_before != hash_after)
    throw std::runtime_error("train_policy: frozen mapper parameters changed during training");

  if (persist)
    io::save_checkpoint(cfg.out_dir / "policy_final", params,
                        {{"kind", "policy"},
                         {"updates", cfg.updates},
                         {"seed", cfg.seed},
                         {"mapper_hash", hash_before}});
  return res;
}

}  // namespace chat2map::policy
