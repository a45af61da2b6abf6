#pragma once

#include <cmath>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "chat2map/core/optim.hpp"
#include "chat2map/core/serial.hpp"
#include "chat2map/eval/baselines.hpp"
#include "chat2map/mapper/data.hpp"
#include "chat2map/mapper/mapper.hpp"

namespace chat2map::mapper {

using nn::NoGradGuard;
using nn::Var;

struct TrainMapperConfig {
  int phase = 1;           // 1: all frames; 2: random frame drops under budget B
  int updates = 400;
  int batch_size = 2;
  double lr = 1e-4;
  int budget_B = 2;
  uint64_t seed = 0;
  int log_every = 10;
  int checkpoint_every = 0;              // 0: only final
  std::filesystem::path out_dir;         // empty: no logs/checkpoints written
};

struct TrainMapperResult {
  std::vector<double> losses;  // per update
  double initial_loss = 0, final_loss = 0;
};

// Uniformly samples a capture mask that keeps both step-1 frames plus at most
// B of the later (step, ego) frames.
inline eval::CaptureMask random_budget_mask(int T, int B, Rng& rng) {
  eval::CaptureMask mask;
  mask.capture.assign(static_cast<size_t>(T), {0, 0});
  mask.capture[0] = {1, 1};
  std::vector<std::pair<int, int>> later;
  for (int t = 1; t < T; ++t) {
    later.push_back({t, 0});
    later.push_back({t, 1});
  }
  for (int k = 0; k < B && !later.empty(); ++k) {
    int pick = rng.uniform_int(0, static_cast<int>(later.size()) - 1);
    auto [t, i] = later[static_cast<size_t>(pick)];
    mask.capture[static_cast<size_t>(t)][static_cast<size_t>(i)] = 1;
    later.erase(later.begin() + pick);
  }
  return mask;
}

template <typename T>
TrainMapperResult train_mapper(SceneMapper<T>& mapper, std::vector<MapperExample<T>>& dataset,
                               const TrainMapperConfig& cfg) {
  if (dataset.empty()) throw std::invalid_argument("train_mapper: empty dataset");
  if (cfg.phase != 1 && cfg.phase != 2) throw std::invalid_argument("train_mapper: bad phase");
  auto params = mapper.params();
  nn::Adam<T> opt(params, static_cast<T>(cfg.lr));
  Rng rng(Rng::derive(cfg.seed, 7000 + static_cast<uint64_t>(cfg.phase)));
  mapper.training = true;
  mapper.drop_rng = Rng(Rng::derive(cfg.seed, 7100));

  const bool persist = !cfg.out_dir.empty();
  std::optional<io::JsonlWriter> log;
  if (persist) {
    std::filesystem::create_directories(cfg.out_dir);
    log.emplace(cfg.out_dir / ("mapper_phase" + std::to_string(cfg.phase) + "_loss.jsonl"));
  }

  TrainMapperResult res;
  for (int u = 0; u < cfg.updates; ++u) {
    params.zero_grad();
    double batch_loss = 0;
    Var<T> total;
    for (int b = 0; b < cfg.batch_size; ++b) {
      auto& ex = dataset[static_cast<size_t>(rng.uniform_int(
          0, static_cast<int>(dataset.size()) - 1))];
      std::vector<geo::Pose> poses;
      for (const auto& step : ex.inputs.steps) {
        poses.push_back(step[0].pose);
        poses.push_back(step[1].pose);
      }
      MapperInputs<T> in = ex.inputs;
      if (cfg.phase == 2)
        in = apply_capture_mask(ex.inputs,
                                random_budget_mask(ex.inputs.t(), cfg.budget_B, rng));
      auto memory = mapper.build_memory(in);
      auto probs = mapper.predict_probs(memory, poses);
      Var<T> loss = mapper_loss(probs, ex.targets);
      total = b == 0 ? loss : add(total, loss);
    }
    total = mul_scalar(total, static_cast<T>(1.0 / cfg.batch_size));
    batch_loss = static_cast<double>(total.val()[0]);
    if (!std::isfinite(batch_loss))
      throw std::runtime_error("train_mapper: loss diverged (non-finite)");
    total.backward();
    opt.step();

    res.losses.push_back(batch_loss);
    if (u == 0) res.initial_loss = batch_loss;
    if (persist && (u % cfg.log_every == 0 || u == cfg.updates - 1))
      log->row({{"update", u}, {"phase", cfg.phase}, {"loss", batch_loss}});
    if (persist && cfg.checkpoint_every > 0 && (u + 1) % cfg.checkpoint_every == 0)
      io::save_checkpoint(cfg.out_dir / ("ckpt_" + std::to_string(u + 1)), params,
                              {{"kind", "mapper"},
                               {"phase", cfg.phase},
                               {"update", u + 1},
                               {"seed", cfg.seed},
                               {"loss", batch_loss}});
  }
  res.final_loss = res.losses.back();
  mapper.training = false;
  if (persist)
    io::save_checkpoint(cfg.out_dir / "ckpt_final", params,
                            {{"kind", "mapper"},
                             {"phase", cfg.phase},
                             {"update", cfg.updates},
                             {"seed", cfg.seed},
                             {"loss", res.final_loss}});
  return res;
}

}  // namespace chat2map::mapper
