#pragma once

#include <cmath>
#include <map>
#include <string>
#include <vector>

#include "chat2map/eval/baselines.hpp"
#include "chat2map/eval/cost.hpp"
#include "chat2map/eval/metrics.hpp"
#include "chat2map/harness/dataset.hpp"
#include "chat2map/harness/noise.hpp"
#include "chat2map/policy/rollout.hpp"

namespace chat2map::harness {

// Renders one evaluation example, applying observation noise when enabled.
template <typename T>
mapper::MapperExample<T> render_example(const RunConfig& cfg, const world::Scene& scene,
                                        const world::EpisodeRecord& episode, uint64_t seed) {
  world::EpisodeRecord used = inject_noise(episode, cfg.noise, seed);
  std::shared_ptr<Rng> keep;
  auto hooks = make_noise_hooks(cfg.noise, seed, &keep);
  return mapper::make_mapper_example<T>(scene, used, cfg.mapper_cfg, cfg.audio,
                                        cfg.noise.enabled ? &hooks : nullptr);
}

// "w/o shared mapping" ablation: each ego gets a memory over its own entries
// only; each ego's poses are predicted from its own memory and both outputs
// are registered onto one canvas.
template <typename T>
geo::BinaryMap predict_shared_map_split(mapper::SceneMapper<T>& m,
                                        const mapper::MapperInputs<T>& inputs, int G) {
  nn::NoGradGuard ng;
  auto memory = m.build_memory(inputs);
  auto acc = geo::SharedMapAccumulator::make(G, 0.1);
  for (int ego = 0; ego < 2; ++ego) {
    mapper::MapperMemory<T> own;
    for (const auto& e : memory.entries)
      if (e.ego == ego) own.entries.push_back(e);
    std::vector<geo::Pose> poses;
    for (const auto& st : inputs.steps) poses.push_back(st[static_cast<size_t>(ego)].pose);
    auto ests = m.predict_local_maps(own, poses);
    for (const auto& est : ests)
      geo::register_local(acc, mapper::estimate_to_local(est), est.pose,
                          geo::ResampleMode::Nearest, geo::RegisterMode::Full);
  }
  return geo::finalize_shared(acc);
}

struct PassiveRow {
  int episode = 0;
  std::string kind;
  eval::MapMetrics metrics;
};

struct PassiveResult {
  std::vector<PassiveRow> rows;
  std::map<std::string, double> mean_f1;  // kind -> mean f1_mean
};

// Passive evaluation (every frame available): full mapper, five input/memory
// ablations, and the two baseline mappers, per episode and aggregated.
template <typename T>
PassiveResult run_passive_eval(const RunConfig& cfg, const Dataset& data,
                               mapper::SceneMapper<T>& m, bool with_ablations = true,
                               io::JsonlWriter* log = nullptr) {
  PassiveResult res;
  std::map<std::string, double> sums;
  std::map<std::string, int> counts;
  const int H = m.cfg.out_hw();

  for (size_t e = 0; e < data.episodes.size(); ++e) {
    const auto& episode = data.episodes[e];
    const auto& scene = data.scene_for(episode);
    auto ex = render_example<T>(cfg, scene, episode, Rng::derive(cfg.seed, 100 + e));

    std::vector<geo::Pose> world_poses, norm_poses;
    for (const auto& st : episode.steps) {
      world_poses.push_back(st.pose_1);
      world_poses.push_back(st.pose_2);
    }
    for (const auto& st : ex.inputs.steps) {
      norm_poses.push_back(st[0].pose);
      norm_poses.push_back(st[1].pose);
    }
    int G = geo::canvas_size_for(norm_poses, geo::Pose{0, 0, 0}, H, H, scene.cell_size);
    auto gt = geo::compose_gt_shared(scene, world_poses, ex.reference, H, H, G);

    std::vector<std::pair<std::string, geo::BinaryMap>> preds;
    preds.emplace_back("full", mapper::predict_shared_map(m, ex.inputs, G));
    if (with_ablations) {
      eval::CaptureMask none;
      none.capture.assign(ex.inputs.steps.size(), {0, 0});
      preds.emplace_back("wo_vision",
                         mapper::predict_shared_map(m, mapper::apply_capture_mask(ex.inputs, none), G));
      auto wo_audio = ex.inputs;
      auto wo_other = ex.inputs;
      for (auto& st : wo_audio.steps)
        for (auto& f : st) {
          f.speech = Tensor<T>(f.speech.shape);
          f.speech_other = Tensor<T>(f.speech_other.shape);
        }
      for (auto& st : wo_other.steps)
        for (auto& f : st) f.speech_other = Tensor<T>(f.speech_other.shape);
      preds.emplace_back("wo_audio", mapper::predict_shared_map(m, wo_audio, G));
      preds.emplace_back("wo_other_speech", mapper::predict_shared_map(m, wo_other, G));
      preds.emplace_back("wo_shared_mapping", predict_shared_map_split(m, ex.inputs, G));
      m.use_modality_tag = false;
      preds.emplace_back("wo_modality_tag", mapper::predict_shared_map(m, ex.inputs, G));
      m.use_modality_tag = true;
    }
    // All-occupied over the same canvas/footprint as the evaluation target.
    geo::BinaryMap all_occ = gt;
    for (int r = 0; r < all_occ.cells.dim(0); ++r)
      for (int c = 0; c < all_occ.cells.dim(1); ++c)
        if (all_occ.cells.at3(r, c, 1) >= 0.5f) all_occ.cells.at3(r, c, 0) = 1.0f;
    eval::CaptureMask all;
    all.capture.assign(episode.steps.size(), {1, 1});
    preds.emplace_back("all_occupied", std::move(all_occ));
    preds.emplace_back("register_inputs", eval::register_inputs_map(scene, episode, all, G, H));

    for (auto& [kind, pred] : preds) {
      PassiveRow row;
      row.episode = static_cast<int>(e);
      row.kind = kind;
      row.metrics = eval::map_metrics(pred, gt);
      sums[kind] += row.metrics.f1_mean;
      counts[kind] += 1;
      if (log)
        log->row({{"episode", row.episode},
                  {"kind", kind},
                  {"f1_occupied", row.metrics.f1_occupied},
                  {"f1_free", row.metrics.f1_free},
                  {"f1_mean", row.metrics.f1_mean},
                  {"iou_occupied", row.metrics.iou_occupied},
                  {"iou_free", row.metrics.iou_free},
                  {"iou_mean", row.metrics.iou_mean},
                  {"support", row.metrics.support}});
      res.rows.push_back(std::move(row));
    }
  }
  for (auto& [k, s] : sums) res.mean_f1[k] = s / counts[k];
  return res;
}

// Capture decisions of the trained policy over one rendered episode,
// mirroring rollout collection (preemptive observations, budget mask).
template <typename T>
eval::CaptureMask policy_capture_mask(policy::PolicyNet<T>& pol,
                                      const mapper::MapperExample<T>& ex, int B,
                                      uint64_t seed) {
  nn::NoGradGuard ng;
  pol.training = false;
  Rng rng(Rng::derive(seed, 9700));
  eval::CaptureMask mask;
  mask.capture.assign(ex.inputs.steps.size(), {0, 0});
  mask.capture[0] = {1, 1};
  int budget_left = B;
  nn::Var<T> state = pol.initial_state();
  for (int t_idx = 1; t_idx < ex.inputs.t(); ++t_idx) {
    auto obs = policy::make_policy_obs(ex, mask, t_idx);
    auto so = pol.step(pol.encode_obs(obs), state);
    state = so.state;
    double p1 = 1.0 / (1.0 + std::exp(-static_cast<double>(so.logits.val()[0])));
    double p2 = 1.0 / (1.0 + std::exp(-static_cast<double>(so.logits.val()[1])));
    auto ma = policy::sample_action(p1, p2, t_idx + 1, budget_left, rng);
    mask.capture[static_cast<size_t>(t_idx)] = {static_cast<uint8_t>(ma.action.a_1),
                                                static_cast<uint8_t>(ma.action.a_2)};
  }
  return mask;
}

struct ActiveCurvePoint {
  double mean = 0, stddev = 0;
};

struct ActiveResult {
  // policy kind -> per-step f1_mean curve (mean +- std over seeds).
  std::map<std::string, std::vector<ActiveCurvePoint>> curves;
  std::map<std::string, eval::CostReport> costs;  // from the last seed's masks
};

// Active evaluation under budget B: per-step shared-map quality curves for
// the trained policy (optional) and the heuristic baselines, averaged over
// the given seeds.
template <typename T>
ActiveResult run_active_eval(const RunConfig& cfg, const Dataset& data,
                             mapper::SceneMapper<T>& m, policy::PolicyNet<T>* pol,
                             const std::vector<uint64_t>& seeds, io::JsonlWriter* log = nullptr) {
  ActiveResult res;
  const int H = m.cfg.out_hw();
  const int B = cfg.episode.B;
  std::vector<std::string> kinds = {"random", "greedy", "unique_pose"};
  if (pol) kinds.insert(kinds.begin(), "trained");

  const int T_steps = data.episodes.empty() ? 0 : static_cast<int>(data.episodes[0].steps.size());
  std::map<std::string, std::vector<std::vector<double>>> per_seed;  // kind -> [seed][step]

  for (uint64_t seed : seeds) {
    std::map<std::string, std::vector<double>> sums;
    std::map<std::string, int> captured_total;
    for (auto& k : kinds) sums[k].assign(static_cast<size_t>(T_steps), 0.0);

    for (size_t e = 0; e < data.episodes.size(); ++e) {
      const auto& episode = data.episodes[e];
      const auto& scene = data.scene_for(episode);
      auto ex = render_example<T>(cfg, scene, episode, Rng::derive(seed, 200 + e));

      std::vector<geo::Pose> world_poses, norm_poses;
      for (const auto& st : episode.steps) {
        world_poses.push_back(st.pose_1);
        world_poses.push_back(st.pose_2);
      }
      for (const auto& st : ex.inputs.steps) {
        norm_poses.push_back(st[0].pose);
        norm_poses.push_back(st[1].pose);
      }
      int G = geo::canvas_size_for(norm_poses, geo::Pose{0, 0, 0}, H, H, scene.cell_size);

      for (const auto& kind : kinds) {
        eval::CaptureMask mask;
        if (kind == "trained") {
          mask = policy_capture_mask(*pol, ex, B, Rng::derive(seed, 300 + e));
        } else {
          eval::BaselineKind bk = kind == "random"   ? eval::BaselineKind::Random
                                  : kind == "greedy" ? eval::BaselineKind::Greedy
                                                     : eval::BaselineKind::UniquePose;
          mask = eval::run_baseline_policy(bk, episode, B, Rng::derive(seed, 400 + e));
        }
        captured_total[kind] += mask.frames_captured();

        for (int t = 1; t <= static_cast<int>(episode.steps.size()); ++t) {
          mapper::MapperInputs<T> upto;
          upto.steps.assign(ex.inputs.steps.begin(), ex.inputs.steps.begin() + t);
          eval::CaptureMask mask_upto;
          mask_upto.capture.assign(mask.capture.begin(), mask.capture.begin() + t);
          auto pred = mapper::predict_shared_map(
              m, mapper::apply_capture_mask(upto, mask_upto), G);
          auto gt = geo::compose_gt_shared(
              scene, std::vector<geo::Pose>(world_poses.begin(), world_poses.begin() + 2 * t),
              ex.reference, H, H, G);
          double q = eval::map_quality_Q(pred, gt);
          sums[kind][static_cast<size_t>(t - 1)] += q;
          if (log)
            log->row({{"policy", kind},
                      {"seed", seed},
                      {"episode", static_cast<int>(e)},
                      {"step", t},
                      {"f1_mean", q},
                      {"captured_so_far", mask_upto.frames_captured()}});
        }
      }
    }
    for (auto& k : kinds) {
      for (auto& v : sums[k]) v /= static_cast<double>(data.episodes.size());
      per_seed[k].push_back(sums[k]);
      res.costs[k] = eval::cost_report(
          captured_total[k] / static_cast<int>(data.episodes.size()), T_steps);
    }
  }

  for (auto& k : kinds) {
    auto& curves = per_seed[k];
    std::vector<ActiveCurvePoint> curve(static_cast<size_t>(T_steps));
    for (int t = 0; t < T_steps; ++t) {
      double mean = 0, sq = 0;
      for (const auto& c : curves) mean += c[static_cast<size_t>(t)];
      mean /= static_cast<double>(curves.size());
      for (const auto& c : curves) {
        double d = c[static_cast<size_t>(t)] - mean;
        sq += d * d;
      }
      curve[static_cast<size_t>(t)] = {mean, std::sqrt(sq / curves.size())};
    }
    res.curves[k] = std::move(curve);
  }
  return res;
}

}  // namespace chat2map::harness
