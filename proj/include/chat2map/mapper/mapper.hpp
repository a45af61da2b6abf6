#pragma once

#include <array>
#include <stdexcept>
#include <string>
#include <vector>

#include "chat2map/core/nn.hpp"
#include "chat2map/geo/compose.hpp"
#include "chat2map/geo/local_map.hpp"
#include "chat2map/geo/shared_map.hpp"
#include "chat2map/mapper/embeddings.hpp"
#include "chat2map/mapper/encoders.hpp"

namespace chat2map::mapper {

using nn::NoGradGuard;
using nn::Var;

// One ego's observations at one step, already normalized to the episode
// reference frame and shaped for the encoders. A skipped visual frame is
// all-zero rgb/map tensors: zeros are the "frame absent" representation, not
// a special case.
template <typename T>
struct FrameInputs {
  Tensor<T> rgb;           // [1, 3, rgb_hw, rgb_hw]
  Tensor<T> map;           // [1, 2, map_hw, map_hw]
  Tensor<T> speech;        // [1, C, F, frames]   own speech S
  Tensor<T> speech_other;  // [1, C, F, frames]   other ego's speech S'
  geo::Pose pose;          // P, normalized
  geo::Pose pose_other;    // speaker pose for S', normalized (absolute frame)
};

template <typename T>
struct MapperInputs {
  std::vector<std::array<FrameInputs<T>, 2>> steps;  // [t][ego]

  int t() const { return static_cast<int>(steps.size()); }
};

template <typename T>
struct MemoryEntry {
  int ego = 0, step = 0;
  Modality modality = Modality::Visual;
  Var<T> tokens;  // [grid*grid, d_model]
};

template <typename T>
struct MapperMemory {
  std::vector<MemoryEntry<T>> entries;

  Var<T> concat_tokens() const {
    if (entries.empty()) throw std::invalid_argument("MapperMemory: empty memory");
    std::vector<Var<T>> parts;
    parts.reserve(entries.size());
    for (const auto& e : entries) parts.push_back(e.tokens);
    return concat(parts, 0);
  }
};

struct LocalMapEstimate {
  TensorF probs;  // [H, W, 2] in (0,1)
  geo::Pose pose;
};

// The shared scene mapper: visual/speech encoders -> fused multi-modal memory
// -> transformer encoder-decoder -> per-pose local occupancy probabilities.
template <typename T>
struct SceneMapper {
  MapperConfig cfg;
  VisualEncoder<T> visual;
  SpeechEncoder<T> speech_self, speech_other;
  PoseEmbedding<T> pose_embed;
  nn::Embedding<T> modality_embed;  // 3 rows: V, S, S'
  std::vector<nn::TransformerEncoderLayer<T>> enc_layers;
  std::vector<nn::TransformerDecoderLayer<T>> dec_layers;
  Upsampler<T> upsampler;
  bool training = false;
  bool use_modality_tag = true;  // ablation hook: drop m-hat from memory entries
  Rng drop_rng{0};

  explicit SceneMapper(const MapperConfig& config) : cfg(config) {
    cfg.validate();
    Rng rng(Rng::derive(cfg.seed, 5000));
    visual = VisualEncoder<T>("visual", cfg, rng);
    speech_self = SpeechEncoder<T>("speech_self", cfg, rng);
    speech_other = SpeechEncoder<T>("speech_other", cfg, rng);
    pose_embed = PoseEmbedding<T>("pose_embed", cfg, rng);
    modality_embed = nn::Embedding<T>("modality", 3, cfg.d_model, rng);
    for (int l = 0; l < cfg.n_enc_layers; ++l)
      enc_layers.emplace_back("enc" + std::to_string(l), cfg.d_model, cfg.n_heads, cfg.d_ff,
                              static_cast<T>(cfg.dropout), rng);
    for (int l = 0; l < cfg.n_dec_layers; ++l)
      dec_layers.emplace_back("dec" + std::to_string(l), cfg.d_model, cfg.n_heads, cfg.d_ff,
                              static_cast<T>(cfg.dropout), rng);
    upsampler = Upsampler<T>("upsampler", cfg, rng);
    drop_rng = Rng(Rng::derive(cfg.seed, 5001));
  }

  nn::ParamList<T> params() {
    nn::ParamList<T> pl;
    visual.collect(pl);
    speech_self.collect(pl);
    speech_other.collect(pl);
    pose_embed.collect(pl);
    modality_embed.collect(pl);
    for (auto& l : enc_layers) l.collect(pl);
    for (auto& l : dec_layers) l.collect(pl);
    upsampler.collect(pl);
    return pl;
  }

  // [1, d, g, g] feature -> [g*g, d] token rows (raster order).
  Var<T> feature_tokens(const Var<T>& feat) const {
    int g = cfg.grid, d = cfg.d_model;
    return transpose(reshape(feat, {d, g * g}));
  }

  Var<T> fused_entry(const Var<T>& feat, const geo::Pose& pose, Modality kind) {
    Var<T> tokens = add(feature_tokens(feat), pose_embed.forward(pose));
    if (!use_modality_tag) return tokens;
    Var<T> m = modality_embed.forward(static_cast<int>(kind));  // [1, d]
    return add_rows(tokens, reshape(m, {cfg.d_model}));
  }

  MapperMemory<T> build_memory(const MapperInputs<T>& inputs) {
    MapperMemory<T> mem;
    for (int j = 0; j < inputs.t(); ++j) {
      for (int i = 0; i < 2; ++i) {
        const FrameInputs<T>& f = inputs.steps[static_cast<size_t>(j)][static_cast<size_t>(i)];
        Var<T> v = visual.forward(Var<T>(f.rgb), Var<T>(f.map), training);
        mem.entries.push_back({i, j, Modality::Visual, fused_entry(v, f.pose, Modality::Visual)});
        Var<T> s = speech_self.forward(Var<T>(f.speech), training);
        mem.entries.push_back({i, j, Modality::Speech, fused_entry(s, f.pose, Modality::Speech)});
        Var<T> so = speech_other.forward(Var<T>(f.speech_other), training);
        mem.entries.push_back(
            {i, j, Modality::SpeechOther, fused_entry(so, f.pose_other, Modality::SpeechOther)});
      }
    }
    return mem;
  }

  // Raw probability tensors [1, 2, H, W], one per query pose; differentiable.
  std::vector<Var<T>> predict_probs(const MapperMemory<T>& memory,
                                    const std::vector<geo::Pose>& query_poses) {
    Var<T> mem = memory.concat_tokens();
    for (auto& l : enc_layers) mem = l.forward(mem, training, drop_rng);
    std::vector<Var<T>> out;
    for (const auto& q : query_poses) {
      Var<T> h = pose_embed.forward(q);  // [g*g, d] decoder query
      for (auto& l : dec_layers) h = l.forward(h, mem, training, drop_rng);
      // [g*g, d] -> [1, d, g, g] -> upsample to [1, 2, H, W]
      Var<T> grid = reshape(transpose(h), {1, cfg.d_model, cfg.grid, cfg.grid});
      out.push_back(upsampler.forward(grid, training));
    }
    return out;
  }

  std::vector<LocalMapEstimate> predict_local_maps(const MapperMemory<T>& memory,
                                                   const std::vector<geo::Pose>& query_poses) {
    auto probs = predict_probs(memory, query_poses);
    std::vector<LocalMapEstimate> out;
    const int H = cfg.out_hw();
    for (size_t q = 0; q < probs.size(); ++q) {
      LocalMapEstimate est;
      est.pose = query_poses[q];
      est.probs = TensorF({H, H, 2});
      const Tensor<T>& v = probs[q].val();
      for (int r = 0; r < H; ++r)
        for (int c = 0; c < H; ++c)
          for (int ch = 0; ch < 2; ++ch)
            est.probs.at3(r, c, ch) = static_cast<float>(v.at4(0, ch, r, c));
      out.push_back(std::move(est));
    }
    return out;
  }
};

// Mean over maps of the per-map mean binary cross entropy; targets are
// [1, 2, H, W] tensors aligned with the predictions.
template <typename T>
Var<T> mapper_loss(const std::vector<Var<T>>& preds, const std::vector<Tensor<T>>& targets) {
  if (preds.size() != targets.size() || preds.empty())
    throw std::invalid_argument("mapper_loss: misaligned prediction/target lists");
  Var<T> acc = bce_mean(preds[0], targets[0]);
  for (size_t i = 1; i < preds.size(); ++i) acc = add(acc, bce_mean(preds[i], targets[i]));
  return mul_scalar(acc, static_cast<T>(1.0 / static_cast<double>(preds.size())));
}

// Predicted local estimate as a registrable local map: channel 0 holds the
// occupancy probability, channel 1 marks every cell seen (the estimate covers
// its full footprint, like the ground-truth crop).
inline geo::LocalMap estimate_to_local(const LocalMapEstimate& est, double cell_size = 0.1) {
  const int H = est.probs.dim(0), W = est.probs.dim(1);
  geo::LocalMap m = geo::LocalMap::make(H, W, H / 2, W / 2, cell_size);
  for (int r = 0; r < H; ++r)
    for (int c = 0; c < W; ++c) {
      m.cells.at3(r, c, 0) = est.probs.at3(r, c, 0);
      m.cells.at3(r, c, 1) = 1.0f;
    }
  return m;
}

// M~(t): predicts a local map per (ego, step) pose, registers all of them on
// the shared canvas, and thresholds at 0.5.
template <typename T>
geo::BinaryMap predict_shared_map(SceneMapper<T>& mapper, const MapperInputs<T>& inputs,
                                  int G = 0, double cell_size = 0.1) {
  std::vector<geo::Pose> poses;
  for (const auto& step : inputs.steps) {
    poses.push_back(step[0].pose);
    poses.push_back(step[1].pose);
  }
  NoGradGuard ng;
  auto memory = mapper.build_memory(inputs);
  auto ests = mapper.predict_local_maps(memory, poses);
  const int H = mapper.cfg.out_hw();
  if (G == 0) G = geo::canvas_size_for(poses, geo::Pose{0, 0, 0}, H, H, cell_size);
  auto acc = geo::SharedMapAccumulator::make(G, cell_size);
  for (const auto& est : ests)
    geo::register_local(acc, estimate_to_local(est, cell_size), est.pose,
                        geo::ResampleMode::Nearest, geo::RegisterMode::Full);
  return geo::finalize_shared(acc);
}

}  // namespace chat2map::mapper
