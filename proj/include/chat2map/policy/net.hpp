#pragma once

#include <array>
#include <string>
#include <vector>

#include "chat2map/core/nn.hpp"
#include "chat2map/geo/pose.hpp"
#include "chat2map/mapper/encoders.hpp"

namespace chat2map::policy {

using nn::Var;

// Sampling-policy hyperparameters. Reference widths: 512-dim embeddings and
// GRU hidden units; the desk default shrinks both to 128. The 32-dim pose
// embedding is kept at reference size.
struct PolicyConfig {
  int d_embed = 128;   // reference 512
  int d_hidden = 128;  // reference 512
  int pose_dim = 32;
  double eta = 0.03;   // pose-repeat penalty weight

  // Input shapes (match the mapper's observation tensors).
  int rgb_hw = 32;
  int map_hw = 31;
  int spec_bins = 64;
  int spec_frames = 65;
  int spec_channels = 4;

  uint64_t seed = 0;

  static PolicyConfig desk() { return PolicyConfig{}; }
  static PolicyConfig micro() {
    PolicyConfig c;
    c.d_embed = 16;
    c.d_hidden = 16;
    c.pose_dim = 8;
    c.rgb_hw = 8;
    c.map_hw = 8;
    c.spec_bins = 8;
    c.spec_frames = 10;
    c.spec_channels = 2;
    return c;
  }
};

// What the policy sees before deciding at step t: each ego's previous visual
// frame (zeros when it was skipped), both egos' speech at steps t-1 and t,
// and the corresponding poses. The current visual frames appear nowhere --
// decisions are preemptive.
template <typename T>
struct PolicyObservation {
  std::array<Tensor<T>, 2> rgb_prev, map_prev;              // [ego]
  std::array<std::array<Tensor<T>, 2>, 2> spec_self;        // [ego][j: t-1, t]
  std::array<std::array<Tensor<T>, 2>, 2> spec_other;       // [ego][j]
  std::array<std::array<geo::Pose, 2>, 2> pose_self;        // [ego][j]
  std::array<std::array<geo::Pose, 2>, 2> pose_other;       // [ego][j]
};

template <typename T>
Tensor<T> pose_features(const geo::Pose& p) {
  double th = p.theta * M_PI / 180.0;
  Tensor<T> f({1, 4});
  f[0] = static_cast<T>(p.x);
  f[1] = static_cast<T>(p.y);
  f[2] = static_cast<T>(std::cos(th));
  f[3] = static_cast<T>(std::sin(th));
  return f;
}

// Actor-critic sampling policy: per-modality CNN encoders pooled to vectors,
// two-level linear fusion into e_t, a GRU over the episode, and single-layer
// actor/critic heads. Conv stacks use Kaiming-normal init; pose and fusion
// layers Kaiming-uniform; the recurrent core and heads are orthogonal with
// zero-initialized biases.
template <typename T>
struct PolicyNet {
  PolicyConfig cfg;
  mapper::ConvStack<T> rgb_enc, map_enc, speech_enc, speech_other_enc;
  nn::Linear<T> pose_enc;                       // 4 -> pose_dim
  nn::Linear<T> visual_fuse;                    // [map | rgb] -> d_embed
  nn::Linear<T> fuse_v, fuse_s, fuse_so, fuse_p;  // level-1 fusion
  nn::Linear<T> fuse_egos;                      // level-2: [e_1 | e_2] -> d_embed
  nn::GRUCell<T> gru;
  nn::Linear<T> actor, critic;
  bool training = false;

  explicit PolicyNet(const PolicyConfig& config) : cfg(config) {
    Rng rng(Rng::derive(cfg.seed, 8000));
    const int d = cfg.d_embed;
    rgb_enc = mapper::ConvStack<T>("pol.rgb", cfg.rgb_hw, cfg.rgb_hw, 3, d, cfg.rgb_hw >= 16 ? 4 : 2,
                                   false, rng);
    map_enc = mapper::ConvStack<T>("pol.map", cfg.map_hw, cfg.map_hw, 2, d, cfg.map_hw >= 16 ? 4 : 2,
                                   false, rng);
    speech_enc = mapper::ConvStack<T>("pol.speech", cfg.spec_bins, cfg.spec_frames,
                                      cfg.spec_channels, d, cfg.spec_bins >= 16 ? 4 : 2, true, rng);
    speech_other_enc = mapper::ConvStack<T>("pol.speech_other", cfg.spec_bins, cfg.spec_frames,
                                            cfg.spec_channels, d, cfg.spec_bins >= 16 ? 4 : 2,
                                            true, rng);
    pose_enc = nn::Linear<T>("pol.pose", 4, cfg.pose_dim, rng, nn::Init::KaimingUniform);
    visual_fuse = nn::Linear<T>("pol.visual_fuse", 2 * d, d, rng, nn::Init::KaimingUniform);
    fuse_v = nn::Linear<T>("pol.fuse_v", d, d, rng, nn::Init::KaimingUniform);
    fuse_s = nn::Linear<T>("pol.fuse_s", 2 * d, d, rng, nn::Init::KaimingUniform);
    fuse_so = nn::Linear<T>("pol.fuse_so", 2 * d, d, rng, nn::Init::KaimingUniform);
    fuse_p = nn::Linear<T>("pol.fuse_p", 4 * cfg.pose_dim, d, rng, nn::Init::KaimingUniform);
    fuse_egos = nn::Linear<T>("pol.fuse_egos", 2 * d, d, rng, nn::Init::KaimingUniform);
    gru = nn::GRUCell<T>("pol.gru", d, cfg.d_hidden, rng, nn::Init::Orthogonal, true);
    actor = nn::Linear<T>("pol.actor", cfg.d_hidden, 2, rng, nn::Init::Orthogonal, true);
    critic = nn::Linear<T>("pol.critic", cfg.d_hidden, 1, rng, nn::Init::Orthogonal, true);
  }

  nn::ParamList<T> params() {
    nn::ParamList<T> pl;
    rgb_enc.collect(pl);
    map_enc.collect(pl);
    speech_enc.collect(pl);
    speech_other_enc.collect(pl);
    pose_enc.collect(pl);
    visual_fuse.collect(pl);
    fuse_v.collect(pl);
    fuse_s.collect(pl);
    fuse_so.collect(pl);
    fuse_p.collect(pl);
    fuse_egos.collect(pl);
    gru.collect(pl);
    actor.collect(pl);
    critic.collect(pl);
    return pl;
  }

  Var<T> pooled(mapper::ConvStack<T>& enc, const Tensor<T>& x) {
    Var<T> f = enc.forward(Var<T>(x), training);  // [1, d, g, g]
    Var<T> p = adaptive_avg_pool2d(f, 1, 1);      // [1, d, 1, 1]
    return reshape(p, {1, cfg.d_embed});
  }

  // Multi-modal fused embedding e_t, shape [1, d_embed].
  Var<T> encode_obs(const PolicyObservation<T>& obs) {
    std::vector<Var<T>> egos;
    for (int i = 0; i < 2; ++i) {
      auto ii = static_cast<size_t>(i);
      std::vector<Var<T>> vparts = {pooled(map_enc, obs.map_prev[ii]),
                                    pooled(rgb_enc, obs.rgb_prev[ii])};
      Var<T> v = visual_fuse.forward(concat(vparts, 1));
      std::vector<Var<T>> sparts = {pooled(speech_enc, obs.spec_self[ii][0]),
                                    pooled(speech_enc, obs.spec_self[ii][1])};
      std::vector<Var<T>> soparts = {pooled(speech_other_enc, obs.spec_other[ii][0]),
                                     pooled(speech_other_enc, obs.spec_other[ii][1])};
      std::vector<Var<T>> pparts;
      for (int j = 0; j < 2; ++j) {
        pparts.push_back(pose_enc.forward(Var<T>(pose_features<T>(obs.pose_self[ii][static_cast<size_t>(j)]))));
        pparts.push_back(
            pose_enc.forward(Var<T>(pose_features<T>(obs.pose_other[ii][static_cast<size_t>(j)]))));
      }
      Var<T> e = add(add(fuse_v.forward(v), fuse_s.forward(concat(sparts, 1))),
                     add(fuse_so.forward(concat(soparts, 1)), fuse_p.forward(concat(pparts, 1))));
      egos.push_back(e);
    }
    return fuse_egos.forward(concat(egos, 1));
  }

  Var<T> initial_state() const { return Var<T>(Tensor<T>({1, cfg.d_hidden})); }

  struct StepOut {
    Var<T> logits;  // [1, 2] Bernoulli logits, one per ego
    Var<T> value;   // [1, 1]
    Var<T> state;   // [1, d_hidden]
  };

  StepOut step(const Var<T>& e_t, const Var<T>& state) {
    StepOut out;
    out.state = gru.forward(e_t, state);
    out.logits = actor.forward(out.state);
    out.value = critic.forward(out.state);
    return out;
  }
};

}  // namespace chat2map::policy
