#pragma once

#include <string>
#include <vector>

#include "chat2map/core/nn.hpp"
#include "chat2map/mapper/config.hpp"

namespace chat2map::mapper {

using nn::NoGradGuard;
using nn::Var;

namespace detail {

struct ConvSpec {
  int k, s, p;
};

inline int conv_out(int n, const ConvSpec& c) { return (n + 2 * c.p - c.k) / c.s + 1; }

// Five-layer stride schedule that reduces (h, w) to exactly (grid, grid):
// strided 4x4 (or the speech encoder's 8x4-stride second layer) while the map
// is large, then 3x3 stride-1 refinement. At reference input sizes this
// reproduces the published schedules verbatim (e.g. 31->15->7->4->4->4 with
// padding 2 on the third layer, and 256->128->32->16->8->4 for speech).
inline std::vector<ConvSpec> plan_stack(int h, int w, int grid, bool speech) {
  std::vector<ConvSpec> plan;
  for (int l = 0; l < 5; ++l) {
    int n = std::max(h, w);
    ConvSpec c;
    if (n == grid) {
      c = {3, 1, 1};
    } else if (speech && l == 1 && conv_out(n, {8, 4, 3}) >= grid) {
      c = {8, 4, 3};
    } else if (conv_out(n, {4, 2, 1}) >= grid) {
      c = {4, 2, 1};
    } else if (conv_out(n, {4, 2, 2}) == grid) {
      c = {4, 2, 2};
    } else {
      throw std::invalid_argument("plan_stack: unsupported input size");
    }
    h = conv_out(h, c);
    w = conv_out(w, c);
    plan.push_back(c);
  }
  if (h != grid || w != grid) throw std::invalid_argument("plan_stack: does not reach grid");
  return plan;
}

}  // namespace detail

// Conv -> BatchNorm -> LeakyReLU(0.2) stack producing [1, out_ch, grid, grid].
// Channel schedule scales with the output width like the reference
// [64, 64, 128, 256, 512] does with 512.
template <typename T>
struct ConvStack {
  std::vector<nn::Conv2d<T>> convs;
  std::vector<nn::BatchNorm2d<T>> bns;
  int grid = 4;

  ConvStack() = default;
  ConvStack(const std::string& name, int in_h, int in_w, int in_ch, int out_ch, int grid_,
            bool speech, Rng& rng) {
    grid = grid_;
    auto plan = detail::plan_stack(in_h, in_w, grid_, speech);
    int chans[5] = {std::max(1, out_ch / 8), std::max(1, out_ch / 8), std::max(1, out_ch / 4),
                    std::max(1, out_ch / 2), out_ch};
    int c_in = in_ch;
    for (int l = 0; l < 5; ++l) {
      convs.emplace_back(name + ".conv" + std::to_string(l), c_in, chans[l], plan[l].k, plan[l].s,
                         plan[l].p, rng);
      bns.emplace_back(name + ".bn" + std::to_string(l), chans[l]);
      c_in = chans[l];
    }
  }

  Var<T> forward(const Var<T>& x, bool training) {
    Var<T> h = x;
    for (size_t l = 0; l < convs.size(); ++l)
      h = leaky_relu(bns[l].forward(convs[l].forward(h), training), T(0.2));
    return h;  // [1, out_ch, grid, grid]
  }
  void collect(nn::ParamList<T>& pl) {
    for (auto& c : convs) c.collect(pl);
    for (auto& b : bns) b.collect(pl);
  }
};

// Visual encoder: separate CNNs for the RGB frame and the egocentric local
// map, concatenated channel-wise to a [1, d_model, grid, grid] feature.
template <typename T>
struct VisualEncoder {
  ConvStack<T> rgb_stack, map_stack;

  VisualEncoder() = default;
  VisualEncoder(const std::string& name, const MapperConfig& cfg, Rng& rng)
      : rgb_stack(name + ".rgb", cfg.rgb_hw, cfg.rgb_hw, 3, cfg.d_model / 2, cfg.grid, false,
                  rng),
        map_stack(name + ".map", cfg.map_hw, cfg.map_hw, 2, cfg.d_model / 2, cfg.grid, false,
                  rng) {}

  // rgb: [1,3,H,W], map: [1,2,h,w] -> [1, d_model, grid, grid]
  Var<T> forward(const Var<T>& rgb, const Var<T>& map, bool training) {
    std::vector<Var<T>> parts = {rgb_stack.forward(rgb, training),
                                 map_stack.forward(map, training)};
    return concat(parts, 1);
  }
  void collect(nn::ParamList<T>& pl) {
    rgb_stack.collect(pl);
    map_stack.collect(pl);
  }
};

template <typename T>
struct SpeechEncoder {
  ConvStack<T> stack;

  SpeechEncoder() = default;
  SpeechEncoder(const std::string& name, const MapperConfig& cfg, Rng& rng)
      : stack(name, cfg.spec_bins, cfg.spec_frames, cfg.spec_channels, cfg.d_model, cfg.grid,
              true, rng) {}

  // spec: [1, C, F, frames] -> [1, d_model, grid, grid]
  Var<T> forward(const Var<T>& spec, bool training) { return stack.forward(spec, training); }
  void collect(nn::ParamList<T>& pl) { stack.collect(pl); }
};

// Transpose-conv decoder U: [1, d, grid, grid] -> [1, 2, 16*grid, 16*grid]
// probabilities. Channel schedule [d/2, d/4, d/8, d/16, 2] mirrors the
// reference [512, 256, 128, 64, 2] at d=1024; the first four layers are
// 4x4 stride-2 with BatchNorm + ReLU, the last is 3x3 stride-1 into the
// sigmoid (no normalization after the output layer).
template <typename T>
struct Upsampler {
  std::vector<nn::ConvT2d<T>> convs;
  std::vector<nn::BatchNorm2d<T>> bns;

  Upsampler() = default;
  Upsampler(const std::string& name, const MapperConfig& cfg, Rng& rng) {
    int d = cfg.d_model;
    int chans[5] = {std::max(1, d / 2), std::max(1, d / 4), std::max(1, d / 8),
                    std::max(1, d / 16), 2};
    int c_in = d;
    for (int l = 0; l < 5; ++l) {
      int k = l < 4 ? 4 : 3, s = l < 4 ? 2 : 1;
      convs.emplace_back(name + ".convt" + std::to_string(l), c_in, chans[l], k, s, 1, rng);
      if (l < 4) bns.emplace_back(name + ".bn" + std::to_string(l), chans[l]);
      c_in = chans[l];
    }
  }

  Var<T> forward(const Var<T>& x, bool training) {
    Var<T> h = x;
    for (int l = 0; l < 4; ++l)
      h = relu(bns[static_cast<size_t>(l)].forward(convs[static_cast<size_t>(l)].forward(h),
                                                   training));
    return sigmoid(convs[4].forward(h));
  }
  void collect(nn::ParamList<T>& pl) {
    for (auto& c : convs) c.collect(pl);
    for (auto& b : bns) b.collect(pl);
  }
};

}  // namespace chat2map::mapper
