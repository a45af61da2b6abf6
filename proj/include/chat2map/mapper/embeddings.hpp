#pragma once

#include <cmath>
#include <string>

#include "chat2map/core/nn.hpp"
#include "chat2map/geo/pose.hpp"
#include "chat2map/mapper/config.hpp"

namespace chat2map::mapper {

using nn::NoGradGuard;
using nn::Var;

// 8-dimensional sinusoidal expansion of a normalized pose: the components
// (x, y, theta, 2*theta) each contribute a (sin, cos) pair. Positions use
// angular frequency 2*pi/256 (one cycle per 256 m, far beyond any episode
// reach); angles use the angle itself in radians, with the doubled harmonic
// sharpening orientation contrast. The zero pose maps to (0,1,0,1,0,1,0,1).
template <typename T>
Tensor<T> sin8_pose(const geo::Pose& p) {
  const double wxy = 2.0 * M_PI / 256.0;
  const double th = p.theta * M_PI / 180.0;
  Tensor<T> out({1, 8});
  double comps[4] = {wxy * p.x, wxy * p.y, th, 2.0 * th};
  for (int i = 0; i < 4; ++i) {
    out[2 * i] = static_cast<T>(std::sin(comps[i]));
    out[2 * i + 1] = static_cast<T>(std::cos(comps[i]));
  }
  return out;
}

// 8-dimensional sinusoidal expansion of a raster index: (sin, cos) pairs at
// periods 16, 8, 4, 2 tokens. The period-16 pair alone separates all indices
// of a 4x4 grid.
template <typename T>
Tensor<T> sin8_index(int k) {
  Tensor<T> out({1, 8});
  for (int i = 0; i < 4; ++i) {
    double w = 2.0 * M_PI / (16 >> i);
    out[2 * i] = static_cast<T>(std::sin(w * k));
    out[2 * i + 1] = static_cast<T>(std::cos(w * k));
  }
  return out;
}

// p_hat = linear_I(sin8(pose)) broadcast over the grid + linear_II(sin8(idx))
// per raster position; returned as [grid*grid, d_model] token rows.
template <typename T>
struct PoseEmbedding {
  nn::Linear<T> lin_pose, lin_index;
  Tensor<T> index_feats;  // [grid*grid, 8], constant

  PoseEmbedding() = default;
  PoseEmbedding(const std::string& name, const MapperConfig& cfg, Rng& rng)
      : lin_pose(name + ".pose", 8, cfg.d_model, rng, nn::Init::KaimingUniform),
        lin_index(name + ".index", 8, cfg.d_model, rng, nn::Init::KaimingUniform) {
    const int n = cfg.tokens_per_entry();
    index_feats = Tensor<T>({n, 8});
    for (int k = 0; k < n; ++k) {
      Tensor<T> row = sin8_index<T>(k);
      for (int j = 0; j < 8; ++j) index_feats.at2(k, j) = row[j];
    }
  }

  Var<T> forward(const geo::Pose& pose) const {
    Var<T> p = lin_pose.forward(Var<T>(sin8_pose<T>(pose)));      // [1, d]
    Var<T> idx = lin_index.forward(Var<T>(index_feats));          // [n, d]
    return add_rows(idx, reshape(p, {p.val().dim(1)}));
  }
  void collect(nn::ParamList<T>& pl) {
    lin_pose.collect(pl);
    lin_index.collect(pl);
  }
};

enum class Modality { Visual = 0, Speech = 1, SpeechOther = 2 };

}  // namespace chat2map::mapper
