#pragma once

#include <cmath>
#include <stdexcept>
#include <vector>

#include "chat2map/audio/speech.hpp"
#include "chat2map/geo/pose.hpp"
#include "chat2map/world/scene.hpp"

namespace chat2map::audio {

inline constexpr double kSpeedOfSound = 343.0;  // m/s

struct RirConfig {
  double reflection = 0.7;   // per-bounce amplitude coefficient
  double mic_radius = 0.1;   // m, circular array around the mic pose
  int sample_rate = 16000;
};

struct RoomImpulseResponse {
  TensorF taps;  // [C, L]
  int sample_rate = 16000;
  geo::Pose source_pose;
  geo::Pose mic_pose;
  int order = 0;

  int channels() const { return taps.dim(0); }
  int length() const { return taps.dim(1); }
};

// 2D image-source model over the scene's inner wall rectangle. Interior
// obstacles attenuate nothing: the model carries room size/shape and
// source-distance cues, not full occlusion.
inline RoomImpulseResponse simulate_rir(const world::Scene& scene, const geo::Pose& source,
                                        const geo::Pose& mic, int order = 2, int C = 4,
                                        const RirConfig& cfg = {}) {
  if (order < 0 || C < 1) throw std::invalid_argument("simulate_rir: bad order or channels");
  if (scene.occupied_at(source.x, source.y))
    throw std::invalid_argument("simulate_rir: source inside occupied cell");
  if (scene.occupied_at(mic.x, mic.y))
    throw std::invalid_argument("simulate_rir: mic inside occupied cell");

  // Reflecting rectangle: the free interior between the one-cell boundary walls.
  const double cs = scene.cell_size;
  const double x0 = cs, x1 = (scene.cols - 1) * cs;
  const double y0 = cs, y1 = (scene.rows - 1) * cs;
  const double Lx = x1 - x0, Ly = y1 - y0;
  const double sx = source.x - x0, sy = source.y - y0;

  struct Img {
    double x, y;
    int bounces;
  };
  std::vector<Img> images;
  for (int i = -order; i <= order; ++i) {
    for (int j = -order; j <= order; ++j) {
      if (std::abs(i) + std::abs(j) > order) continue;
      double ix = i % 2 == 0 ? i * Lx + sx : (i + 1) * Lx - sx;
      double iy = j % 2 == 0 ? j * Ly + sy : (j + 1) * Ly - sy;
      images.push_back({x0 + ix, y0 + iy, std::abs(i) + std::abs(j)});
    }
  }

  // Microphone positions: C channels on a circle around the mic pose, channel
  // k at heading mic.theta + k * 360 / C.
  std::vector<double> mx(static_cast<size_t>(C)), my(static_cast<size_t>(C));
  for (int k = 0; k < C; ++k) {
    double ang = (mic.theta + 360.0 * k / C) * M_PI / 180.0;
    mx[static_cast<size_t>(k)] = mic.x + cfg.mic_radius * std::cos(ang);
    my[static_cast<size_t>(k)] = mic.y + cfg.mic_radius * std::sin(ang);
  }

  const int sr = cfg.sample_rate;
  int L = 1;
  for (int k = 0; k < C; ++k)
    for (const auto& im : images) {
      double d = std::hypot(im.x - mx[static_cast<size_t>(k)], im.y - my[static_cast<size_t>(k)]);
      int idx = static_cast<int>(std::lround(sr * d / kSpeedOfSound));
      L = std::max(L, idx + 1);
    }

  RoomImpulseResponse rir;
  rir.taps = TensorF({C, L});
  rir.sample_rate = sr;
  rir.source_pose = source;
  rir.mic_pose = mic;
  rir.order = order;
  for (int k = 0; k < C; ++k)
    for (const auto& im : images) {
      double d = std::hypot(im.x - mx[static_cast<size_t>(k)], im.y - my[static_cast<size_t>(k)]);
      int idx = static_cast<int>(std::lround(sr * d / kSpeedOfSound));
      double gain = std::pow(cfg.reflection, im.bounces) / std::max(d, 0.1);
      rir.taps.at2(k, idx) += static_cast<float>(gain);
    }
  return rir;
}

// Per-channel linear convolution of a mono source, truncated to the source
// length, yielding the multi-channel signal heard at the mic array.
inline Waveform spatialize(const Waveform& w, const RoomImpulseResponse& rir) {
  if (w.sample_rate != rir.sample_rate)
    throw std::invalid_argument("spatialize: sample-rate mismatch");
  if (w.channels() != 1) throw std::invalid_argument("spatialize: expected mono source");
  const int N = w.length(), C = rir.channels(), L = rir.length();
  Waveform out = Waveform::make(C, N, w.sample_rate);
  for (int c = 0; c < C; ++c) {
    for (int l = 0; l < L; ++l) {
      float g = rir.taps.at2(c, l);
      if (g == 0.0f) continue;
      for (int n = l; n < N; ++n)
        out.samples.at2(c, n) += g * w.samples.at2(0, n - l);
    }
  }
  return out;
}

}  // namespace chat2map::audio
