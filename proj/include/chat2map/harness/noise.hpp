#pragma once

#include <algorithm>
#include <cmath>
#include <limits>

#include "chat2map/core/rng.hpp"
#include "chat2map/mapper/data.hpp"
#include "chat2map/world/episode.hpp"

namespace chat2map::harness {

// Sensor-noise settings. Pose noise is a displacement whose magnitude follows
// a truncated Gaussian (location mean 0.025 m, std 0.001 m; orientation mean
// 0.9 deg, std 0.057 deg; both truncated at 2 sigma) in a random direction.
// Depth noise is distance-proportional (std 0.01 * d^2); RGB noise is additive
// N(0, 0.2); audio noise is white at a fixed SNR.
struct NoiseSpec {
  bool enabled = false;
  double rgb_std = 0.2;
  double depth_coeff = 0.01;       // std = depth_coeff * d^2
  double pose_loc_mean = 0.025;    // meters
  double pose_loc_std = 0.001;
  double pose_rot_mean = 0.9;      // degrees
  double pose_rot_std = 0.057;
  double trunc_sigma = 2.0;
  double audio_snr_db = 40.0;

  static NoiseSpec off() { return NoiseSpec{}; }
  static NoiseSpec on() {
    NoiseSpec s;
    s.enabled = true;
    return s;
  }
};

// Gaussian truncated to mean +- trunc_sigma * std by rejection.
inline double truncated_gaussian(Rng& rng, double mean, double std, double trunc_sigma) {
  for (;;) {
    double x = rng.normal(mean, std);
    if (std::abs(x - mean) <= trunc_sigma * std) return x;
  }
}

// Pose-noised copy of an episode; the clean record is untouched. Both egos'
// poses at every step get an independent displacement and heading offset.
inline world::EpisodeRecord inject_noise(const world::EpisodeRecord& episode,
                                         const NoiseSpec& spec, uint64_t seed) {
  world::EpisodeRecord out = episode;
  if (!spec.enabled) return out;
  Rng rng(Rng::derive(seed, 9800));
  auto perturb = [&](geo::Pose& p) {
    double mag = truncated_gaussian(rng, spec.pose_loc_mean, spec.pose_loc_std, spec.trunc_sigma);
    double dir = rng.uniform(0.0, 2.0 * M_PI);
    double rot = truncated_gaussian(rng, spec.pose_rot_mean, spec.pose_rot_std, spec.trunc_sigma);
    p.x += mag * std::cos(dir);
    p.y += mag * std::sin(dir);
    p.theta = geo::wrap_angle(p.theta + (rng.bernoulli(0.5) ? rot : -rot));
  };
  for (auto& st : out.steps) {
    perturb(st.pose_1);
    perturb(st.pose_2);
  }
  return out;
}

// Adds white Gaussian noise scaled so the per-waveform SNR is exactly snr_db.
// Silent waveforms are left untouched.
inline void add_awgn(audio::Waveform& w, double snr_db, Rng& rng) {
  double p_sig = 0;
  for (float v : w.samples.data) p_sig += static_cast<double>(v) * v;
  long n = w.samples.numel();
  if (n == 0 || p_sig == 0) return;
  p_sig /= static_cast<double>(n);
  std::vector<double> noise(static_cast<size_t>(n));
  double p_noise = 0;
  for (auto& v : noise) {
    v = rng.normal();
    p_noise += v * v;
  }
  p_noise /= static_cast<double>(n);
  // Rescale the drawn noise so the realized (not just expected) SNR is exact.
  double target = p_sig / std::pow(10.0, snr_db / 10.0);
  double scale = std::sqrt(target / p_noise);
  for (long i = 0; i < n; ++i) w.samples[i] += static_cast<float>(noise[static_cast<size_t>(i)] * scale);
}

// Rendering hooks applying rgb/depth/audio noise; the returned object must
// outlive the make_mapper_example call it is passed to. The Rng lives in the
// hook closures and is shared across sensors in render order.
inline mapper::RenderHooks make_noise_hooks(const NoiseSpec& spec, uint64_t seed,
                                            std::shared_ptr<Rng>* keep_alive = nullptr) {
  mapper::RenderHooks hooks;
  if (!spec.enabled) return hooks;
  auto rng = std::make_shared<Rng>(Rng::derive(seed, 9801));
  if (keep_alive) *keep_alive = rng;
  hooks.depth = [rng, spec](world::DepthScan& scan) {
    for (double& d : scan.ranges) {
      if (!std::isfinite(d)) continue;
      d = std::clamp(d + rng->normal(0.0, spec.depth_coeff * d * d), 0.0, scan.max_range);
    }
  };
  hooks.rgb = [rng, spec](world::RgbProxy& rgb) {
    for (float& v : rgb.pixels.data)
      v = std::clamp(v + static_cast<float>(rng->normal(0.0, spec.rgb_std)), 0.0f, 1.0f);
  };
  hooks.heard = [rng, spec](audio::Waveform& w) { add_awgn(w, spec.audio_snr_db, *rng); };
  return hooks;
}

}  // namespace chat2map::harness
