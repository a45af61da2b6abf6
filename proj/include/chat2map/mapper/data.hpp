#pragma once

#include <array>
#include <functional>
#include <vector>

#include "chat2map/audio/rir.hpp"
#include "chat2map/audio/speech.hpp"
#include "chat2map/audio/stft.hpp"
#include "chat2map/eval/baselines.hpp"
#include "chat2map/geo/projection.hpp"
#include "chat2map/mapper/mapper.hpp"
#include "chat2map/world/episode.hpp"
#include "chat2map/world/render.hpp"

namespace chat2map::mapper {

// Desk-scale audio pipeline settings: 1 s utterances at 4 kHz, 127-point FFT
// (64 bins x 65 frames), 4 microphone channels. The reference preset (3 s at
// 16 kHz, FFT 511 -> 256 x 257 x C) remains available through audio::StftParams
// defaults but is too slow to train against on one core.
struct AudioConfig {
  int sample_rate = 4000;
  double duration = 1.0;
  int channels = 4;
  int rir_order = 2;
  audio::StftParams stft = desk_stft();

  static audio::StftParams desk_stft() {
    audio::StftParams p;
    p.window_ms = 31.75;  // 127 samples at 4 kHz
    p.hop_ms = 15.0;      // 60 samples
    p.fft_size = 127;     // 64 bins
    p.frame_limit = 65;
    return p;
  }
};

namespace detail {

template <typename T>
Tensor<T> rgb_to_nchw(const world::RgbProxy& rgb) {
  const int H = rgb.pixels.dim(0), W = rgb.pixels.dim(1);
  Tensor<T> out({1, 3, H, W});
  for (int c = 0; c < 3; ++c)
    for (int r = 0; r < H; ++r)
      for (int w = 0; w < W; ++w) out.at4(0, c, r, w) = static_cast<T>(rgb.pixels.at3(r, w, c));
  return out;
}

template <typename T>
Tensor<T> local_to_nchw(const geo::LocalMap& m) {
  const int H = m.cells.dim(0), W = m.cells.dim(1);
  Tensor<T> out({1, 2, H, W});
  for (int c = 0; c < 2; ++c)
    for (int r = 0; r < H; ++r)
      for (int w = 0; w < W; ++w) out.at4(0, c, r, w) = static_cast<T>(m.cells.at3(r, w, c));
  return out;
}

template <typename T>
Tensor<T> spec_to_nchw(const audio::SpeechSpectrogram& s) {
  const int F = s.freq_bins(), TT = s.frames(), C = s.channels();
  Tensor<T> out({1, C, F, TT});
  for (int c = 0; c < C; ++c)
    for (int f = 0; f < F; ++f)
      for (int t = 0; t < TT; ++t) out.at4(0, c, f, t) = static_cast<T>(s.magnitude.at3(f, t, c));
  return out;
}

}  // namespace detail

// Optional mutation hooks applied to raw sensor data during rendering, before
// conversion to tensors. Used for observation-noise injection; the default
// (all empty) renders clean observations.
struct RenderHooks {
  std::function<void(world::DepthScan&)> depth;
  std::function<void(world::RgbProxy&)> rgb;
  std::function<void(audio::Waveform&)> heard;  // per (listener, speaker) mix
};

// A fully rendered training/eval example: mapper inputs for every step plus
// the [1, 2, H, W] ground-truth local map targets in (step, ego) order.
template <typename T>
struct MapperExample {
  MapperInputs<T> inputs;
  std::vector<Tensor<T>> targets;
  geo::Pose reference;  // episode frame: ego 1's first pose
};

// Renders every observation of an episode into mapper tensors. Poses are
// normalized to ego 1's first pose. A speaking ego contributes its reverberant
// speech at its own microphones (S) and at the other ego's (S'); silence is
// an all-zero spectrogram.
template <typename T>
MapperExample<T> make_mapper_example(const world::Scene& scene,
                                     const world::EpisodeRecord& episode,
                                     const MapperConfig& mcfg, const AudioConfig& acfg = {},
                                     const RenderHooks* hooks = nullptr) {
  MapperExample<T> ex;
  ex.reference = episode.steps[0].pose_1;
  audio::RirConfig rir_cfg;
  rir_cfg.sample_rate = acfg.sample_rate;

  const int T_steps = static_cast<int>(episode.steps.size());
  Tensor<T> zero_spec({1, acfg.channels, mcfg.spec_bins, mcfg.spec_frames});
  for (int t = 0; t < T_steps; ++t) {
    const auto& st = episode.steps[static_cast<size_t>(t)];
    std::array<geo::Pose, 2> poses = {st.pose_1, st.pose_2};
    std::array<bool, 2> speaks = {st.speak_1, st.speak_2};

    // Source waveforms for the egos speaking this step.
    std::array<audio::Waveform, 2> waves;
    for (int i = 0; i < 2; ++i)
      if (speaks[static_cast<size_t>(i)]) {
        auto prof = audio::SpeakerProfile::from_id(episode.speaker_ids[static_cast<size_t>(i)]);
        waves[static_cast<size_t>(i)] = audio::rms_normalize(audio::synth_speech(
            prof, acfg.duration, Rng::derive(episode.seed, 6000 + static_cast<uint64_t>(t)),
            acfg.sample_rate));
      }

    std::array<FrameInputs<T>, 2> frames;
    for (int i = 0; i < 2; ++i) {
      FrameInputs<T>& f = frames[static_cast<size_t>(i)];
      const geo::Pose& p = poses[static_cast<size_t>(i)];
      f.pose = geo::normalize_pose(p, ex.reference);
      f.pose_other = geo::normalize_pose(poses[static_cast<size_t>(1 - i)], ex.reference);

      auto scan = world::render_depth(scene, p);
      if (hooks && hooks->depth) hooks->depth(scan);
      f.map = detail::local_to_nchw<T>(geo::depth_to_local_occupancy(scan));
      auto rgb = world::render_rgb_proxy(scene, p);
      if (hooks && hooks->rgb) hooks->rgb(rgb);
      f.rgb = detail::rgb_to_nchw<T>(rgb);

      auto heard = [&](int speaker) {
        auto rir = audio::simulate_rir(scene, poses[static_cast<size_t>(speaker)], p,
                                       acfg.rir_order, acfg.channels, rir_cfg);
        auto w = audio::spatialize(waves[static_cast<size_t>(speaker)], rir);
        if (hooks && hooks->heard) hooks->heard(w);
        return detail::spec_to_nchw<T>(audio::spectrogram(w, acfg.stft));
      };
      f.speech = speaks[static_cast<size_t>(i)] ? heard(i) : zero_spec;
      f.speech_other = speaks[static_cast<size_t>(1 - i)] ? heard(1 - i) : zero_spec;

      auto gt = world::gt_local_map(scene, p, mcfg.out_hw(), mcfg.out_hw());
      ex.targets.push_back(detail::local_to_nchw<T>(gt));
    }
    ex.inputs.steps.push_back(std::move(frames));
  }
  return ex;
}

// Zeroes the visual tensors of every frame the capture mask skipped; audio and
// poses are always available.
template <typename T>
MapperInputs<T> apply_capture_mask(const MapperInputs<T>& inputs, const eval::CaptureMask& mask) {
  MapperInputs<T> out = inputs;
  for (size_t t = 0; t < out.steps.size(); ++t)
    for (int i = 0; i < 2; ++i)
      if (t < mask.capture.size() && !mask.capture[t][static_cast<size_t>(i)]) {
        FrameInputs<T>& f = out.steps[t][static_cast<size_t>(i)];
        f.rgb = Tensor<T>(f.rgb.shape);
        f.map = Tensor<T>(f.map.shape);
      }
  return out;
}

}  // namespace chat2map::mapper
