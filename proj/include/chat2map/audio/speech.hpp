#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "chat2map/core/rng.hpp"
#include "chat2map/core/tensor.hpp"

namespace chat2map::audio {

// Multi-channel audio buffer. samples has shape [C, N]; mono signals use C=1.
struct Waveform {
  TensorF samples;
  int sample_rate = 16000;

  int channels() const { return samples.dim(0); }
  int length() const { return samples.dim(1); }
  double duration() const { return static_cast<double>(length()) / sample_rate; }

  static Waveform make(int C, int N, int sample_rate) {
    Waveform w;
    w.samples = TensorF({C, N});
    w.sample_rate = sample_rate;
    return w;
  }
};

// Synthetic speech-like source: a harmonic stack with a random-walk pitch
// contour and slow amplitude modulation. Parameters derive deterministically
// from the speaker id.
struct SpeakerProfile {
  int64_t speaker_id = 0;
  double base_pitch = 140.0;   // Hz
  double pitch_jitter = 6.0;   // Hz, random-walk scale
  int harmonic_count = 8;
  double am_rate = 4.0;        // Hz

  static SpeakerProfile from_id(int64_t id) {
    Rng rng(Rng::derive(static_cast<uint64_t>(id), 4000));
    SpeakerProfile p;
    p.speaker_id = id;
    p.base_pitch = rng.uniform(85.0, 255.0);
    p.pitch_jitter = rng.uniform(2.0, 10.0);
    p.harmonic_count = rng.uniform_int(5, 12);
    p.am_rate = rng.uniform(2.0, 6.0);
    return p;
  }
};

// Amplitude RMS measured in 16-bit integer units (full scale 32768).
inline double rms_16bit(const Waveform& w) {
  double acc = 0;
  for (float v : w.samples.data) acc += static_cast<double>(v) * v;
  return std::sqrt(acc / static_cast<double>(w.samples.data.size())) * 32768.0;
}

inline Waveform synth_speech(const SpeakerProfile& profile, double duration, uint64_t seed,
                             int sample_rate = 16000) {
  if (duration <= 0) throw std::invalid_argument("synth_speech: duration must be positive");
  const int N = static_cast<int>(std::lround(duration * sample_rate));
  Waveform w = Waveform::make(1, N, sample_rate);
  Rng rng(Rng::derive(seed, 4100 + static_cast<uint64_t>(profile.speaker_id)));

  const double nyq_guard = 0.45 * sample_rate;
  const double pitch_hi = profile.base_pitch + 3.0 * profile.pitch_jitter;
  std::vector<double> harm_phase(static_cast<size_t>(profile.harmonic_count));
  std::vector<double> harm_amp(static_cast<size_t>(profile.harmonic_count));
  for (int h = 0; h < profile.harmonic_count; ++h) {
    harm_phase[static_cast<size_t>(h)] = rng.uniform(0.0, 2.0 * M_PI);
    // 1/h rolloff; harmonics that could alias are silenced outright.
    harm_amp[static_cast<size_t>(h)] = (h + 1) * pitch_hi < nyq_guard ? 1.0 / (h + 1) : 0.0;
  }
  const double am_phase = rng.uniform(0.0, 2.0 * M_PI);

  const int block = std::max(1, sample_rate / 100);  // pitch update every ~10 ms
  double f0 = profile.base_pitch;
  double phase = 0.0;
  for (int n = 0; n < N; ++n) {
    if (n % block == 0) {
      f0 += rng.normal(0.0, profile.pitch_jitter * 0.5);
      f0 = std::clamp(f0, profile.base_pitch - 3.0 * profile.pitch_jitter, pitch_hi);
    }
    phase += 2.0 * M_PI * f0 / sample_rate;
    double t = static_cast<double>(n) / sample_rate;
    double am = 0.6 + 0.4 * std::sin(2.0 * M_PI * profile.am_rate * t + am_phase);
    double v = 0.0;
    for (int h = 0; h < profile.harmonic_count; ++h)
      v += harm_amp[static_cast<size_t>(h)] *
           std::sin((h + 1) * phase + harm_phase[static_cast<size_t>(h)]);
    w.samples.data[static_cast<size_t>(n)] = static_cast<float>(am * v);
  }
  return w;
}

// Scales the waveform so its RMS, in 16-bit integer units, equals target_rms.
inline Waveform rms_normalize(const Waveform& w, double target_rms = 400.0) {
  double r = rms_16bit(w);
  if (r == 0.0) throw std::invalid_argument("rms_normalize: all-zero waveform");
  Waveform out = w;
  float scale = static_cast<float>(target_rms / r);
  for (float& v : out.samples.data) v *= scale;
  return out;
}

}  // namespace chat2map::audio
