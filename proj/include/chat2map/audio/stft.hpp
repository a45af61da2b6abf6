#pragma once

#include <cmath>
#include <stdexcept>
#include <vector>

#include "chat2map/audio/speech.hpp"

namespace chat2map::audio {

// Short-time Fourier transform parameters. The default preset (Hann window of
// 31.93 ms, hop 8.31 ms, FFT size 511 at 16 kHz) yields 256 frequency bins;
// frame_limit crops the time axis to a fixed length so downstream tensor
// shapes stay constant (257 frames for a 3 s utterance).
struct StftParams {
  double window_ms = 31.93;
  double hop_ms = 8.31;
  int fft_size = 511;
  int frame_limit = 257;  // 0 = keep every frame

  int freq_bins() const { return (fft_size + 2) / 2; }  // ceil((fft_size+1)/2)
  int window_samples(int sample_rate) const {
    return static_cast<int>(std::lround(window_ms * sample_rate / 1000.0));
  }
  int hop_samples(int sample_rate) const {
    return std::max(1, static_cast<int>(std::lround(hop_ms * sample_rate / 1000.0)));
  }

  // Fast preset for desk-scale runs: 1 s at 4 kHz, 63-point FFT (32 bins).
  static StftParams small_audio() {
    StftParams p;
    p.window_ms = 15.75;
    p.hop_ms = 4.0;
    p.fft_size = 63;
    p.frame_limit = 0;
    return p;
  }
};

struct SpeechSpectrogram {
  TensorF magnitude;  // [F, T, C]
  StftParams params;

  int freq_bins() const { return magnitude.dim(0); }
  int frames() const { return magnitude.dim(1); }
  int channels() const { return magnitude.dim(2); }
};

// Magnitude STFT of every channel. The DFT is evaluated directly against
// precomputed cos/sin tables; sizes here are small enough that an FFT would
// not change the runtime budget.
inline SpeechSpectrogram spectrogram(const Waveform& w, const StftParams& params = {}) {
  const int sr = w.sample_rate;
  const int win = params.window_samples(sr);
  const int hop = params.hop_samples(sr);
  const int nfft = params.fft_size;
  const int F = params.freq_bins();
  const int C = w.channels(), N = w.length();
  if (win <= 0 || hop <= 0 || nfft <= 0)
    throw std::invalid_argument("spectrogram: bad stft params");
  if (N < win) throw std::invalid_argument("spectrogram: waveform shorter than one window");
  const int wlen = std::min(win, nfft);  // windowed samples beyond nfft are dropped
  int frames = 1 + (N - win) / hop;
  if (params.frame_limit > 0) {
    if (frames < params.frame_limit)
      throw std::invalid_argument("spectrogram: waveform too short for frame_limit");
    frames = params.frame_limit;
  }

  std::vector<double> hann(static_cast<size_t>(win));
  for (int n = 0; n < win; ++n)
    hann[static_cast<size_t>(n)] = 0.5 - 0.5 * std::cos(2.0 * M_PI * n / (win - 1));

  std::vector<double> cos_t(static_cast<size_t>(F) * wlen), sin_t(static_cast<size_t>(F) * wlen);
  for (int k = 0; k < F; ++k)
    for (int n = 0; n < wlen; ++n) {
      double ang = 2.0 * M_PI * k * n / nfft;
      cos_t[static_cast<size_t>(k) * wlen + n] = std::cos(ang);
      sin_t[static_cast<size_t>(k) * wlen + n] = std::sin(ang);
    }

  SpeechSpectrogram out;
  out.magnitude = TensorF({F, frames, C});
  out.params = params;
  std::vector<double> buf(static_cast<size_t>(wlen));
  for (int c = 0; c < C; ++c) {
    for (int t = 0; t < frames; ++t) {
      const int off = t * hop;
      for (int n = 0; n < wlen; ++n)
        buf[static_cast<size_t>(n)] =
            hann[static_cast<size_t>(n)] * w.samples.at2(c, off + n);
      for (int k = 0; k < F; ++k) {
        double re = 0, im = 0;
        const double* ct = &cos_t[static_cast<size_t>(k) * wlen];
        const double* st = &sin_t[static_cast<size_t>(k) * wlen];
        for (int n = 0; n < wlen; ++n) {
          re += buf[static_cast<size_t>(n)] * ct[n];
          im -= buf[static_cast<size_t>(n)] * st[n];
        }
        out.magnitude.at3(k, t, c) = static_cast<float>(std::hypot(re, im));
      }
    }
  }
  return out;
}

}  // namespace chat2map::audio
