#pragma once

#include <cstdint>
#include <stdexcept>

namespace chat2map::mapper {

// Architecture hyperparameters for the shared scene mapper. The reference
// configuration (d_model 1024, 6+6 layers, 8 heads, 2048 hidden) is preserved
// in topology; the desk default shrinks widths so the model trains on one CPU
// core in minutes. The upsampler channel schedule scales with d_model.
struct MapperConfig {
  int d_model = 128;       // reference 1024
  int n_enc_layers = 2;    // reference 6
  int n_dec_layers = 2;    // reference 6
  int n_heads = 4;         // reference 8
  int d_ff = 256;          // reference 2048 (2 * d_model)
  double dropout = 0.1;
  int grid = 4;            // encoder feature grid (grid x grid)

  // Input shapes.
  int rgb_hw = 32;         // RGB proxy H == W
  int map_hw = 31;         // egocentric local occupancy H == W
  int spec_bins = 64;      // spectrogram frequency bins F
  int spec_frames = 65;    // spectrogram time frames
  int spec_channels = 4;   // microphone channels C

  uint64_t seed = 0;

  int out_hw() const { return grid * 16; }  // 64x64 local map estimates
  int tokens_per_entry() const { return grid * grid; }

  void validate() const {
    if (d_model % n_heads != 0)
      throw std::invalid_argument("MapperConfig: d_model must be divisible by n_heads");
    if (d_model % 16 != 0)
      throw std::invalid_argument("MapperConfig: d_model must be divisible by 16");
    if (grid < 2) throw std::invalid_argument("MapperConfig: grid too small");
  }

  static MapperConfig desk() { return MapperConfig{}; }

  // Tiny variant for finite-difference gradient checks at float64.
  static MapperConfig micro() {
    MapperConfig c;
    c.d_model = 16;
    c.n_enc_layers = 1;
    c.n_dec_layers = 1;
    c.n_heads = 2;
    c.d_ff = 32;
    c.grid = 2;
    c.rgb_hw = 8;
    c.map_hw = 8;
    c.spec_bins = 8;
    c.spec_frames = 10;
    c.spec_channels = 2;
    return c;
  }
};

}  // namespace chat2map::mapper
