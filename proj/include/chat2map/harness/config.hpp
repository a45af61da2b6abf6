#pragma once

#include <filesystem>
#include <string>

#include "chat2map/core/serial.hpp"
#include "chat2map/harness/noise.hpp"
#include "chat2map/mapper/config.hpp"
#include "chat2map/mapper/data.hpp"
#include "chat2map/mapper/train.hpp"
#include "chat2map/policy/net.hpp"
#include "chat2map/policy/ppo.hpp"
#include "chat2map/world/episode.hpp"
#include "chat2map/world/scene.hpp"

namespace chat2map::harness {

using io::json;

// Everything a run needs, serializable so a persisted config reproduces the
// run exactly. Dataset counts follow the desk-scale defaults; episodes are
// stored as pose/speech records and observations are rendered lazily, so the
// episode counts are cheap.
struct RunConfig {
  // Dataset.
  world::SceneParams scene_params;
  int train_scenes = 64, val_scenes = 8, test_scenes = 8;
  int train_episodes = 2000, val_episodes = 100, test_episodes = 200;
  world::EpisodeConfig episode;
  int train_examples = 24;  // episodes actually rendered for mapper training
  int eval_episodes = 8;    // episodes evaluated per eval command

  // Models and audio.
  mapper::AudioConfig audio;
  mapper::MapperConfig mapper_cfg = mapper::MapperConfig::desk();
  policy::PolicyConfig policy_cfg = policy::PolicyConfig::desk();

  // Training.
  mapper::TrainMapperConfig mapper_train;
  int policy_updates = 20;
  int policy_episodes_per_update = 4;
  policy::PpoConfig ppo;

  NoiseSpec noise;
  uint64_t seed = 0;
  std::string data_dir;  // dataset root (CHAT2MAP_DATA overrides when set)
  std::string out_dir;   // artifacts

  static RunConfig desk() { return RunConfig{}; }

  // Small preset for smoke tests: tiny scenes, short episodes, micro-width
  // models at desk tensor shapes.
  static RunConfig micro() {
    RunConfig c;
    c.scene_params.min_extent_m = 5.0;
    c.scene_params.max_extent_m = 6.0;
    c.scene_params.max_interior_walls = 1;
    c.scene_params.max_obstacles = 1;
    c.train_scenes = 2;
    c.val_scenes = 1;
    c.test_scenes = 1;
    c.train_episodes = 4;
    c.val_episodes = 2;
    c.test_episodes = 2;
    c.episode.T = 2;
    c.train_examples = 2;
    c.eval_episodes = 2;
    c.mapper_cfg = mapper::MapperConfig::micro();
    c.mapper_cfg.rgb_hw = 32;
    c.mapper_cfg.map_hw = 31;
    c.mapper_cfg.spec_bins = 64;
    c.mapper_cfg.spec_frames = 65;
    c.mapper_cfg.spec_channels = 4;
    c.policy_cfg = policy::PolicyConfig::micro();
    c.policy_cfg.rgb_hw = 32;
    c.policy_cfg.map_hw = 31;
    c.policy_cfg.spec_bins = 64;
    c.policy_cfg.spec_frames = 65;
    c.policy_cfg.spec_channels = 4;
    c.mapper_train.updates = 4;
    c.mapper_train.batch_size = 1;
    c.policy_updates = 1;
    c.policy_episodes_per_update = 1;
    return c;
  }
};

inline json to_json(const RunConfig& c) {
  return {
      {"scene",
       {{"min_extent_m", c.scene_params.min_extent_m},
        {"max_extent_m", c.scene_params.max_extent_m},
        {"max_interior_walls", c.scene_params.max_interior_walls},
        {"max_obstacles", c.scene_params.max_obstacles},
        {"cell_size", c.scene_params.cell_size}}},
      {"dataset",
       {{"train_scenes", c.train_scenes},
        {"val_scenes", c.val_scenes},
        {"test_scenes", c.test_scenes},
        {"train_episodes", c.train_episodes},
        {"val_episodes", c.val_episodes},
        {"test_episodes", c.test_episodes},
        {"train_examples", c.train_examples},
        {"eval_episodes", c.eval_episodes}}},
      {"episode",
       {{"T", c.episode.T},
        {"B", c.episode.B},
        {"dist_min", c.episode.dist_min},
        {"dist_max", c.episode.dist_max},
        {"speak_probs", c.episode.speak_probs}}},
      {"audio",
       {{"sample_rate", c.audio.sample_rate},
        {"duration", c.audio.duration},
        {"channels", c.audio.channels},
        {"rir_order", c.audio.rir_order},
        {"window_ms", c.audio.stft.window_ms},
        {"hop_ms", c.audio.stft.hop_ms},
        {"fft_size", c.audio.stft.fft_size},
        {"frame_limit", c.audio.stft.frame_limit}}},
      {"mapper",
       {{"d_model", c.mapper_cfg.d_model},
        {"n_heads", c.mapper_cfg.n_heads},
        {"n_enc_layers", c.mapper_cfg.n_enc_layers},
        {"n_dec_layers", c.mapper_cfg.n_dec_layers},
        {"d_ff", c.mapper_cfg.d_ff},
        {"grid", c.mapper_cfg.grid},
        {"dropout", c.mapper_cfg.dropout},
        {"rgb_hw", c.mapper_cfg.rgb_hw},
        {"map_hw", c.mapper_cfg.map_hw},
        {"spec_bins", c.mapper_cfg.spec_bins},
        {"spec_frames", c.mapper_cfg.spec_frames},
        {"spec_channels", c.mapper_cfg.spec_channels},
        {"seed", c.mapper_cfg.seed}}},
      {"policy",
       {{"d_embed", c.policy_cfg.d_embed},
        {"d_hidden", c.policy_cfg.d_hidden},
        {"pose_dim", c.policy_cfg.pose_dim},
        {"eta", c.policy_cfg.eta},
        {"rgb_hw", c.policy_cfg.rgb_hw},
        {"map_hw", c.policy_cfg.map_hw},
        {"spec_bins", c.policy_cfg.spec_bins},
        {"spec_frames", c.policy_cfg.spec_frames},
        {"spec_channels", c.policy_cfg.spec_channels},
        {"seed", c.policy_cfg.seed}}},
      {"mapper_train",
       {{"phase", c.mapper_train.phase},
        {"updates", c.mapper_train.updates},
        {"batch_size", c.mapper_train.batch_size},
        {"lr", c.mapper_train.lr},
        {"budget_B", c.mapper_train.budget_B},
        {"seed", c.mapper_train.seed},
        {"log_every", c.mapper_train.log_every},
        {"checkpoint_every", c.mapper_train.checkpoint_every}}},
      {"policy_train",
       {{"updates", c.policy_updates},
        {"episodes_per_update", c.policy_episodes_per_update},
        {"clip_eps", c.ppo.clip_eps},
        {"w_action", c.ppo.w_action},
        {"w_value", c.ppo.w_value},
        {"w_entropy", c.ppo.w_entropy},
        {"epochs", c.ppo.epochs},
        {"max_grad_norm", c.ppo.max_grad_norm},
        {"gamma", c.ppo.gamma},
        {"gae_lambda", c.ppo.gae_lambda},
        {"lr", c.ppo.lr}}},
      {"noise",
       {{"enabled", c.noise.enabled},
        {"rgb_std", c.noise.rgb_std},
        {"depth_coeff", c.noise.depth_coeff},
        {"pose_loc_mean", c.noise.pose_loc_mean},
        {"pose_loc_std", c.noise.pose_loc_std},
        {"pose_rot_mean", c.noise.pose_rot_mean},
        {"pose_rot_std", c.noise.pose_rot_std},
        {"trunc_sigma", c.noise.trunc_sigma},
        {"audio_snr_db", c.noise.audio_snr_db}}},
      {"seed", c.seed},
      {"data_dir", c.data_dir},
      {"out_dir", c.out_dir},
  };
}

inline RunConfig from_json(const json& j) {
  RunConfig c;
  auto get = [](const json& o, const char* k, auto def) {
    using V = decltype(def);
    return o.contains(k) ? o.at(k).template get<V>() : def;
  };
  if (j.contains("scene")) {
    const auto& s = j["scene"];
    c.scene_params.min_extent_m = get(s, "min_extent_m", c.scene_params.min_extent_m);
    c.scene_params.max_extent_m = get(s, "max_extent_m", c.scene_params.max_extent_m);
    c.scene_params.max_interior_walls = get(s, "max_interior_walls", c.scene_params.max_interior_walls);
    c.scene_params.max_obstacles = get(s, "max_obstacles", c.scene_params.max_obstacles);
    c.scene_params.cell_size = get(s, "cell_size", c.scene_params.cell_size);
  }
  if (j.contains("dataset")) {
    const auto& d = j["dataset"];
    c.train_scenes = get(d, "train_scenes", c.train_scenes);
    c.val_scenes = get(d, "val_scenes", c.val_scenes);
    c.test_scenes = get(d, "test_scenes", c.test_scenes);
    c.train_episodes = get(d, "train_episodes", c.train_episodes);
    c.val_episodes = get(d, "val_episodes", c.val_episodes);
    c.test_episodes = get(d, "test_episodes", c.test_episodes);
    c.train_examples = get(d, "train_examples", c.train_examples);
    c.eval_episodes = get(d, "eval_episodes", c.eval_episodes);
  }
  if (j.contains("episode")) {
    const auto& e = j["episode"];
    c.episode.T = get(e, "T", c.episode.T);
    c.episode.B = get(e, "B", c.episode.B);
    c.episode.dist_min = get(e, "dist_min", c.episode.dist_min);
    c.episode.dist_max = get(e, "dist_max", c.episode.dist_max);
    c.episode.speak_probs = get(e, "speak_probs", c.episode.speak_probs);
  }
  if (j.contains("audio")) {
    const auto& a = j["audio"];
    c.audio.sample_rate = get(a, "sample_rate", c.audio.sample_rate);
    c.audio.duration = get(a, "duration", c.audio.duration);
    c.audio.channels = get(a, "channels", c.audio.channels);
    c.audio.rir_order = get(a, "rir_order", c.audio.rir_order);
    c.audio.stft.window_ms = get(a, "window_ms", c.audio.stft.window_ms);
    c.audio.stft.hop_ms = get(a, "hop_ms", c.audio.stft.hop_ms);
    c.audio.stft.fft_size = get(a, "fft_size", c.audio.stft.fft_size);
    c.audio.stft.frame_limit = get(a, "frame_limit", c.audio.stft.frame_limit);
  }
  if (j.contains("mapper")) {
    const auto& m = j["mapper"];
    c.mapper_cfg.d_model = get(m, "d_model", c.mapper_cfg.d_model);
    c.mapper_cfg.n_heads = get(m, "n_heads", c.mapper_cfg.n_heads);
    c.mapper_cfg.n_enc_layers = get(m, "n_enc_layers", c.mapper_cfg.n_enc_layers);
    c.mapper_cfg.n_dec_layers = get(m, "n_dec_layers", c.mapper_cfg.n_dec_layers);
    c.mapper_cfg.d_ff = get(m, "d_ff", c.mapper_cfg.d_ff);
    c.mapper_cfg.grid = get(m, "grid", c.mapper_cfg.grid);
    c.mapper_cfg.dropout = get(m, "dropout", c.mapper_cfg.dropout);
    c.mapper_cfg.rgb_hw = get(m, "rgb_hw", c.mapper_cfg.rgb_hw);
    c.mapper_cfg.map_hw = get(m, "map_hw", c.mapper_cfg.map_hw);
    c.mapper_cfg.spec_bins = get(m, "spec_bins", c.mapper_cfg.spec_bins);
    c.mapper_cfg.spec_frames = get(m, "spec_frames", c.mapper_cfg.spec_frames);
    c.mapper_cfg.spec_channels = get(m, "spec_channels", c.mapper_cfg.spec_channels);
    c.mapper_cfg.seed = get(m, "seed", c.mapper_cfg.seed);
  }
  if (j.contains("policy")) {
    const auto& p = j["policy"];
    c.policy_cfg.d_embed = get(p, "d_embed", c.policy_cfg.d_embed);
    c.policy_cfg.d_hidden = get(p, "d_hidden", c.policy_cfg.d_hidden);
    c.policy_cfg.pose_dim = get(p, "pose_dim", c.policy_cfg.pose_dim);
    c.policy_cfg.eta = get(p, "eta", c.policy_cfg.eta);
    c.policy_cfg.rgb_hw = get(p, "rgb_hw", c.policy_cfg.rgb_hw);
    c.policy_cfg.map_hw = get(p, "map_hw", c.policy_cfg.map_hw);
    c.policy_cfg.spec_bins = get(p, "spec_bins", c.policy_cfg.spec_bins);
    c.policy_cfg.spec_frames = get(p, "spec_frames", c.policy_cfg.spec_frames);
    c.policy_cfg.spec_channels = get(p, "spec_channels", c.policy_cfg.spec_channels);
    c.policy_cfg.seed = get(p, "seed", c.policy_cfg.seed);
  }
  if (j.contains("mapper_train")) {
    const auto& m = j["mapper_train"];
    c.mapper_train.phase = get(m, "phase", c.mapper_train.phase);
    c.mapper_train.updates = get(m, "updates", c.mapper_train.updates);
    c.mapper_train.batch_size = get(m, "batch_size", c.mapper_train.batch_size);
    c.mapper_train.lr = get(m, "lr", c.mapper_train.lr);
    c.mapper_train.budget_B = get(m, "budget_B", c.mapper_train.budget_B);
    c.mapper_train.seed = get(m, "seed", c.mapper_train.seed);
    c.mapper_train.log_every = get(m, "log_every", c.mapper_train.log_every);
    c.mapper_train.checkpoint_every = get(m, "checkpoint_every", c.mapper_train.checkpoint_every);
  }
  if (j.contains("policy_train")) {
    const auto& p = j["policy_train"];
    c.policy_updates = get(p, "updates", c.policy_updates);
    c.policy_episodes_per_update = get(p, "episodes_per_update", c.policy_episodes_per_update);
    c.ppo.clip_eps = get(p, "clip_eps", c.ppo.clip_eps);
    c.ppo.w_action = get(p, "w_action", c.ppo.w_action);
    c.ppo.w_value = get(p, "w_value", c.ppo.w_value);
    c.ppo.w_entropy = get(p, "w_entropy", c.ppo.w_entropy);
    c.ppo.epochs = get(p, "epochs", c.ppo.epochs);
    c.ppo.max_grad_norm = get(p, "max_grad_norm", c.ppo.max_grad_norm);
    c.ppo.gamma = get(p, "gamma", c.ppo.gamma);
    c.ppo.gae_lambda = get(p, "gae_lambda", c.ppo.gae_lambda);
    c.ppo.lr = get(p, "lr", c.ppo.lr);
  }
  if (j.contains("noise")) {
    const auto& n = j["noise"];
    c.noise.enabled = get(n, "enabled", c.noise.enabled);
    c.noise.rgb_std = get(n, "rgb_std", c.noise.rgb_std);
    c.noise.depth_coeff = get(n, "depth_coeff", c.noise.depth_coeff);
    c.noise.pose_loc_mean = get(n, "pose_loc_mean", c.noise.pose_loc_mean);
    c.noise.pose_loc_std = get(n, "pose_loc_std", c.noise.pose_loc_std);
    c.noise.pose_rot_mean = get(n, "pose_rot_mean", c.noise.pose_rot_mean);
    c.noise.pose_rot_std = get(n, "pose_rot_std", c.noise.pose_rot_std);
    c.noise.trunc_sigma = get(n, "trunc_sigma", c.noise.trunc_sigma);
    c.noise.audio_snr_db = get(n, "audio_snr_db", c.noise.audio_snr_db);
  }
  c.seed = get(j, "seed", c.seed);
  c.data_dir = get(j, "data_dir", c.data_dir);
  c.out_dir = get(j, "out_dir", c.out_dir);
  return c;
}

// Content hash of the canonical JSON form; embedded in every artifact for
// provenance.
inline std::string config_hash(const RunConfig& c) {
  return io::hash_hex(io::fnv1a_str(to_json(c).dump()));
}

inline std::filesystem::path data_root(const RunConfig& c) {
  if (const char* env = std::getenv("CHAT2MAP_DATA")) return env;
  return c.data_dir.empty() ? std::filesystem::path("data") : std::filesystem::path(c.data_dir);
}

}  // namespace chat2map::harness
