#pragma once

#include <cstring>
#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "chat2map/core/serial.hpp"
#include "chat2map/harness/config.hpp"
#include "chat2map/world/episode.hpp"
#include "chat2map/world/scene.hpp"

namespace chat2map::harness {

namespace fs = std::filesystem;

// -----------------------------------------------------------------------------
// Scene persistence: JSON metadata + u8 occupancy blob + i32 surface-id blob.
// -----------------------------------------------------------------------------

inline void save_scene(const fs::path& dir, const world::Scene& s) {
  fs::create_directories(dir);
  io::write_json(dir / "scene.json", {{"rows", s.rows},
                                      {"cols", s.cols},
                                      {"cell_size", s.cell_size},
                                      {"seed", s.seed},
                                      {"id", s.id}});
  io::write_u8(dir / "occ.u8", s.occ);
  io::write_bytes(dir / "surface.i32", s.surface_ids.data(),
                  s.surface_ids.size() * sizeof(int32_t));
}

inline world::Scene load_scene(const fs::path& dir) {
  auto meta = io::read_json(dir / "scene.json");
  world::Scene s;
  s.rows = meta.at("rows");
  s.cols = meta.at("cols");
  s.cell_size = meta.at("cell_size");
  s.seed = meta.at("seed");
  s.id = meta.at("id");
  s.occ = io::read_u8(dir / "occ.u8");
  auto raw = io::read_bytes(dir / "surface.i32");
  s.surface_ids.resize(raw.size() / sizeof(int32_t));
  std::memcpy(s.surface_ids.data(), raw.data(), raw.size());
  if (s.occ.size() != static_cast<size_t>(s.rows) * s.cols)
    throw std::runtime_error("load_scene: occupancy blob size mismatch");
  return s;
}

// -----------------------------------------------------------------------------
// Episode persistence: JSONL, one fully expanded record per line.
// -----------------------------------------------------------------------------

inline io::json episode_to_json(const world::EpisodeRecord& rec) {
  io::json steps = io::json::array();
  for (const auto& st : rec.steps)
    steps.push_back({{"p1", {st.pose_1.x, st.pose_1.y, st.pose_1.theta}},
                     {"p2", {st.pose_2.x, st.pose_2.y, st.pose_2.theta}},
                     {"s1", st.speak_1},
                     {"s2", st.speak_2}});
  return {{"scene_id", rec.scene_id},
          {"seed", rec.seed},
          {"T", rec.config.T},
          {"B", rec.config.B},
          {"speaker_ids", rec.speaker_ids},
          {"steps", steps}};
}

inline world::EpisodeRecord episode_from_json(const io::json& j) {
  world::EpisodeRecord rec;
  rec.scene_id = j.at("scene_id");
  rec.seed = j.at("seed");
  rec.config.T = j.at("T");
  rec.config.B = j.at("B");
  rec.speaker_ids = j.at("speaker_ids");
  for (const auto& s : j.at("steps")) {
    world::TrajectoryStep st;
    st.pose_1 = {s.at("p1")[0], s.at("p1")[1], s.at("p1")[2]};
    st.pose_2 = {s.at("p2")[0], s.at("p2")[1], s.at("p2")[2]};
    st.speak_1 = s.at("s1");
    st.speak_2 = s.at("s2");
    rec.steps.push_back(st);
  }
  return rec;
}

struct Dataset {
  std::vector<world::Scene> scenes;
  std::vector<world::EpisodeRecord> episodes;  // scene resolved via scene_id
  std::string content_hash;

  const world::Scene& scene_for(const world::EpisodeRecord& rec) const {
    for (const auto& s : scenes)
      if (s.id == rec.scene_id) return s;
    throw std::runtime_error("Dataset: unknown scene id " + rec.scene_id);
  }
};

// Generates and persists the scenes of one split. Scene seeds are derived
// from (run seed, split offset, index) so splits never share scenes.
inline void gen_scenes(const RunConfig& cfg, const std::string& split, int count,
                       uint64_t split_offset) {
  fs::path root = data_root(cfg) / "scenes" / split;
  fs::create_directories(root);
  io::json manifest = io::json::array();
  for (int i = 0; i < count; ++i) {
    uint64_t seed = Rng::derive(cfg.seed, split_offset + static_cast<uint64_t>(i));
    world::Scene s = world::generate_scene(seed, cfg.scene_params);
    s.id = split + "_" + std::to_string(i);
    char buf[32];
    std::snprintf(buf, sizeof(buf), "scene_%04d", i);
    save_scene(root / buf, s);
    manifest.push_back({{"dir", buf}, {"id", s.id}, {"seed", seed}});
  }
  io::write_json(root / "manifest.json",
                 {{"split", split}, {"count", count}, {"config_hash", config_hash(cfg)},
                  {"scenes", manifest}});
}

inline std::vector<world::Scene> load_scenes(const RunConfig& cfg, const std::string& split) {
  fs::path root = data_root(cfg) / "scenes" / split;
  auto manifest = io::read_json(root / "manifest.json");
  std::vector<world::Scene> out;
  for (const auto& e : manifest.at("scenes")) out.push_back(load_scene(root / e.at("dir")));
  return out;
}

// Generates and persists the episodes of one split over its scenes.
inline void gen_episodes(const RunConfig& cfg, const std::string& split, int count,
                         uint64_t split_offset) {
  auto scenes = load_scenes(cfg, split);
  if (scenes.empty()) throw std::runtime_error("gen_episodes: no scenes for split " + split);
  fs::path root = data_root(cfg) / "episodes" / split;
  fs::create_directories(root);
  io::JsonlWriter out(root / "episodes.jsonl");
  for (int i = 0; i < count; ++i) {
    uint64_t seed = Rng::derive(cfg.seed, split_offset + 500000 + static_cast<uint64_t>(i));
    const auto& scene = scenes[static_cast<size_t>(i) % scenes.size()];
    auto rec = world::generate_episode(scene, cfg.episode, seed);
    rec.speaker_ids = {static_cast<int>(seed % 13), 13 + static_cast<int>(seed % 11)};
    out.row(episode_to_json(rec));
  }
  out.flush();
  io::write_json(root / "manifest.json",
                 {{"split", split}, {"count", count}, {"config_hash", config_hash(cfg)}});
}

inline std::vector<world::EpisodeRecord> load_episodes(const RunConfig& cfg,
                                                       const std::string& split,
                                                       int limit = -1) {
  fs::path path = data_root(cfg) / "episodes" / split / "episodes.jsonl";
  std::ifstream f(path);
  if (!f) throw std::runtime_error("load_episodes: missing " + path.string());
  std::vector<world::EpisodeRecord> out;
  std::string line;
  while (std::getline(f, line)) {
    if (line.empty()) continue;
    out.push_back(episode_from_json(io::json::parse(line)));
    if (limit >= 0 && static_cast<int>(out.size()) >= limit) break;
  }
  return out;
}

inline Dataset load_dataset(const RunConfig& cfg, const std::string& split, int limit = -1) {
  Dataset d;
  d.scenes = load_scenes(cfg, split);
  d.episodes = load_episodes(cfg, split, limit);
  uint64_t h = 0xcbf29ce484222325ull;
  for (const auto& s : d.scenes) h = io::fnv1a(s.occ.data(), s.occ.size(), h);
  for (const auto& e : d.episodes) h = io::fnv1a_str(episode_to_json(e).dump(), h);
  d.content_hash = io::hash_hex(h);
  return d;
}

}  // namespace chat2map::harness
