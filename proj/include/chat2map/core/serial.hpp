#pragma once

#include <cstdint>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "chat2map/core/nn.hpp"
#include "chat2map/core/tensor.hpp"

namespace chat2map::io {

using json = nlohmann::json;
namespace fs = std::filesystem;

// Raw little-endian blobs. The build targets little-endian hosts only.

inline void write_bytes(const fs::path& path, const void* data, size_t n) {
  fs::create_directories(path.parent_path());
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open for write: " + path.string());
  f.write(static_cast<const char*>(data), static_cast<std::streamsize>(n));
}

inline std::vector<char> read_bytes(const fs::path& path) {
  std::ifstream f(path, std::ios::binary | std::ios::ate);
  if (!f) throw std::runtime_error("cannot open: " + path.string());
  auto n = f.tellg();
  f.seekg(0);
  std::vector<char> buf(static_cast<size_t>(n));
  f.read(buf.data(), n);
  return buf;
}

inline void write_f32(const fs::path& path, const std::vector<float>& v) {
  write_bytes(path, v.data(), v.size() * sizeof(float));
}

inline std::vector<float> read_f32(const fs::path& path) {
  auto raw = read_bytes(path);
  if (raw.size() % sizeof(float)) throw std::runtime_error("bad f32 blob: " + path.string());
  std::vector<float> v(raw.size() / sizeof(float));
  std::memcpy(v.data(), raw.data(), raw.size());
  return v;
}

inline void write_u8(const fs::path& path, const std::vector<uint8_t>& v) {
  write_bytes(path, v.data(), v.size());
}

inline std::vector<uint8_t> read_u8(const fs::path& path) {
  auto raw = read_bytes(path);
  return std::vector<uint8_t>(raw.begin(), raw.end());
}

inline void write_json(const fs::path& path, const json& j) {
  fs::create_directories(path.parent_path());
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot open for write: " + path.string());
  f << j.dump(2) << "\n";
}

inline json read_json(const fs::path& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot open: " + path.string());
  return json::parse(f);
}

// FNV-1a, used for config/content provenance hashes.
inline uint64_t fnv1a(const void* data, size_t n, uint64_t h = 0xcbf29ce484222325ull) {
  const auto* p = static_cast<const uint8_t*>(data);
  for (size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= 0x100000001b3ull;
  }
  return h;
}

inline uint64_t fnv1a_str(const std::string& s, uint64_t h = 0xcbf29ce484222325ull) {
  return fnv1a(s.data(), s.size(), h);
}

inline std::string hash_hex(uint64_t h) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

// ---------------------------------------------------------------------------
// Checkpoints: one float32 blob for all params+buffers plus a JSON manifest.
// ---------------------------------------------------------------------------

template <typename T>
void save_checkpoint(const fs::path& dir, nn::ParamList<T>& pl, json metadata) {
  std::vector<float> blob;
  json entries = json::array();
  for (auto* p : pl.params) {
    const auto& t = p->v.val();
    entries.push_back({{"name", p->name}, {"shape", t.shape}, {"offset", blob.size()}});
    for (long i = 0; i < t.numel(); ++i) blob.push_back(static_cast<float>(t[i]));
  }
  for (auto& b : pl.buffers) {
    entries.push_back(
        {{"name", b.name}, {"shape", b.t->shape}, {"offset", blob.size()}, {"buffer", true}});
    for (long i = 0; i < b.t->numel(); ++i) blob.push_back(static_cast<float>((*b.t)[i]));
  }
  fs::create_directories(dir);
  write_f32(dir / "params.f32", blob);
  metadata["tensors"] = entries;
  metadata["blob_hash"] = hash_hex(fnv1a(blob.data(), blob.size() * sizeof(float)));
  write_json(dir / "checkpoint.json", metadata);
}

template <typename T>
json load_checkpoint(const fs::path& dir, nn::ParamList<T>& pl) {
  json meta = read_json(dir / "checkpoint.json");
  auto blob = read_f32(dir / "params.f32");
  auto fetch = [&](const std::string& name, Tensor<T>& dst) {
    for (auto& e : meta["tensors"]) {
      if (e["name"] == name) {
        size_t off = e["offset"];
        for (long i = 0; i < dst.numel(); ++i) dst[i] = static_cast<T>(blob[off + i]);
        return;
      }
    }
    throw std::runtime_error("checkpoint missing tensor: " + name);
  };
  for (auto* p : pl.params) fetch(p->name, p->v.val_mut());
  for (auto& b : pl.buffers) fetch(b.name, *b.t);
  return meta;
}

// Content hash over current parameter values (frozen-mapper verification).
template <typename T>
std::string param_hash(nn::ParamList<T>& pl) {
  uint64_t h = 0xcbf29ce484222325ull;
  for (auto* p : pl.params) {
    const auto& t = p->v.val();
    for (long i = 0; i < t.numel(); ++i) {
      float f = static_cast<float>(t[i]);
      h = fnv1a(&f, sizeof(f), h);
    }
  }
  return hash_hex(h);
}

class JsonlWriter {
 public:
  explicit JsonlWriter(const fs::path& path) {
    fs::create_directories(path.parent_path());
    f_.open(path);
    if (!f_) throw std::runtime_error("cannot open for write: " + path.string());
  }
  void row(const json& j) { f_ << j.dump() << "\n"; }
  void flush() { f_.flush(); }

 private:
  std::ofstream f_;
};

}  // namespace chat2map::io
