// Acceptance suite: one pass/fail line per criterion. Run with no arguments
// for every criterion, or pass criterion numbers to run a subset.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "chat2map/eval/baselines.hpp"
#include "chat2map/eval/cost.hpp"
#include "chat2map/eval/metrics.hpp"
#include "chat2map/harness/config.hpp"
#include "chat2map/harness/corner.hpp"
#include "chat2map/harness/dataset.hpp"
#include "chat2map/harness/evalrun.hpp"
#include "chat2map/mapper/train.hpp"
#include "chat2map/policy/train.hpp"

using namespace chat2map;
namespace fs = std::filesystem;

namespace {

int g_failures = 0;
std::vector<std::string> g_notes;

struct Check {
  bool ok = true;
  std::string first_failure;

  void expect(bool cond, const std::string& what) {
    if (!cond && ok) {
      ok = false;
      first_failure = what;
    }
  }
  void expect_near(double a, double b, double tol, const std::string& what) {
    std::ostringstream os;
    os << what << " (" << a << " vs " << b << ", tol " << tol << ")";
    expect(std::abs(a - b) <= tol, os.str());
  }
};

void report(int n, const std::string& title, const Check& c, double seconds) {
  if (c.ok) {
    std::printf("[PASS] criterion %2d: %s (%.1fs)\n", n, title.c_str(), seconds);
  } else {
    std::printf("[FAIL] criterion %2d: %s (%.1fs) -- %s\n", n, title.c_str(), seconds,
                c.first_failure.c_str());
    ++g_failures;
  }
  std::fflush(stdout);
}

double now_s() {
  using namespace std::chrono;
  return duration<double>(steady_clock::now().time_since_epoch()).count();
}

template <typename T>
Tensor<T> random_tensor(std::vector<int> shape, Rng& rng, double scale = 0.5) {
  Tensor<T> t(std::move(shape));
  for (long i = 0; i < t.numel(); ++i) t[i] = static_cast<T>(rng.normal(0.0, scale));
  return t;
}

template <typename T>
mapper::MapperInputs<T> random_inputs(const mapper::MapperConfig& cfg, int t, Rng& rng) {
  mapper::MapperInputs<T> in;
  for (int j = 0; j < t; ++j) {
    std::array<mapper::FrameInputs<T>, 2> step;
    for (int i = 0; i < 2; ++i) {
      auto& f = step[static_cast<size_t>(i)];
      f.rgb = random_tensor<T>({1, 3, cfg.rgb_hw, cfg.rgb_hw}, rng);
      f.map = random_tensor<T>({1, 2, cfg.map_hw, cfg.map_hw}, rng);
      f.speech = random_tensor<T>({1, cfg.spec_channels, cfg.spec_bins, cfg.spec_frames}, rng);
      f.speech_other =
          random_tensor<T>({1, cfg.spec_channels, cfg.spec_bins, cfg.spec_frames}, rng);
      f.pose = geo::Pose{static_cast<double>(j), static_cast<double>(i), 90.0 * ((j + i) % 4 - 1)};
      f.pose_other = geo::Pose{static_cast<double>(j), static_cast<double>(1 - i), 0};
    }
    in.steps.push_back(step);
  }
  return in;
}

mapper::MapperConfig tiny_desk_mapper_cfg() {
  mapper::MapperConfig cfg = mapper::MapperConfig::micro();
  cfg.rgb_hw = 32;
  cfg.map_hw = 31;
  cfg.spec_bins = 64;
  cfg.spec_frames = 65;
  cfg.spec_channels = 4;
  return cfg;
}

policy::PolicyConfig tiny_desk_policy_cfg() {
  policy::PolicyConfig cfg = policy::PolicyConfig::micro();
  cfg.rgb_hw = 32;
  cfg.map_hw = 31;
  cfg.spec_bins = 64;
  cfg.spec_frames = 65;
  cfg.spec_channels = 4;
  return cfg;
}

fs::path self_dir() { return fs::canonical("/proc/self/exe").parent_path(); }

fs::path temp_dir(const std::string& tag) {
  fs::path p = fs::temp_directory_path() / ("c2m_accept_" + tag);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string file_bytes(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  if (!f) return "<missing:" + p.string() + ">";
  return std::string(std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>());
}

// ---------------------------------------------------------------------------
// 1. Cost arithmetic, exact.
// ---------------------------------------------------------------------------
void criterion_1() {
  double t0 = now_s();
  Check c;
  // B=2, T=16: 2 forced frames + 2 budgeted of 32 -> 28 skipped.
  auto r = eval::cost_report(4, 16);
  c.expect(r.frames_total == 32, "frames_total != 32");
  c.expect(r.frames_skipped == 28, "frames_skipped != 28");
  c.expect(r.percent_reduction == 87.5, "percent reduction != 87.5");
  c.expect(r.watts_saved == 74.0, "watts saved != 74");
  c.expect(std::abs(r.gflops_saved - 7.2) < 1e-12, "gflops saved != 7.2");
  report(1, "cost arithmetic (87.5% reduction, 74 W, 7.2 GFLOPs)", c, now_s() - t0);
}

// ---------------------------------------------------------------------------
// 2. Geometry oracle suite.
// ---------------------------------------------------------------------------
double brute_force_range(const world::Scene& s, const geo::Pose& pose, double angle_deg,
                         double max_range) {
  double a = angle_deg * M_PI / 180.0;
  double dx = std::cos(a), dy = std::sin(a);
  for (double t = 0.0; t <= max_range; t += 0.001) {
    if (s.occupied_at(pose.x + t * dx, pose.y + t * dy)) return t;
  }
  return world::kNoHit;
}

void criterion_2() {
  double t0 = now_s();
  Check c;

  // (a) depth raycast vs 1 mm marcher over >= 100 random free poses with
  // continuous headings.
  {
    Rng rng(123);
    int pairs = 0;
    while (pairs < 100 && c.ok) {
      world::Scene s = world::generate_scene(rng.uniform_int(0, 1 << 20));
      int r = rng.uniform_int(1, s.rows - 2), cc = rng.uniform_int(1, s.cols - 2);
      if (s.occupied(r, cc)) continue;
      geo::Pose pose{(cc + 0.5) * s.cell_size, (r + 0.5) * s.cell_size,
                     rng.uniform(-180.0, 180.0)};
      auto scan = world::render_depth(s, pose);
      for (int k = 0; k < scan.n_rays; ++k) {
        double dda = scan.ranges[static_cast<size_t>(k)];
        double brute = brute_force_range(s, pose, pose.theta + scan.offset_deg(k), scan.max_range);
        if (dda == world::kNoHit || brute == world::kNoHit) {
          // Near the max range the two may disagree about a marginal hit.
          double finite = std::min(dda, brute);
          c.expect(finite >= scan.max_range - 2 * s.cell_size,
                   "no-hit disagreement far from max range");
        } else {
          c.expect(std::abs(dda - brute) <= s.cell_size, "raycast deviates > 1 cell from marcher");
        }
      }
      ++pairs;
    }
  }

  // (a') wedge projection matches the ground-truth local crop on >= 100
  // episode poses.
  {
    int pairs = 0;
    uint64_t seed = 0;
    while (pairs < 100 && c.ok) {
      world::Scene s = world::generate_scene(seed++);
      world::EpisodeConfig ecfg;
      ecfg.T = 2;
      auto rec = world::generate_episode(s, ecfg, seed * 31);
      for (const geo::Pose& pose : {rec.steps[0].pose_1, rec.steps[0].pose_2,
                                    rec.steps[1].pose_1, rec.steps[1].pose_2}) {
        auto scan = world::render_depth(s, pose);
        auto wedge = geo::depth_to_local_occupancy(scan);
        auto gtl = world::gt_local_map(s, pose, 64, 64);
        for (int r = 0; r < 31; ++r)
          for (int cc = 0; cc < 31; ++cc) {
            if (wedge.cells.at3(r, cc, 1) < 0.5f) continue;
            c.expect(wedge.cells.at3(r, cc, 0) == gtl.cells.at3(r + 1, cc + 17, 0),
                     "wedge cell disagrees with gt crop");
          }
        ++pairs;
      }
    }
  }

  // (b) registration round-trip at axis-aligned angles, exact.
  Rng rng(13);
  for (double theta : {0.0, 90.0, 180.0, -90.0}) {
    auto local = geo::LocalMap::make(16, 16, 8, 8);
    for (int r = 0; r < 16; ++r)
      for (int cc = 0; cc < 16; ++cc) {
        local.cells.at3(r, cc, 0) = rng.bernoulli(0.4) ? 1.0f : 0.0f;
        local.cells.at3(r, cc, 1) = 1.0f;
      }
    auto acc = geo::SharedMapAccumulator::make(128);
    geo::Pose pose{3.0, -2.0, theta};
    geo::register_local(acc, local, pose, geo::ResampleMode::Nearest);
    for (int r = 0; r < 16; ++r)
      for (int cc = 0; cc < 16; ++cc) {
        auto wp = local.cell_center_world(pose, r, cc);
        int C = acc.anchor_c + static_cast<int>(std::floor(wp.x / acc.cell_size));
        int R = acc.anchor_r - 1 - static_cast<int>(std::floor(wp.y / acc.cell_size));
        c.expect(acc.count[static_cast<size_t>(R * 128 + C)] == 1, "round-trip count != 1");
        c.expect(acc.sum.at2(R, C) == local.cells.at3(r, cc, 0), "round-trip value mismatch");
      }
  }

  // (c) compose_gt_shared equals the scene raster over its footprint.
  {
    world::Scene s = world::generate_scene(21);
    world::EpisodeConfig ecfg;
    ecfg.T = 4;
    auto rec = world::generate_episode(s, ecfg, 33);
    std::vector<geo::Pose> poses;
    for (const auto& st : rec.steps) {
      poses.push_back(st.pose_1);
      poses.push_back(st.pose_2);
    }
    geo::Pose ref = rec.steps[0].pose_1;
    auto gt = geo::compose_gt_shared(s, poses, ref);
    int G = gt.cells.dim(0);
    auto acc = geo::SharedMapAccumulator::make(G, s.cell_size);
    for (int R = 0; R < G && c.ok; ++R)
      for (int C = 0; C < G; ++C) {
        if (gt.cells.at3(R, C, 1) < 0.5f) continue;
        double ex = (C - acc.anchor_c + 0.5) * s.cell_size;
        double ey = (acc.anchor_r - R - 0.5) * s.cell_size;
        geo::Pose wp = geo::denormalize_pose(geo::Pose{ex, ey, 0}, ref);
        bool occ = s.occupied_at(wp.x, wp.y);
        c.expect(gt.cells.at3(R, C, 0) == (occ ? 1.0f : 0.0f),
                 "gt composite disagrees with scene raster");
      }
  }
  report(2, "geometry oracles (marcher, round-trip, gt composite)", c, now_s() - t0);
}

// ---------------------------------------------------------------------------
// 3. Metric hand-checks on the 2x2 fixture.
// ---------------------------------------------------------------------------
geo::BinaryMap tiny_map(std::initializer_list<float> occ) {
  geo::BinaryMap m;
  m.cells = TensorF({2, 2, 2});
  int i = 0;
  for (float v : occ) {
    m.cells.at3(i / 2, i % 2, 0) = v;
    m.cells.at3(i / 2, i % 2, 1) = 1.0f;
    ++i;
  }
  return m;
}

void criterion_3() {
  double t0 = now_s();
  Check c;
  auto m = eval::map_metrics(tiny_map({1, 1, 0, 1}), tiny_map({1, 0, 0, 1}));
  c.expect_near(m.f1_occupied, 0.8, 1e-9, "f1_occupied");
  c.expect_near(m.f1_free, 2.0 / 3.0, 1e-9, "f1_free");
  c.expect_near(m.f1_mean, (0.8 + 2.0 / 3.0) / 2.0, 1e-9, "f1_mean");
  c.expect_near(m.iou_mean, 7.0 / 12.0, 1e-9, "iou_mean");
  report(3, "metric hand-checks (2x2 confusion fixture)", c, now_s() - t0);
}

// ---------------------------------------------------------------------------
// 4. Reward unit suite.
// ---------------------------------------------------------------------------
void criterion_4() {
  double t0 = now_s();
  Check c;
  const double eta = 0.03;

  auto mcfg = tiny_desk_mapper_cfg();
  mapper::SceneMapper<float> m(mcfg);
  m.training = false;
  policy::PolicyNet<float> pol(tiny_desk_policy_cfg());
  pol.training = false;

  policy::RolloutEnv env;
  env.scenes = {world::generate_scene(21)};
  env.ecfg.T = 3;
  env.budget_B = 2;
  auto roll = policy::collect_rollouts(env, pol, m, 3, 1, 5);
  c.expect(!roll.steps.empty(), "empty rollout");
  int no_capture_seen = 0;
  for (const auto& s : roll.steps) {
    c.expect(s.reward.r == s.reward.delta_q - eta * s.reward.rho,
             "r != delta_q - 0.03*rho on a logged step");
    c.expect(s.reward.eta == eta, "eta != 0.03");
    if (s.action.captured() == 0) {
      ++no_capture_seen;
      c.expect(s.reward.r == 0.0 && s.reward.delta_q == 0.0 && s.reward.rho == 0,
               "no-capture step reward not exactly 0");
    }
  }
  c.expect(no_capture_seen > 0, "rollouts never skipped (cannot check r=0 case)");

  // Pose-repeat capture increments rho: capturing ego 1 at an already-captured
  // pose must add exactly 1 to rho versus a fresh pose.
  {
    auto scene = env.scenes[0];
    world::EpisodeConfig ecfg;
    ecfg.T = 2;
    auto rec = world::generate_episode(scene, ecfg, 9);
    auto ex = mapper::make_mapper_example<float>(scene, rec, mcfg);
    std::vector<geo::Pose> world_poses = {rec.steps[0].pose_1, rec.steps[0].pose_2,
                                          rec.steps[1].pose_1, rec.steps[1].pose_2};
    int H = mcfg.out_hw();
    std::vector<geo::Pose> norm;
    for (const auto& st : ex.inputs.steps) {
      norm.push_back(st[0].pose);
      norm.push_back(st[1].pose);
    }
    int G = geo::canvas_size_for(norm, geo::Pose{0, 0, 0}, H, H, scene.cell_size);
    auto gt = geo::compose_gt_shared(scene, world_poses, ex.reference, H, H, G);
    eval::CaptureMask with, without;
    with.capture = {{1, 1}, {1, 0}};
    without.capture = {{1, 1}, {0, 0}};
    auto iw = mapper::apply_capture_mask(ex.inputs, with);
    auto io_ = mapper::apply_capture_mask(ex.inputs, without);
    std::vector<geo::Pose> fresh = {ex.inputs.steps[0][0].pose, ex.inputs.steps[0][1].pose};
    std::vector<geo::Pose> repeat = fresh;
    repeat.push_back(ex.inputs.steps[1][0].pose);  // the captured pose already visited
    auto r_fresh = policy::compute_reward(m, iw, io_, gt, {1, 0}, fresh, G);
    auto r_rep = policy::compute_reward(m, iw, io_, gt, {1, 0}, repeat, G);
    c.expect(r_fresh.rho == 0, "fresh pose counted as repeat");
    c.expect(r_rep.rho == 1, "repeated pose not counted");
    c.expect_near(r_rep.r, r_rep.delta_q - eta, 1e-12, "repeat penalty not -0.03");
    c.expect_near(r_fresh.delta_q, r_rep.delta_q, 1e-12, "delta_q changed by rho bookkeeping");
  }
  report(4, "reward identity r = dQ - 0.03*rho, zero-capture, repeat penalty", c, now_s() - t0);
}

// ---------------------------------------------------------------------------
// 5. Reference spectrogram shape.
// ---------------------------------------------------------------------------
void criterion_5() {
  double t0 = now_s();
  Check c;
  audio::Waveform w = audio::Waveform::make(2, 48000, 16000);  // 3 s @ 16 kHz
  Rng rng(2);
  for (float& v : w.samples.data) v = static_cast<float>(rng.normal(0.0, 0.1));
  auto sp = audio::spectrogram(w);  // reference preset: 31.93/8.31 ms, fft 511
  c.expect(sp.freq_bins() == 256, "freq bins != 256");
  c.expect(sp.frames() == 257, "frames != 257");
  c.expect(sp.channels() == 2, "channels != 2");
  report(5, "reference spectrogram shape 256x257xC", c, now_s() - t0);
}

// ---------------------------------------------------------------------------
// 6. Gradient checks (float64 micro, every learnable block reached).
// ---------------------------------------------------------------------------
template <typename LossFn, typename Params>
double worst_rel_error(LossFn&& loss_fn, Params& params, std::string& worst_name) {
  params.zero_grad();
  for (auto* p : params.params) p->v.grad();
  loss_fn().backward();
  const double h = 1e-4;
  double worst = 0;
  for (auto* p : params.params) {
    auto& w = p->v.val_mut();
    auto& g = p->v.grad();
    long idxs[3] = {0, w.numel() / 2, w.numel() - 1};
    for (long idx : idxs) {
      double orig = w[idx];
      double fp, fm;
      {
        nn::NoGradGuard ng;
        w[idx] = orig + h;
        fp = loss_fn().val()[0];
        w[idx] = orig - h;
        fm = loss_fn().val()[0];
        w[idx] = orig;
      }
      double fd = (fp - fm) / (2 * h);
      double denom = std::max({std::abs(fd), std::abs(static_cast<double>(g[idx])), 1e-6});
      double rel = std::abs(fd - g[idx]) / denom;
      if (rel > worst) {
        worst = rel;
        worst_name = p->name;
      }
    }
  }
  return worst;
}

void criterion_6() {
  double t0 = now_s();
  Check c;

  // Mapper graph: visual + both speech encoders, pose/modality embeddings,
  // transformer encoder/decoder, upsampler.
  {
    mapper::MapperConfig cfg = mapper::MapperConfig::micro();
    cfg.dropout = 0.0;
    mapper::SceneMapper<double> m(cfg);
    m.training = true;
    Rng rng(12);
    auto in = random_inputs<double>(cfg, 1, rng);
    std::vector<geo::Pose> poses = {in.steps[0][0].pose, in.steps[0][1].pose};
    std::vector<Tensor<double>> targets;
    for (int i = 0; i < 2; ++i) {
      Tensor<double> t({1, 2, cfg.out_hw(), cfg.out_hw()});
      for (long k = 0; k < t.numel(); ++k) t[k] = (k * 7 % 5) < 2 ? 1.0 : 0.0;
      targets.push_back(std::move(t));
    }
    auto loss_fn = [&]() {
      return mapper::mapper_loss(m.predict_probs(m.build_memory(in), poses), targets);
    };
    auto params = m.params();
    std::string worst_name;
    double worst = worst_rel_error(loss_fn, params, worst_name);
    c.expect(worst <= 1e-4, "mapper gradcheck worst rel " + std::to_string(worst) + " at " +
                                worst_name);
  }

  // Policy graph: all four encoders, pose MLP, fusion, GRU, actor, critic.
  {
    policy::PolicyConfig cfg = policy::PolicyConfig::micro();
    policy::PolicyNet<double> pol(cfg);
    pol.training = true;
    Rng rng(7);
    auto make_obs = [&]() {
      policy::PolicyObservation<double> obs;
      for (size_t i = 0; i < 2; ++i) {
        obs.rgb_prev[i] = random_tensor<double>({1, 3, cfg.rgb_hw, cfg.rgb_hw}, rng);
        obs.map_prev[i] = random_tensor<double>({1, 2, cfg.map_hw, cfg.map_hw}, rng);
        for (size_t j = 0; j < 2; ++j) {
          obs.spec_self[i][j] =
              random_tensor<double>({1, cfg.spec_channels, cfg.spec_bins, cfg.spec_frames}, rng);
          obs.spec_other[i][j] =
              random_tensor<double>({1, cfg.spec_channels, cfg.spec_bins, cfg.spec_frames}, rng);
          obs.pose_self[i][j] =
              geo::Pose{rng.uniform(-2, 2), rng.uniform(-2, 2), 90.0 * rng.uniform_int(0, 3)};
          obs.pose_other[i][j] =
              geo::Pose{rng.uniform(-2, 2), rng.uniform(-2, 2), 90.0 * rng.uniform_int(0, 3)};
        }
      }
      return obs;
    };
    auto obs1 = make_obs();
    auto obs2 = make_obs();
    Tensor<double> actions({1, 2});
    actions[0] = 1;
    actions[1] = 0;
    auto loss_fn = [&]() {
      nn::Var<double> state = pol.initial_state();
      auto o1 = pol.step(pol.encode_obs(obs1), state);
      auto o2 = pol.step(pol.encode_obs(obs2), o1.state);
      nn::Var<double> lp = nn::sum_all(nn::bernoulli_logprob(o2.logits, actions));
      nn::Var<double> ent = nn::sum_all(nn::bernoulli_entropy(o2.logits));
      nn::Var<double> v =
          nn::add(nn::sum_all(nn::square(o1.value)), nn::sum_all(nn::square(o2.value)));
      return nn::add(nn::add(lp, nn::mul_scalar(ent, 0.05)), v);
    };
    auto params = pol.params();
    std::string worst_name;
    double worst = worst_rel_error(loss_fn, params, worst_name);
    c.expect(worst <= 1e-4, "policy gradcheck worst rel " + std::to_string(worst) + " at " +
                                worst_name);
  }
  report(6, "finite-difference gradient checks (float64 micro)", c, now_s() - t0);
}

// ---------------------------------------------------------------------------
// 7. Budget and preemptiveness invariants.
// ---------------------------------------------------------------------------
void criterion_7() {
  double t0 = now_s();
  Check c;

  // Budget: 1000 random sampling episodes per B in {2,4,6}, T=16.
  for (int B : {2, 4, 6}) {
    Rng rng(static_cast<uint64_t>(B) * 101);
    for (int e = 0; e < 1000; ++e) {
      int left = B;
      int spent = 0;
      for (int t = 1; t <= 16; ++t) {
        auto ma = policy::sample_action(rng.uniform(), rng.uniform(), t, left, rng);
        if (t > 1) spent += ma.action.captured();
        c.expect(left >= 0, "budget went negative");
      }
      c.expect(spent <= B, "budget violation");
      c.expect(spent == B - left, "budget bookkeeping mismatch");
    }
  }

  // Preemptiveness: corrupting the step-t visual frames cannot change the
  // policy's step-t decision inputs or outputs (bit-exact logits).
  {
    auto mcfg = tiny_desk_mapper_cfg();
    world::Scene scene = world::generate_scene(21);
    world::EpisodeConfig ecfg;
    ecfg.T = 3;
    auto rec = world::generate_episode(scene, ecfg, 17);
    auto ex = mapper::make_mapper_example<float>(scene, rec, mcfg);
    policy::PolicyNet<float> pol(tiny_desk_policy_cfg());
    pol.training = false;
    eval::CaptureMask hist;
    hist.capture.assign(3, {0, 0});
    hist.capture[0] = {1, 1};
    for (int t_idx = 1; t_idx < 3; ++t_idx) {
      nn::NoGradGuard ng;
      auto obs = policy::make_policy_obs(ex, hist, t_idx);
      nn::Var<float> state = pol.initial_state();
      auto out = pol.step(pol.encode_obs(obs), state);
      auto ex2 = ex;  // corrupt current visual frames
      for (int i = 0; i < 2; ++i) {
        auto& f = ex2.inputs.steps[static_cast<size_t>(t_idx)][static_cast<size_t>(i)];
        for (long k = 0; k < f.rgb.numel(); ++k) f.rgb[k] = 99.0f;
        for (long k = 0; k < f.map.numel(); ++k) f.map[k] = -99.0f;
      }
      auto obs2 = policy::make_policy_obs(ex2, hist, t_idx);
      auto out2 = pol.step(pol.encode_obs(obs2), state);
      c.expect(out.logits.val().data == out2.logits.val().data,
               "logits changed when current frame was corrupted");
      c.expect(out.value.val().data == out2.value.val().data,
               "value changed when current frame was corrupted");
    }
  }
  report(7, "budget invariants (B in {2,4,6}) and preemptiveness", c, now_s() - t0);
}

// ---------------------------------------------------------------------------
// 10. Permutation invariance of the scene memory.
// ---------------------------------------------------------------------------
void criterion_10() {
  double t0 = now_s();
  Check c;
  mapper::MapperConfig cfg = mapper::MapperConfig::micro();
  cfg.dropout = 0.0;
  mapper::SceneMapper<float> m(cfg);
  m.training = false;
  Rng rng(3);
  auto in = random_inputs<float>(cfg, 2, rng);
  std::vector<geo::Pose> poses = {in.steps[0][0].pose, in.steps[1][1].pose};
  nn::NoGradGuard ng;
  auto memory = m.build_memory(in);
  auto base = m.predict_probs(memory, poses);
  std::mt19937 shuf(99);
  for (int rep = 0; rep < 3; ++rep) {
    std::shuffle(memory.entries.begin(), memory.entries.end(), shuf);
    auto perm = m.predict_probs(memory, poses);
    double worst = 0;
    for (size_t q = 0; q < base.size(); ++q) {
      const auto& a = base[q].val();
      const auto& b = perm[q].val();
      for (long k = 0; k < a.numel(); ++k)
        worst = std::max(worst, std::abs(static_cast<double>(a[k]) - b[k]));
    }
    c.expect(worst <= 1e-5, "prediction changed by " + std::to_string(worst) + " under shuffle");
  }
  report(10, "memory permutation invariance (<= 1e-5 max abs)", c, now_s() - t0);
}

// ---------------------------------------------------------------------------
// 11. CLI reproducibility on eval-passive.
// ---------------------------------------------------------------------------
void criterion_11() {
  double t0 = now_s();
  Check c;
  fs::path dir = temp_dir("cli");
  fs::path bin = self_dir() / "c2m";
  c.expect(fs::exists(bin), "CLI binary not found next to acceptance binary");

  std::ofstream cfg(dir / "cfg.json");
  cfg << R"({"scene": {"min_extent_m": 5.0, "max_extent_m": 6.0, "max_interior_walls": 1,
                        "max_obstacles": 1},
             "dataset": {"train_scenes": 2, "val_scenes": 1, "test_scenes": 1,
                         "train_episodes": 2, "val_episodes": 2, "test_episodes": 2,
                         "train_examples": 2, "eval_episodes": 2},
             "episode": {"T": 2},
             "mapper": {"d_model": 16, "n_heads": 2, "n_enc_layers": 1, "n_dec_layers": 1,
                        "d_ff": 32, "grid": 2},
             "mapper_train": {"updates": 2, "batch_size": 1},
             "seed": 3, "data_dir": "data"})";
  cfg.close();

  auto run = [&](const std::string& args) {
    std::string cmd = "cd " + dir.string() + " && " + bin.string() + " " + args +
                      " --config cfg.json >/dev/null 2>>cli_err.log";
    return std::system(cmd.c_str());
  };
  c.expect(run("gen-scenes") == 0, "gen-scenes failed");
  c.expect(run("gen-episodes") == 0, "gen-episodes failed");
  c.expect(run("train-mapper --phase 1") == 0, "train-mapper failed");
  c.expect(run("eval-passive --out out") == 0, "eval-passive run 1 failed");
  std::string first = file_bytes(dir / "out/eval_passive/metrics.jsonl");
  std::string first_sum = file_bytes(dir / "out/eval_passive/summary.json");
  c.expect(run("eval-passive --out out") == 0, "eval-passive run 2 failed");
  c.expect(!first.empty() && first[0] == '{', "metrics JSONL empty or malformed");
  c.expect(file_bytes(dir / "out/eval_passive/metrics.jsonl") == first,
           "metrics JSONL differs between reruns");
  c.expect(file_bytes(dir / "out/eval_passive/summary.json") == first_sum,
           "summary differs between reruns");
  report(11, "CLI rerun reproducibility (eval-passive byte-identical)", c, now_s() - t0);
}

// ---------------------------------------------------------------------------
// 8. Desk-scale phase-1 mapper training.
// ---------------------------------------------------------------------------
// In-memory twin of the persisted dataset builder (same seed derivations).
harness::Dataset build_split(const harness::RunConfig& cfg, uint64_t offset, int n_scenes,
                             int n_episodes, const std::string& split) {
  harness::Dataset d;
  for (int i = 0; i < n_scenes; ++i) {
    uint64_t seed = Rng::derive(cfg.seed, offset + static_cast<uint64_t>(i));
    auto s = world::generate_scene(seed, cfg.scene_params);
    s.id = split + "_" + std::to_string(i);
    d.scenes.push_back(std::move(s));
  }
  for (int i = 0; i < n_episodes; ++i) {
    uint64_t seed = Rng::derive(cfg.seed, offset + 500000 + static_cast<uint64_t>(i));
    const auto& scene = d.scenes[static_cast<size_t>(i) % d.scenes.size()];
    auto rec = world::generate_episode(scene, cfg.episode, seed);
    rec.speaker_ids = {static_cast<int>(seed % 13), 13 + static_cast<int>(seed % 11)};
    d.episodes.push_back(std::move(rec));
  }
  return d;
}

void criterion_8() {
  double t0 = now_s();
  Check c;
  harness::RunConfig cfg = harness::RunConfig::desk();
  auto train = build_split(cfg, 1000, cfg.train_scenes, cfg.train_examples, "train");
  auto val = build_split(cfg, 2000, cfg.val_scenes, cfg.eval_episodes, "val");

  std::vector<mapper::MapperExample<float>> examples;
  for (size_t e = 0; e < train.episodes.size(); ++e)
    examples.push_back(harness::render_example<float>(cfg, train.scene_for(train.episodes[e]),
                                                      train.episodes[e],
                                                      Rng::derive(cfg.seed, 100 + e)));

  double margin_reg = 0, margin_allocc = 0;
  for (uint64_t seed : {1, 2, 3}) {
    auto mcfg = cfg.mapper_cfg;
    mcfg.seed = seed;
    mapper::SceneMapper<float> m(mcfg);
    auto tc = cfg.mapper_train;
    tc.phase = 1;
    tc.seed = seed;
    auto r = mapper::train_mapper(m, examples, tc);
    c.expect(tc.updates <= 2000, "training budget exceeds 2000 updates");
    c.expect(r.final_loss <= 0.5 * r.initial_loss,
             "BCE dropped < 50% (seed " + std::to_string(seed) + ": " +
                 std::to_string(r.initial_loss) + " -> " + std::to_string(r.final_loss) + ")");
    m.training = false;
    auto res = harness::run_passive_eval(cfg, val, m, true, nullptr);
    margin_reg += res.mean_f1.at("full") - res.mean_f1.at("register_inputs");
    margin_allocc += res.mean_f1.at("full") - res.mean_f1.at("all_occupied");
  }
  margin_reg /= 3;
  margin_allocc /= 3;
  c.expect(margin_reg >= 0.02, "mean margin over register-inputs " + std::to_string(margin_reg) +
                                   " < 0.02");
  c.expect(margin_allocc >= 0.10,
           "mean margin over all-occupied " + std::to_string(margin_allocc) + " < 0.10");
  report(8, "desk phase-1 mapper training vs baselines (3 seeds)", c, now_s() - t0);
}

// ---------------------------------------------------------------------------
// 9. Policy sanity on the informative-corner family.
// ---------------------------------------------------------------------------
void criterion_9() {
  double t0 = now_s();
  Check c;

  // Random's informative-capture rate, derived by enumeration.
  double rand_rate = harness::random_informative_rate(harness::CornerFamily::kT, 2,
                                                      harness::CornerFamily::kInformativeStep);
  c.expect(rand_rate <= 0.35, "enumerated Random rate " + std::to_string(rand_rate) + " > 0.35");

  mapper::MapperConfig mcfg = mapper::MapperConfig::micro();
  mcfg.grid = 4;  // 64x64 local outputs cover the hidden strip
  mcfg.d_model = 32;
  mcfg.d_ff = 64;
  mcfg.rgb_hw = 32;
  mcfg.map_hw = 31;
  mcfg.spec_bins = 64;
  mcfg.spec_frames = 65;
  mcfg.spec_channels = 4;
  mcfg.seed = 1;
  mapper::AudioConfig acfg;

  std::vector<world::Scene> scenes;
  for (int v = 0; v < 3; ++v) scenes.push_back(harness::make_corner_scene(v));
  std::vector<mapper::MapperExample<float>> examples;
  for (int v = 0; v < 3; ++v)
    for (int s = 0; s < 2; ++s) {
      auto ep = harness::make_corner_episode(scenes[static_cast<size_t>(v)], v, 100 * v + s);
      examples.push_back(
          mapper::make_mapper_example<float>(scenes[static_cast<size_t>(v)], ep, mcfg, acfg));
    }

  mapper::SceneMapper<float> m(mcfg);
  mapper::TrainMapperConfig tc;
  tc.phase = 1;
  tc.updates = 800;
  tc.batch_size = 1;
  tc.lr = 1e-3;
  tc.seed = 1;
  mapper::train_mapper(m, examples, tc);
  tc.phase = 2;
  tc.updates = 200;
  mapper::train_mapper(m, examples, tc);
  m.training = false;

  policy::RolloutEnv env;
  env.scenes = scenes;
  env.ecfg.T = harness::CornerFamily::kT;
  env.ecfg.B = 2;
  env.budget_B = 2;
  env.acfg = acfg;
  env.episode_factory = [](const world::Scene& s, const world::EpisodeConfig&, uint64_t sd) {
    int v = s.id.back() - '0';
    return harness::make_corner_episode(s, v, sd);
  };

  // Held-out episodes for rate and final-map measurements.
  const int kEval = 24;
  std::vector<mapper::MapperExample<float>> eval_ex;
  for (int e = 0; e < kEval; ++e) {
    int v = e % 3;
    auto ep = harness::make_corner_episode(scenes[static_cast<size_t>(v)], v, 5000 + e);
    eval_ex.push_back(
        mapper::make_mapper_example<float>(scenes[static_cast<size_t>(v)], ep, mcfg, acfg));
  }
  double rate_sum = 0, f1_trained_sum = 0, f1_random_sum = 0;
  for (uint64_t seed : {1, 2, 3}) {
    auto pcfg = tiny_desk_policy_cfg();
    pcfg.seed = seed;
    policy::PolicyNet<float> pol(pcfg);
    policy::TrainPolicyConfig ptc;
    ptc.updates = 60;
    ptc.episodes_per_update = 6;
    ptc.seed = seed;
    ptc.ppo.lr = 1e-3;
    ptc.ppo.w_entropy = 0.01;
    policy::train_policy(pol, m, env, ptc);
    pol.training = false;

    int hits = 0;
    double f1_tr = 0, f1_rd = 0;
    for (int e = 0; e < kEval; ++e) {
      int v = e % 3;
      const auto& scene = scenes[static_cast<size_t>(v)];
      const auto& ex = eval_ex[static_cast<size_t>(e)];
      auto ep = harness::make_corner_episode(scene, v, 5000 + e);
      auto mask = harness::policy_capture_mask(pol, ex, 2, 7000 + static_cast<uint64_t>(e));
      hits += mask.capture[harness::CornerFamily::kInformativeStep][0];
      auto rmask =
          eval::run_baseline_policy(eval::BaselineKind::Random, ep, 2,
                                    Rng::derive(seed, 7100 + static_cast<uint64_t>(e)));

      std::vector<geo::Pose> world_poses, norm_poses;
      for (const auto& st : ep.steps) {
        world_poses.push_back(st.pose_1);
        world_poses.push_back(st.pose_2);
      }
      for (const auto& st : ex.inputs.steps) {
        norm_poses.push_back(st[0].pose);
        norm_poses.push_back(st[1].pose);
      }
      int H = mcfg.out_hw();
      int G = geo::canvas_size_for(norm_poses, geo::Pose{0, 0, 0}, H, H, scene.cell_size);
      auto gt = geo::compose_gt_shared(scene, world_poses, ex.reference, H, H, G);
      auto pred_tr = mapper::predict_shared_map(m, mapper::apply_capture_mask(ex.inputs, mask),
                                                G, scene.cell_size);
      auto pred_rd = mapper::predict_shared_map(m, mapper::apply_capture_mask(ex.inputs, rmask),
                                                G, scene.cell_size);
      f1_tr += eval::map_metrics(pred_tr, gt).f1_mean;
      f1_rd += eval::map_metrics(pred_rd, gt).f1_mean;
    }
    rate_sum += static_cast<double>(hits) / kEval;
    f1_trained_sum += f1_tr / kEval;
    f1_random_sum += f1_rd / kEval;
  }
  double rate = rate_sum / 3;
  c.expect(rate >= 0.80, "trained informative-capture rate " + std::to_string(rate) + " < 0.80");
  double f1_tr = f1_trained_sum / 3, f1_rd = f1_random_sum / 3;
  c.expect(f1_tr >= f1_rd - 0.005, "trained final f1 " + std::to_string(f1_tr) +
                                       " below Random " + std::to_string(f1_rd) + " - 0.005");
  report(9, "informative-corner policy vs random (3 seeds)", c, now_s() - t0);
}

}  // namespace

int main(int argc, char** argv) {
  std::vector<int> which;
  for (int i = 1; i < argc; ++i) which.push_back(std::atoi(argv[i]));
  auto want = [&](int n) {
    return which.empty() || std::find(which.begin(), which.end(), n) != which.end();
  };
  if (want(1)) criterion_1();
  if (want(2)) criterion_2();
  if (want(3)) criterion_3();
  if (want(4)) criterion_4();
  if (want(5)) criterion_5();
  if (want(6)) criterion_6();
  if (want(7)) criterion_7();
  if (want(8)) criterion_8();
  if (want(9)) criterion_9();
  if (want(10)) criterion_10();
  if (want(11)) criterion_11();
  for (const auto& n : g_notes) std::printf("note: %s\n", n.c_str());
  return g_failures == 0 ? 0 : 1;
}
