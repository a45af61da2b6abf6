// Command-line front end: dataset generation, two-phase mapper training,
// policy training, passive/active evaluation, plotting, and cost reports.
#include <CLI11.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include "chat2map/harness/config.hpp"
#include "chat2map/harness/dataset.hpp"
#include "chat2map/harness/evalrun.hpp"
#include "chat2map/harness/plots.hpp"
#include "chat2map/mapper/train.hpp"
#include "chat2map/policy/train.hpp"

namespace fs = std::filesystem;
using namespace chat2map;
using harness::RunConfig;
using T = float;

namespace {

struct CommonOpts {
  std::string config_path;
  std::string out = "out";
  std::string data;
  uint64_t seed = std::numeric_limits<uint64_t>::max();  // sentinel: unset
  int T_steps = 0, budget = 0;
  bool noise = false;
};

void add_common(CLI::App* cmd, CommonOpts& o) {
  cmd->add_option("--config", o.config_path, "run config JSON file");
  cmd->add_option("--out", o.out, "artifact directory");
  cmd->add_option("--data", o.data, "dataset root (CHAT2MAP_DATA overrides)");
  cmd->add_option("--seed", o.seed, "run seed");
  cmd->add_option("--T", o.T_steps, "conversation steps per episode");
  cmd->add_option("--budget", o.budget, "visual frame budget B");
  cmd->add_flag("--noise", o.noise, "enable sensor/pose noise");
}

RunConfig resolve_config(const CommonOpts& o) {
  RunConfig cfg = RunConfig::desk();
  if (!o.config_path.empty()) {
    if (!fs::exists(o.config_path))
      throw std::runtime_error("missing artifact: config file " + o.config_path);
    cfg = harness::from_json(io::read_json(o.config_path));
  }
  if (o.seed != std::numeric_limits<uint64_t>::max()) cfg.seed = o.seed;
  if (o.T_steps > 0) cfg.episode.T = o.T_steps;
  if (o.budget > 0) cfg.episode.B = o.budget;
  if (!o.data.empty()) cfg.data_dir = o.data;
  if (o.noise) cfg.noise.enabled = true;
  cfg.out_dir = o.out;
  return cfg;
}

void write_summary(const fs::path& dir, io::json j, const RunConfig& cfg) {
  j["config_hash"] = harness::config_hash(cfg);
  fs::create_directories(dir);
  io::write_json(dir / "summary.json", j);
  std::cout << j.dump(2) << "\n";
}

// Renders mapper training examples from the train split (clean observations;
// noise is an evaluation-time condition).
std::vector<mapper::MapperExample<T>> render_train_examples(const RunConfig& cfg,
                                                            const harness::Dataset& data) {
  std::vector<mapper::MapperExample<T>> out;
  int n = std::min<int>(cfg.train_examples, static_cast<int>(data.episodes.size()));
  for (int i = 0; i < n; ++i)
    out.push_back(mapper::make_mapper_example<T>(data.scene_for(data.episodes[static_cast<size_t>(i)]),
                                                 data.episodes[static_cast<size_t>(i)],
                                                 cfg.mapper_cfg, cfg.audio));
  return out;
}

fs::path mapper_ckpt_path(const RunConfig& cfg, int phase) {
  return fs::path(cfg.out_dir) / ("mapper_phase" + std::to_string(phase)) / "ckpt_final";
}

// Picks the mapper checkpoint for evaluation: explicit flag, else phase 2,
// else phase 1.
fs::path find_mapper_ckpt(const RunConfig& cfg, const std::string& flag) {
  if (!flag.empty()) {
    if (!fs::exists(flag)) throw std::runtime_error("missing artifact: mapper checkpoint " + flag);
    return flag;
  }
  for (int phase : {2, 1})
    if (fs::exists(mapper_ckpt_path(cfg, phase))) return mapper_ckpt_path(cfg, phase);
  throw std::runtime_error("missing artifact: mapper checkpoint (run train-mapper first; looked in " +
                           mapper_ckpt_path(cfg, 2).string() + " and " +
                           mapper_ckpt_path(cfg, 1).string() + ")");
}

int cmd_gen_scenes(const CommonOpts& o) {
  RunConfig cfg = resolve_config(o);
  harness::gen_scenes(cfg, "train", cfg.train_scenes, 1000);
  harness::gen_scenes(cfg, "val", cfg.val_scenes, 2000);
  harness::gen_scenes(cfg, "test", cfg.test_scenes, 3000);
  std::cout << io::json{{"scenes",
                         {{"train", cfg.train_scenes}, {"val", cfg.val_scenes}, {"test", cfg.test_scenes}}},
                        {"data_root", harness::data_root(cfg).string()},
                        {"config_hash", harness::config_hash(cfg)}}
                   .dump(2)
            << "\n";
  return 0;
}

int cmd_gen_episodes(const CommonOpts& o) {
  RunConfig cfg = resolve_config(o);
  for (const auto& [split, count, off] :
       {std::tuple{"train", cfg.train_episodes, 1000ull}, {"val", cfg.val_episodes, 2000ull},
        {"test", cfg.test_episodes, 3000ull}}) {
    if (!fs::exists(harness::data_root(cfg) / "scenes" / split / "manifest.json"))
      throw std::runtime_error("missing artifact: scenes for split '" + std::string(split) +
                               "' (run gen-scenes first)");
    harness::gen_episodes(cfg, split, count, off);
  }
  std::cout << io::json{{"episodes",
                         {{"train", cfg.train_episodes}, {"val", cfg.val_episodes}, {"test", cfg.test_episodes}}},
                        {"config_hash", harness::config_hash(cfg)}}
                   .dump(2)
            << "\n";
  return 0;
}

int cmd_train_mapper(const CommonOpts& o, int phase, int updates) {
  RunConfig cfg = resolve_config(o);
  auto data = harness::load_dataset(cfg, "train", cfg.train_examples);
  auto examples = render_train_examples(cfg, data);

  mapper::SceneMapper<T> m(cfg.mapper_cfg);
  if (phase == 2) {
    fs::path prev = mapper_ckpt_path(cfg, 1);
    if (!fs::exists(prev))
      throw std::runtime_error("missing artifact: phase-1 mapper checkpoint " + prev.string() +
                               " (run train-mapper --phase 1 first)");
    auto params = m.params();
    auto meta = io::load_checkpoint(prev, params);
    if (meta.value("kind", std::string()) != "mapper")
      throw std::runtime_error("checkpoint " + prev.string() + " is not a mapper checkpoint");
  }

  mapper::TrainMapperConfig tc = cfg.mapper_train;
  tc.phase = phase;
  if (updates > 0) tc.updates = updates;
  tc.budget_B = cfg.episode.B;
  tc.seed = cfg.seed;
  tc.out_dir = fs::path(cfg.out_dir) / ("mapper_phase" + std::to_string(phase));
  auto res = mapper::train_mapper(m, examples, tc);

  write_summary(tc.out_dir,
                {{"command", "train-mapper"},
                 {"phase", phase},
                 {"updates", tc.updates},
                 {"initial_loss", res.initial_loss},
                 {"final_loss", res.final_loss},
                 {"dataset_hash", data.content_hash},
                 {"checkpoint", (tc.out_dir / "ckpt_final").string()}},
                cfg);
  return 0;
}

int cmd_train_policy(const CommonOpts& o, const std::string& mapper_flag) {
  RunConfig cfg = resolve_config(o);
  fs::path mc = mapper_flag.empty() ? mapper_ckpt_path(cfg, 2) : fs::path(mapper_flag);
  if (!fs::exists(mc))
    throw std::runtime_error("missing artifact: phase-2 mapper checkpoint " + mc.string() +
                             " (run train-mapper --phase 2 first)");
  mapper::SceneMapper<T> m(cfg.mapper_cfg);
  policy::load_frozen_mapper(m, mc);

  policy::RolloutEnv env;
  env.scenes = harness::load_scenes(cfg, "train");
  env.ecfg = cfg.episode;
  env.acfg = cfg.audio;
  env.budget_B = cfg.episode.B;

  policy::PolicyNet<T> pol(cfg.policy_cfg);
  policy::TrainPolicyConfig tc;
  tc.updates = cfg.policy_updates;
  tc.episodes_per_update = cfg.policy_episodes_per_update;
  tc.seed = cfg.seed;
  tc.ppo = cfg.ppo;
  tc.mapper_checkpoint = mc;
  tc.out_dir = fs::path(cfg.out_dir) / "policy";
  auto res = policy::train_policy(pol, m, env, tc);

  write_summary(tc.out_dir,
                {{"command", "train-policy"},
                 {"updates", tc.updates},
                 {"final_mean_reward", res.mean_rewards.empty() ? 0.0 : res.mean_rewards.back()},
                 {"final_mean_q", res.mean_q.empty() ? 0.0 : res.mean_q.back()},
                 {"mapper_checkpoint", mc.string()},
                 {"checkpoint", (tc.out_dir / "policy_final").string()}},
                cfg);
  return 0;
}

int cmd_eval_passive(const CommonOpts& o, const std::string& mapper_flag,
                     const std::string& split) {
  RunConfig cfg = resolve_config(o);
  fs::path mc = find_mapper_ckpt(cfg, mapper_flag);
  mapper::SceneMapper<T> m(cfg.mapper_cfg);
  auto params = m.params();
  auto meta = io::load_checkpoint(mc, params);
  if (meta.value("kind", std::string()) != "mapper")
    throw std::runtime_error("checkpoint " + mc.string() + " is not a mapper checkpoint");
  m.training = false;

  auto data = harness::load_dataset(cfg, split, cfg.eval_episodes);
  fs::path dir = fs::path(cfg.out_dir) / "eval_passive";
  fs::create_directories(dir);
  io::JsonlWriter log(dir / "metrics.jsonl");
  auto res = harness::run_passive_eval(cfg, data, m, true, &log);
  log.flush();

  io::json means;
  for (const auto& [k, v] : res.mean_f1) means[k] = v;
  write_summary(dir,
                {{"command", "eval-passive"},
                 {"split", split},
                 {"episodes", data.episodes.size()},
                 {"noise", cfg.noise.enabled},
                 {"mapper_checkpoint", mc.string()},
                 {"mapper_phase", meta.value("phase", 0)},
                 {"dataset_hash", data.content_hash},
                 {"mean_f1", means}},
                cfg);
  return 0;
}

int cmd_eval_active(const CommonOpts& o, const std::string& mapper_flag,
                    const std::string& policy_flag, const std::string& split) {
  RunConfig cfg = resolve_config(o);
  fs::path mc = mapper_flag.empty() ? mapper_ckpt_path(cfg, 2) : fs::path(mapper_flag);
  if (!fs::exists(mc))
    throw std::runtime_error("missing artifact: phase-2 mapper checkpoint " + mc.string() +
                             " (active evaluation needs the phase-2 mapper)");
  mapper::SceneMapper<T> m(cfg.mapper_cfg);
  auto meta = policy::load_frozen_mapper(m, mc);  // rejects phase-1 checkpoints

  policy::PolicyNet<T> pol(cfg.policy_cfg);
  policy::PolicyNet<T>* pol_ptr = nullptr;
  if (!policy_flag.empty()) {
    if (!fs::exists(policy_flag))
      throw std::runtime_error("missing artifact: policy checkpoint " + policy_flag);
    auto pparams = pol.params();
    auto pmeta = io::load_checkpoint(policy_flag, pparams);
    if (pmeta.value("kind", std::string()) != "policy")
      throw std::runtime_error("checkpoint " + policy_flag + " is not a policy checkpoint");
    pol.training = false;
    pol_ptr = &pol;
  }

  auto data = harness::load_dataset(cfg, split, cfg.eval_episodes);
  std::vector<uint64_t> seeds = {Rng::derive(cfg.seed, 1), Rng::derive(cfg.seed, 2),
                                 Rng::derive(cfg.seed, 3)};
  fs::path dir = fs::path(cfg.out_dir) / "eval_active";
  fs::create_directories(dir);
  io::JsonlWriter log(dir / "curves.jsonl");
  auto res = harness::run_active_eval(cfg, data, m, pol_ptr, seeds, &log);
  log.flush();

  harness::LinePlot plot;
  plot.title = "shared-map quality vs step (budget B=" + std::to_string(cfg.episode.B) + ")";
  plot.x_label = "step";
  plot.y_label = "f1_mean";
  io::json curves, costs;
  for (const auto& [kind, curve] : res.curves) {
    harness::Series s;
    s.name = kind;
    io::json jc = io::json::array();
    for (const auto& p : curve) {
      s.y.push_back(p.mean);
      s.y_err.push_back(p.stddev);
      jc.push_back({{"mean", p.mean}, {"std", p.stddev}});
    }
    plot.series.push_back(std::move(s));
    curves[kind] = jc;
    costs[kind] = res.costs.at(kind).to_json();
  }
  harness::emit_plot(dir / "f1_curve", plot);

  write_summary(dir,
                {{"command", "eval-active"},
                 {"split", split},
                 {"episodes", data.episodes.size()},
                 {"seeds", seeds},
                 {"noise", cfg.noise.enabled},
                 {"mapper_checkpoint", mc.string()},
                 {"mapper_phase", meta.value("phase", 0)},
                 {"policy_checkpoint", policy_flag},
                 {"dataset_hash", data.content_hash},
                 {"curves", curves},
                 {"costs", costs}},
                cfg);
  return 0;
}

// Replots a metrics JSONL file: rows grouped by `group`, x from `xkey`,
// y averaged over rows sharing (group, x).
int cmd_plot(const std::string& in, const std::string& out_base, const std::string& xkey,
             const std::string& ykey, const std::string& group, const std::string& title) {
  if (!fs::exists(in)) throw std::runtime_error("missing artifact: metrics file " + in);
  std::ifstream f(in);
  std::map<std::string, std::map<double, std::pair<double, int>>> acc;  // group -> x -> (sum, n)
  std::string line;
  while (std::getline(f, line)) {
    if (line.empty()) continue;
    auto j = io::json::parse(line);
    if (!j.contains(ykey)) continue;
    std::string g = group.empty() || !j.contains(group)
                        ? "all"
                        : (j[group].is_string() ? j[group].get<std::string>() : j[group].dump());
    double x = j.contains(xkey) ? j[xkey].get<double>()
                                : static_cast<double>(acc[g].size());
    auto& cell = acc[g][x];
    cell.first += j[ykey].get<double>();
    cell.second += 1;
  }
  if (acc.empty()) throw std::runtime_error("plot: no rows with field '" + ykey + "' in " + in);
  harness::LinePlot plot;
  plot.title = title.empty() ? ykey + " from " + in : title;
  plot.x_label = xkey;
  plot.y_label = ykey;
  for (const auto& [g, xs] : acc) {
    harness::Series s;
    s.name = g;
    for (const auto& [x, sn] : xs) s.y.push_back(sn.first / sn.second);
    plot.series.push_back(std::move(s));
  }
  harness::emit_plot(out_base, plot);
  std::cout << io::json{{"png", out_base + ".png"}, {"csv", out_base + ".csv"},
                        {"series", acc.size()}}
                   .dump(2)
            << "\n";
  return 0;
}

int cmd_cost(int captured, int T_steps) {
  auto r = eval::cost_report(captured, T_steps);
  std::cout << r.to_json().dump(2) << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"chat2map: efficient two-ego conversational scene mapping"};
  app.require_subcommand(1);

  CommonOpts o;
  int phase = 1, updates = 0;
  std::string mapper_flag, policy_flag, split = "test";
  std::string plot_in, plot_out = "plot", plot_x = "step", plot_y = "f1_mean", plot_group, plot_title;
  int cost_captured = 0, cost_T = 16;

  auto* gs = app.add_subcommand("gen-scenes", "generate scene splits");
  add_common(gs, o);
  auto* ge = app.add_subcommand("gen-episodes", "generate episode splits");
  add_common(ge, o);
  auto* tm = app.add_subcommand("train-mapper", "train the shared mapper (phase 1 or 2)");
  add_common(tm, o);
  tm->add_option("--phase", phase, "1: all frames; 2: budgeted frame drops")
      ->check(CLI::Range(1, 2));
  tm->add_option("--updates", updates, "override update count");
  auto* tp = app.add_subcommand("train-policy", "PPO-train the sampling policy");
  add_common(tp, o);
  tp->add_option("--mapper", mapper_flag, "phase-2 mapper checkpoint");
  auto* ep = app.add_subcommand("eval-passive", "evaluate mapping with every frame available");
  add_common(ep, o);
  ep->add_option("--mapper", mapper_flag, "mapper checkpoint");
  ep->add_option("--split", split, "dataset split");
  auto* ea = app.add_subcommand("eval-active", "evaluate budgeted capture policies");
  add_common(ea, o);
  ea->add_option("--mapper", mapper_flag, "phase-2 mapper checkpoint");
  ea->add_option("--policy", policy_flag, "trained policy checkpoint");
  ea->add_option("--split", split, "dataset split");
  auto* pl = app.add_subcommand("plot", "render a metrics JSONL file to PNG + CSV");
  pl->add_option("--in", plot_in, "metrics JSONL file")->required();
  pl->add_option("--out", plot_out, "output base path (without extension)");
  pl->add_option("--x", plot_x, "x field");
  pl->add_option("--y", plot_y, "y field");
  pl->add_option("--group", plot_group, "series grouping field");
  pl->add_option("--title", plot_title, "plot title");
  auto* co = app.add_subcommand("cost", "capture/compute cost report");
  co->add_option("--captured", cost_captured, "frames captured")->required();
  co->add_option("--T", cost_T, "episode steps");

  CLI11_PARSE(app, argc, argv);

  try {
    if (gs->parsed()) return cmd_gen_scenes(o);
    if (ge->parsed()) return cmd_gen_episodes(o);
    if (tm->parsed()) return cmd_train_mapper(o, phase, updates);
    if (tp->parsed()) return cmd_train_policy(o, mapper_flag);
    if (ep->parsed()) return cmd_eval_passive(o, mapper_flag, split);
    if (ea->parsed()) return cmd_eval_active(o, mapper_flag, policy_flag, split);
    if (pl->parsed()) return cmd_plot(plot_in, plot_out, plot_x, plot_y, plot_group, plot_title);
    if (co->parsed()) return cmd_cost(cost_captured, cost_T);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 1;
}
