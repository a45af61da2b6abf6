#pragma once

#include <json.hpp>

namespace chat2map::eval {

// Linear capture/compute cost model with paper-derived per-frame constants.
// It reports costs; it never measures them.
struct CostModel {
  double gflops_per_frame = 7.2 / 28.0;
  double watts_per_frame = 74.0 / 28.0;
  double policy_overhead_gflops = 24.1;
};

struct CostReport {
  int frames_total = 0;
  int frames_captured = 0;
  int frames_skipped = 0;
  double percent_reduction = 0;  // skipped / total * 100
  double gflops_saved = 0;
  double watts_saved = 0;
  double policy_overhead_gflops = 0;
  double net_gflops_saved = 0;

  nlohmann::json to_json() const {
    return {{"frames_total", frames_total},
            {"frames_captured", frames_captured},
            {"frames_skipped", frames_skipped},
            {"percent_reduction", percent_reduction},
            {"gflops_saved", gflops_saved},
            {"watts_saved", watts_saved},
            {"policy_overhead_gflops", policy_overhead_gflops},
            {"net_gflops_saved", net_gflops_saved}};
  }
};

inline CostReport cost_report(int frames_captured, int T, const CostModel& model = {}) {
  CostReport r;
  r.frames_total = 2 * T;
  r.frames_captured = frames_captured;
  r.frames_skipped = r.frames_total - frames_captured;
  r.percent_reduction = r.frames_total == 0
                            ? 0.0
                            : 100.0 * r.frames_skipped / r.frames_total;
  r.gflops_saved = r.frames_skipped * model.gflops_per_frame;
  r.watts_saved = r.frames_skipped * model.watts_per_frame;
  r.policy_overhead_gflops = model.policy_overhead_gflops;
  r.net_gflops_saved = r.gflops_saved - model.policy_overhead_gflops;
  return r;
}

}  // namespace chat2map::eval
