#pragma once

#include <stdexcept>

#include "chat2map/geo/shared_map.hpp"

namespace chat2map::eval {

// Per-class and mean F1/IoU between a predicted and a target binary map,
// evaluated only over cells marked seen in the target (unseen cells are
// outside the evaluation support). Degenerate classes follow the convention:
// absent class with no predictions scores 1, with false predictions 0.
struct MapMetrics {
  double f1_occupied = 0, f1_free = 0, f1_mean = 0;
  double iou_occupied = 0, iou_free = 0, iou_mean = 0;
  long support = 0;  // number of cells evaluated
};

inline MapMetrics map_metrics(const geo::BinaryMap& pred, const geo::BinaryMap& gt) {
  if (!pred.cells.same_shape(gt.cells))
    throw std::invalid_argument("map_metrics: shape mismatch");
  long tp_occ = 0, fp_occ = 0, fn_occ = 0;
  long tp_free = 0, fp_free = 0, fn_free = 0;
  long support = 0;
  const int G = gt.cells.dim(0), W = gt.cells.dim(1);
  for (int r = 0; r < G; ++r)
    for (int c = 0; c < W; ++c) {
      if (gt.cells.at3(r, c, 1) < 0.5f) continue;
      ++support;
      // Cells the prediction never covered count as predicted free.
      bool p = pred.cells.at3(r, c, 1) >= 0.5f && pred.cells.at3(r, c, 0) >= 0.5f;
      bool g = gt.cells.at3(r, c, 0) >= 0.5f;
      if (p && g) ++tp_occ;
      if (p && !g) ++fp_occ;
      if (!p && g) ++fn_occ;
      if (!p && !g) ++tp_free;
      if (!p && g) ++fp_free;
      if (p && !g) ++fn_free;
    }
  auto f1 = [](long tp, long fp, long fn) {
    long denom = 2 * tp + fp + fn;
    return denom == 0 ? 1.0 : 2.0 * tp / denom;
  };
  auto iou = [](long tp, long fp, long fn) {
    long denom = tp + fp + fn;
    return denom == 0 ? 1.0 : static_cast<double>(tp) / denom;
  };
  MapMetrics m;
  m.f1_occupied = f1(tp_occ, fp_occ, fn_occ);
  m.f1_free = f1(tp_free, fp_free, fn_free);
  m.f1_mean = 0.5 * (m.f1_occupied + m.f1_free);
  m.iou_occupied = iou(tp_occ, fp_occ, fn_occ);
  m.iou_free = iou(tp_free, fp_free, fn_free);
  m.iou_mean = 0.5 * (m.iou_occupied + m.iou_free);
  m.support = support;
  return m;
}

inline MapMetrics f1_map(const geo::BinaryMap& pred, const geo::BinaryMap& gt) {
  return map_metrics(pred, gt);
}
inline MapMetrics iou_map(const geo::BinaryMap& pred, const geo::BinaryMap& gt) {
  return map_metrics(pred, gt);
}

// Map quality used by the sampling reward: mean F1 over the two classes.
inline double map_quality_Q(const geo::BinaryMap& pred, const geo::BinaryMap& gt) {
  return map_metrics(pred, gt).f1_mean;
}

}  // namespace chat2map::eval
