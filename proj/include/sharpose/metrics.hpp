#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <vector>

#include "sharpose/decoder.hpp"

namespace sharpose {

class MetricError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Keypoint {
  double x = 0.0;
  double y = 0.0;
  int v = 0;  // COCO visibility: 0 unlabeled, 1 occluded, 2 visible
};

struct PoseEstimate {
  std::vector<Keypoint> keypoints;  // original-image pixel coordinates
  std::vector<double> scores;
  std::vector<bool> degenerate;  // flat heatmap flags
  Stage stage_used = Stage::kCoarse;
  double quality = 0.0;

  double instance_score() const {
    if (scores.empty()) return 0.0;
    double s = 0.0;
    for (double v : scores) s += v;
    return s / static_cast<double>(scores.size());
  }
};

// COCO per-keypoint constants kappa_i = 2 * sigma_i, nose..ankles.
inline const std::vector<double>& coco_kappas() {
  static const std::vector<double> k = {0.052, 0.050, 0.050, 0.070, 0.070, 0.158, 0.158, 0.144, 0.144,
                                        0.124, 0.124, 0.214, 0.214, 0.174, 0.174, 0.178, 0.178};
  return k;
}

inline std::vector<double> uniform_kappas(int m, double kappa) { return std::vector<double>(static_cast<std::size_t>(m), kappa); }

// Argmax decode with the quarter-cell shift toward the larger 4-neighbor
// (no shift at borders or on ties), scaled by the fixed 1/4 heatmap factor.
// A flat map decodes to the center cell and is flagged degenerate.
inline PoseEstimate decode_keypoints(const HeatmapSet& hm) {
  PoseEstimate est;
  const int n = hm.n_maps();
  const int rows = hm.h, cols = hm.w;
  est.keypoints.resize(static_cast<std::size_t>(n));
  est.scores.resize(static_cast<std::size_t>(n));
  est.degenerate.assign(static_cast<std::size_t>(n), false);
  est.stage_used = hm.stage;
  for (int i = 0; i < n; ++i) {
    const double* map = hm.maps.data->data() + static_cast<std::size_t>(i) * rows * cols;
    int best = 0;
    bool flat = true;
    for (int j = 1; j < rows * cols; ++j) {
      if (map[j] > map[best]) best = j;
      flat = flat && map[j] == map[0];
    }
    int r = best / cols, c = best % cols;
    double off_x = 0.0, off_y = 0.0;
    if (flat) {
      r = rows / 2;
      c = cols / 2;
      est.degenerate[static_cast<std::size_t>(i)] = true;
    } else {
      if (c > 0 && c < cols - 1) {
        const double diff = map[r * cols + c + 1] - map[r * cols + c - 1];
        off_x = diff > 0.0 ? 0.25 : (diff < 0.0 ? -0.25 : 0.0);
      }
      if (r > 0 && r < rows - 1) {
        const double diff = map[(r + 1) * cols + c] - map[(r - 1) * cols + c];
        off_y = diff > 0.0 ? 0.25 : (diff < 0.0 ? -0.25 : 0.0);
      }
    }
    est.keypoints[static_cast<std::size_t>(i)] = {ModelConfig::heatmap_down * (c + off_x),
                                                  ModelConfig::heatmap_down * (r + off_y), 2};
    est.scores[static_cast<std::size_t>(i)] = std::clamp(map[best], 0.0, 1.0);
  }
  return est;
}

// Object keypoint similarity over labeled keypoints:
// sum_i exp(-d_i^2 / (2 area kappa_i^2)) [v_i > 0] / sum_i [v_i > 0].
inline double oks(const std::vector<Keypoint>& pred, const std::vector<Keypoint>& gt, double area,
                  const std::vector<double>& kappas) {
  if (pred.size() != gt.size() || gt.size() != kappas.size()) throw MetricError("oks: size mismatch");
  if (area <= 0.0) throw MetricError("oks: area must be positive");
  double sum = 0.0;
  int visible = 0;
  for (std::size_t i = 0; i < gt.size(); ++i) {
    if (gt[i].v <= 0) continue;
    const double dx = pred[i].x - gt[i].x;
    const double dy = pred[i].y - gt[i].y;
    sum += std::exp(-(dx * dx + dy * dy) / (2.0 * area * kappas[i] * kappas[i]));
    ++visible;
  }
  if (visible == 0) throw MetricError("oks: no visible ground-truth keypoints");
  return sum / visible;
}

struct ApResult {
  double ap = 0.0;
  double ap50 = 0.0;
  double ap75 = 0.0;
};

struct GroundTruthInstance {
  std::vector<Keypoint> keypoints;
  double area = 1.0;
};

namespace detail {

// Interpolated AP at one OKS threshold for the top-down single-instance
// setting: prediction k is a true positive iff its OKS >= t.
inline double ap_at_threshold(const std::vector<double>& ranked_oks, double t) {
  const std::size_t n = ranked_oks.size();
  std::vector<double> precision(n);
  std::size_t tp = 0;
  for (std::size_t k = 0; k < n; ++k) {
    if (ranked_oks[k] >= t) ++tp;
    precision[k] = static_cast<double>(tp) / static_cast<double>(k + 1);
  }
  // All-point interpolation: precision at each recall step is the max
  // precision at any rank from there on.
  double run_max = 0.0;
  double ap = 0.0;
  for (std::size_t k = n; k-- > 0;) {
    run_max = std::max(run_max, precision[k]);
    if (ranked_oks[k] >= t) ap += run_max;
  }
  return ap / static_cast<double>(n);
}

}  // namespace detail

// AP over OKS thresholds {0.50:0.05:0.95}; estimates are ranked by instance
// score (ties keep input order).
inline ApResult average_precision(const std::vector<PoseEstimate>& estimates,
                                  const std::vector<GroundTruthInstance>& gts, const std::vector<double>& kappas) {
  if (estimates.size() != gts.size()) throw MetricError("average_precision: estimate/gt count mismatch");
  if (estimates.empty()) throw MetricError("average_precision: empty ground truth");
  std::vector<std::size_t> order(estimates.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return estimates[a].instance_score() > estimates[b].instance_score();
  });
  std::vector<double> ranked(estimates.size());
  for (std::size_t i = 0; i < order.size(); ++i) {
    ranked[i] = oks(estimates[order[i]].keypoints, gts[order[i]].keypoints, gts[order[i]].area, kappas);
  }
  ApResult r;
  int count = 0;
  for (double t = 0.50; t <= 0.951; t += 0.05) {
    const double ap_t = detail::ap_at_threshold(ranked, t);
    r.ap += ap_t;
    if (std::abs(t - 0.50) < 1e-9) r.ap50 = ap_t;
    if (std::abs(t - 0.75) < 1e-9) r.ap75 = ap_t;
    ++count;
  }
  r.ap /= count;
  return r;
}

// Fraction of labeled keypoints with error strictly below tau * norm.
inline double pck(const std::vector<PoseEstimate>& estimates, const std::vector<GroundTruthInstance>& gts,
                  const std::vector<double>& norm_lengths, double tau) {
  if (estimates.size() != gts.size() || gts.size() != norm_lengths.size()) throw MetricError("pck: size mismatch");
  std::size_t correct = 0, total = 0;
  for (std::size_t s = 0; s < estimates.size(); ++s) {
    if (norm_lengths[s] <= 0.0) throw MetricError("pck: zero norm length");
    for (std::size_t i = 0; i < gts[s].keypoints.size(); ++i) {
      if (gts[s].keypoints[i].v <= 0) continue;
      const double dx = estimates[s].keypoints[i].x - gts[s].keypoints[i].x;
      const double dy = estimates[s].keypoints[i].y - gts[s].keypoints[i].y;
      if (std::sqrt(dx * dx + dy * dy) < tau * norm_lengths[s]) ++correct;
      ++total;
    }
  }
  if (total == 0) throw MetricError("pck: no visible keypoints");
  return static_cast<double>(correct) / static_cast<double>(total);
}

// Fraction of samples that exit at the coarse stage: |{Q >= thres}| / n.
inline double dropped_ratio(const std::vector<double>& qualities, double thres) {
  if (qualities.empty()) throw MetricError("dropped_ratio: empty sample set");
  std::size_t dropped = 0;
  for (double q : qualities) {
    if (q >= thres) ++dropped;
  }
  return static_cast<double>(dropped) / static_cast<double>(qualities.size());
}

// Mean Euclidean pixel error over labeled keypoints.
inline double mean_keypoint_error(const std::vector<PoseEstimate>& estimates,
                                  const std::vector<GroundTruthInstance>& gts) {
  if (estimates.size() != gts.size()) throw MetricError("mean_keypoint_error: size mismatch");
  double sum = 0.0;
  std::size_t n = 0;
  for (std::size_t s = 0; s < estimates.size(); ++s) {
    for (std::size_t i = 0; i < gts[s].keypoints.size(); ++i) {
      if (gts[s].keypoints[i].v <= 0) continue;
      const double dx = estimates[s].keypoints[i].x - gts[s].keypoints[i].x;
      const double dy = estimates[s].keypoints[i].y - gts[s].keypoints[i].y;
      sum += std::sqrt(dx * dx + dy * dy);
      ++n;
    }
  }
  if (n == 0) throw MetricError("mean_keypoint_error: no visible keypoints");
  return sum / static_cast<double>(n);
}

}  // namespace sharpose
