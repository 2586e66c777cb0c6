#pragma once

#include <algorithm>
#include <numeric>
#include <stdexcept>
#include <vector>

#include "sharpose/tensor.hpp"

namespace sharpose {

class SelectionError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// EMA accumulator over per-layer keypoint->visual attention slices,
// shape [n_heads * M, N_c].
struct AttentionLedger {
  int n_heads = 0;
  int n_keypoints = 0;
  int n_coarse = 0;
  double beta = 0.99;
  int layers_seen = 0;
  Tensor ema;  // [n_heads * M, N_c]

  static AttentionLedger make(int n_heads, int n_keypoints, int n_coarse, double beta) {
    AttentionLedger l;
    l.n_heads = n_heads;
    l.n_keypoints = n_keypoints;
    l.n_coarse = n_coarse;
    l.beta = beta;
    l.ema = Tensor::zeros({n_heads * n_keypoints, n_coarse});
    return l;
  }
};

// A_bar <- beta * A_bar + (1 - beta) * A_hat. The first layer initializes
// A_bar to its slice outright; with beta = 0.99 a zero start would leave the
// accumulator nearly empty after 12 layers.
inline void ema_update(AttentionLedger& ledger, const Tensor& slice) {
  if (slice.shape != ledger.ema.shape) throw ShapeError("ema_update: shape mismatch");
  if (ledger.layers_seen == 0) {
    std::copy(slice.data->begin(), slice.data->end(), ledger.ema.data->begin());
  } else {
    const double b = ledger.beta;
    double* e = ledger.ema.data->data();
    const double* s = slice.data->data();
    const std::size_t n = ledger.ema.numel();
    for (std::size_t i = 0; i < n; ++i) e[i] = b * e[i] + (1.0 - b) * s[i];
  }
  ledger.layers_seen += 1;
}

// s[j] = mean over heads and keypoints of the accumulated attention on
// coarse patch j.
inline std::vector<double> correlation_scores(const AttentionLedger& ledger) {
  if (ledger.layers_seen == 0) throw SelectionError("correlation_scores: empty ledger");
  const int rows = ledger.n_heads * ledger.n_keypoints;
  const int nc = ledger.n_coarse;
  std::vector<double> s(static_cast<std::size_t>(nc), 0.0);
  const double* e = ledger.ema.data->data();
  for (int r = 0; r < rows; ++r) {
    for (int j = 0; j < nc; ++j) s[static_cast<std::size_t>(j)] += e[static_cast<std::size_t>(r) * nc + j];
  }
  const double inv = 1.0 / rows;
  for (double& v : s) v *= inv;
  return s;
}

struct SelectionResult {
  std::vector<double> scores;
  std::vector<int> high_idx;  // sorted ascending
  std::vector<int> low_idx;   // complement, sorted ascending
  int n_high = 0;
};

// Top floor(alpha * N_c) patches by score; ties broken by lower index. Both
// index lists come back sorted so downstream layout is deterministic.
inline SelectionResult select_patches(const std::vector<double>& scores, double alpha, int n_coarse) {
  if (alpha <= 0.0 || alpha > 1.0) throw SelectionError("select_patches: alpha must be in (0, 1]");
  if (static_cast<int>(scores.size()) != n_coarse) throw ShapeError("select_patches: score length mismatch");
  const int n_high = static_cast<int>(std::floor(alpha * n_coarse));
  if (n_high == 0) throw SelectionError("select_patches: degenerate selection (floor(alpha*N_c) = 0)");

  std::vector<int> order(static_cast<std::size_t>(n_coarse));
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    if (scores[static_cast<std::size_t>(a)] != scores[static_cast<std::size_t>(b)]) {
      return scores[static_cast<std::size_t>(a)] > scores[static_cast<std::size_t>(b)];
    }
    return a < b;
  });

  SelectionResult r;
  r.scores = scores;
  r.n_high = n_high;
  r.high_idx.assign(order.begin(), order.begin() + n_high);
  r.low_idx.assign(order.begin() + n_high, order.end());
  std::sort(r.high_idx.begin(), r.high_idx.end());
  std::sort(r.low_idx.begin(), r.low_idx.end());
  return r;
}

}  // namespace sharpose
