#pragma once

#include <string>
#include <vector>

#include "sharpose/config.hpp"
#include "sharpose/rng.hpp"
#include "sharpose/tensor.hpp"

namespace sharpose {

enum class Stage { kCoarse, kFine };

// M heatmaps of heatmap_h x heatmap_w. `maps` stays a [M x (H*W)] matrix so
// it can live on the autodiff graph during training.
struct HeatmapSet {
  Tensor maps;
  int h = 0;
  int w = 0;
  Stage stage = Stage::kCoarse;

  int n_maps() const { return maps.rows(); }
  double at(int map, int row, int col) const { return maps.at(map, row * w + col); }
};

// Shared keypoint decoder: LayerNorm then a single linear map D -> H*W,
// identical parameters for every keypoint and both stages.
struct DecoderParams {
  Tensor ln_gamma, ln_beta;
  Tensor w;  // [D x (H*W)]
  Tensor b;  // [H*W]

  static DecoderParams init(const ModelConfig& cfg, Rng& rng, double stddev = 0.02) {
    DecoderParams d;
    const int hw = cfg.heatmap_h() * cfg.heatmap_w();
    d.ln_gamma = Tensor::full({cfg.embed_dim}, 1.0, true);
    d.ln_beta = Tensor::zeros({cfg.embed_dim}, true);
    d.w = Tensor::randn({cfg.embed_dim, hw}, rng, stddev, true);
    d.b = Tensor::zeros({hw}, true);
    return d;
  }
};

inline HeatmapSet decode_heatmaps(const Tensor& keypoint_tokens, const DecoderParams& params, const ModelConfig& cfg,
                                  Stage stage) {
  if (keypoint_tokens.cols() != cfg.embed_dim) throw ShapeError("decode_heatmaps: token dim mismatch");
  HeatmapSet hs;
  hs.h = cfg.heatmap_h();
  hs.w = cfg.heatmap_w();
  hs.stage = stage;
  Tensor h = layer_norm(keypoint_tokens, params.ln_gamma, params.ln_beta);
  hs.maps = add_rowvec(matmul(h, params.w), params.b);
  return hs;
}

// Quality predictor MLP D -> D/2 -> 1, GELU between, sigmoid output so the
// score lives in OKS range [0, 1].
struct QualityGate {
  Tensor w1, b1;
  Tensor w2, b2;
  double q_thres = 0.95;

  static QualityGate init(const ModelConfig& cfg, Rng& rng, double stddev = 0.02) {
    QualityGate g;
    const int hidden = cfg.embed_dim / 2;
    g.w1 = Tensor::randn({cfg.embed_dim, hidden}, rng, stddev, true);
    g.b1 = Tensor::zeros({hidden}, true);
    g.w2 = Tensor::randn({hidden, 1}, rng, stddev, true);
    g.b2 = Tensor::zeros({1}, true);
    g.q_thres = cfg.q_thres;
    return g;
  }
};

// Q = sigmoid(MLP(q_K)) as a graph scalar.
inline Tensor predict_quality(const Tensor& quality_token, const QualityGate& gate) {
  if (quality_token.rows() != 1) throw ShapeError("predict_quality: expected one quality token");
  Tensor h = gelu(add_rowvec(matmul(quality_token, gate.w1), gate.b1));
  return sigmoid(add_rowvec(matmul(h, gate.w2), gate.b2));
}

enum class GateDecision { kExitCoarse, kRefine };

// Refine only when the predicted quality falls below the threshold.
inline GateDecision gate(double q, double q_thres) {
  return q < q_thres ? GateDecision::kRefine : GateDecision::kExitCoarse;
}

// Decodes the keypoint tokens of one recorded intermediate layer
// (1-based layer_idx; layer_idx == K reproduces the final decode).
inline HeatmapSet intermediate_response(const std::vector<Tensor>& layer_outputs, const DecoderParams& params,
                                        const ModelConfig& cfg, int layer_idx, int n_visual, Stage stage) {
  if (layer_idx < 1 || layer_idx > static_cast<int>(layer_outputs.size())) {
    throw ShapeError("intermediate_response: layer index out of range");
  }
  const Tensor& x = layer_outputs[static_cast<std::size_t>(layer_idx - 1)];
  Tensor kp = slice_rows(x, n_visual, n_visual + cfg.keypoints);
  return decode_heatmaps(kp, params, cfg, stage);
}

}  // namespace sharpose
