#pragma once

#include <cmath>
#include <vector>

#include "sharpose/config.hpp"
#include "sharpose/rng.hpp"
#include "sharpose/tensor.hpp"
#include "sharpose/tokenizer.hpp"

namespace sharpose {

// Post-softmax attention of one layer: shape [n_heads, N_total, N_total],
// rows are queries. Detached from the graph; reductions happen downstream.
struct LayerAttention {
  int n_heads = 0;
  int n_tokens = 0;
  Tensor probs;  // [n_heads * N x N], head-major blocks

  double at(int head, int q, int k) const { return probs.at(head * n_tokens + q, k); }
};

struct EncoderLayerParams {
  Tensor ln1_gamma, ln1_beta;
  Tensor qkv_w, qkv_b;  // [D x 3D], [3D]
  Tensor out_w, out_b;  // [D x D], [D]
  Tensor ln2_gamma, ln2_beta;
  Tensor mlp_w1, mlp_b1;  // [D x 4D], [4D]
  Tensor mlp_w2, mlp_b2;  // [4D x D], [D]
};

// One parameter store shared verbatim by the coarse and fine stages.
struct EncoderParams {
  int depth = 0;
  int n_heads = 0;
  int dim = 0;
  std::vector<EncoderLayerParams> layers;

  static EncoderParams init(const ModelConfig& cfg, Rng& rng, double stddev = 0.02) {
    EncoderParams p;
    p.depth = cfg.depth;
    p.n_heads = cfg.n_heads;
    p.dim = cfg.embed_dim;
    const int d = cfg.embed_dim;
    p.layers.resize(static_cast<std::size_t>(cfg.depth));
    for (auto& l : p.layers) {
      l.ln1_gamma = Tensor::full({d}, 1.0, true);
      l.ln1_beta = Tensor::zeros({d}, true);
      l.qkv_w = Tensor::randn({d, 3 * d}, rng, stddev, true);
      l.qkv_b = Tensor::zeros({3 * d}, true);
      l.out_w = Tensor::randn({d, d}, rng, stddev, true);
      l.out_b = Tensor::zeros({d}, true);
      l.ln2_gamma = Tensor::full({d}, 1.0, true);
      l.ln2_beta = Tensor::zeros({d}, true);
      l.mlp_w1 = Tensor::randn({d, 4 * d}, rng, stddev, true);
      l.mlp_b1 = Tensor::zeros({4 * d}, true);
      l.mlp_w2 = Tensor::randn({4 * d, d}, rng, stddev, true);
      l.mlp_b2 = Tensor::zeros({d}, true);
    }
    return p;
  }
};

struct EncodeRecord {
  std::vector<LayerAttention> attention;  // per layer, when recording
  std::vector<Tensor> layer_outputs;      // detached [N x D] per layer, when recording
};

namespace detail {

// Pre-norm block: x + proj(multi-head attention over LN(x)), then
// x + MLP(LN(x)). Captures post-softmax attention when record != nullptr.
inline Tensor encoder_layer(const Tensor& x, const EncoderLayerParams& l, int n_heads, LayerAttention* record) {
  const int n = x.rows();
  const int d = x.cols();
  const int dh = d / n_heads;
  const double inv_sqrt_dh = 1.0 / std::sqrt(static_cast<double>(dh));

  Tensor h = layer_norm(x, l.ln1_gamma, l.ln1_beta);
  Tensor qkv = add_rowvec(matmul(h, l.qkv_w), l.qkv_b);
  Tensor q = slice_cols(qkv, 0, d);
  Tensor k = slice_cols(qkv, d, 2 * d);
  Tensor v = slice_cols(qkv, 2 * d, 3 * d);

  if (record) {
    record->n_heads = n_heads;
    record->n_tokens = n;
    record->probs = Tensor::zeros({n_heads * n, n});
  }

  std::vector<Tensor> head_outputs;
  head_outputs.reserve(static_cast<std::size_t>(n_heads));
  for (int hd = 0; hd < n_heads; ++hd) {
    Tensor qh = slice_cols(q, hd * dh, (hd + 1) * dh);
    Tensor kh = slice_cols(k, hd * dh, (hd + 1) * dh);
    Tensor vh = slice_cols(v, hd * dh, (hd + 1) * dh);
    Tensor att = softmax_rows(scale(matmul_nt(qh, kh), inv_sqrt_dh));
    if (record) {
      std::copy(att.data->begin(), att.data->end(),
                record->probs.data->begin() + static_cast<std::size_t>(hd) * n * n);
    }
    head_outputs.push_back(matmul(att, vh));
  }
  Tensor merged = concat_cols(head_outputs);
  Tensor attn_out = add_rowvec(matmul(merged, l.out_w), l.out_b);
  Tensor x1 = add(x, attn_out);

  Tensor h2 = layer_norm(x1, l.ln2_gamma, l.ln2_beta);
  Tensor m = add_rowvec(matmul(h2, l.mlp_w1), l.mlp_b1);
  m = gelu(m);
  m = add_rowvec(matmul(m, l.mlp_w2), l.mlp_b2);
  return add(x1, m);
}

}  // namespace detail

// Runs the K-layer transformer over the concatenated token sequence and
// splits the result back into the same groups. Output order and length match
// the input exactly.
inline TokenSequence encode(const TokenSequence& seq, const EncoderParams& params, bool record,
                            EncodeRecord* rec = nullptr) {
  if (seq.visual.cols() != params.dim || seq.keypoints.cols() != params.dim) {
    throw ShapeError("encode: token dim does not match encoder params");
  }
  std::vector<Tensor> groups = {seq.visual, seq.keypoints};
  if (seq.quality) groups.push_back(*seq.quality);
  Tensor x = concat_rows(groups);

  if (record && rec) {
    rec->attention.resize(static_cast<std::size_t>(params.depth));
    rec->layer_outputs.clear();
    rec->layer_outputs.reserve(static_cast<std::size_t>(params.depth));
  }
  for (int i = 0; i < params.depth; ++i) {
    LayerAttention* slot = (record && rec) ? &rec->attention[static_cast<std::size_t>(i)] : nullptr;
    x = detail::encoder_layer(x, params.layers[static_cast<std::size_t>(i)], params.n_heads, slot);
    if (record && rec) rec->layer_outputs.push_back(x.detached_copy());
  }

  TokenSequence out;
  const int nv = seq.n_visual();
  const int m = seq.n_keypoints();
  out.visual = slice_rows(x, 0, nv);
  out.keypoints = slice_rows(x, nv, nv + m);
  if (seq.quality) out.quality = slice_rows(x, nv + m, nv + m + 1);
  out.region_map = seq.region_map;
  return out;
}

// Keypoint-query rows against visual-token keys: [n_heads, M, N_v]. The
// quality column (and keypoint-to-keypoint entries) are excluded.
inline Tensor keypoint_attention_slice(const LayerAttention& a, int n_visual, int n_keypoints) {
  if (n_visual + n_keypoints > a.n_tokens) throw ShapeError("keypoint_attention_slice: layout mismatch");
  Tensor out = Tensor::zeros({a.n_heads * n_keypoints, n_visual});
  for (int h = 0; h < a.n_heads; ++h) {
    for (int i = 0; i < n_keypoints; ++i) {
      for (int j = 0; j < n_visual; ++j) {
        out.at(h * n_keypoints + i, j) = a.at(h, n_visual + i, j);
      }
    }
  }
  return out;
}

}  // namespace sharpose
