#pragma once

#include <string>
#include <utility>
#include <vector>

#include "sharpose/attention_ledger.hpp"
#include "sharpose/config.hpp"
#include "sharpose/decoder.hpp"
#include "sharpose/encoder.hpp"
#include "sharpose/fine_composer.hpp"
#include "sharpose/tokenizer.hpp"

namespace sharpose {

struct NamedParam {
  std::string name;
  Tensor tensor;
};

// All learnable state. One encoder and one decoder serve both stages.
struct Model {
  ModelConfig cfg;
  PatchEmbedder embedder;
  EncoderParams encoder;
  DecoderParams decoder;
  MergeMlp merge;
  QualityGate quality;

  static Model init(const ModelConfig& cfg, Rng& rng) {
    cfg.validate();
    Model m;
    m.cfg = cfg;
    m.embedder = PatchEmbedder::init(cfg, rng);
    m.encoder = EncoderParams::init(cfg, rng);
    m.decoder = DecoderParams::init(cfg, rng);
    m.merge = MergeMlp::init(cfg.embed_dim, rng);
    m.quality = QualityGate::init(cfg, rng);
    return m;
  }

  std::vector<NamedParam> named_params() {
    std::vector<NamedParam> out;
    out.push_back({"embed.proj_w", embedder.proj_w});
    out.push_back({"embed.proj_b", embedder.proj_b});
    out.push_back({"embed.pos_coarse", embedder.pos_coarse});
    out.push_back({"embed.pos_fine", embedder.pos_fine});
    out.push_back({"embed.keypoint", embedder.keypoint_embed});
    out.push_back({"embed.quality", embedder.quality_embed});
    for (std::size_t i = 0; i < encoder.layers.size(); ++i) {
      auto& l = encoder.layers[i];
      const std::string p = "enc.l" + std::to_string(i) + ".";
      out.push_back({p + "ln1_g", l.ln1_gamma});
      out.push_back({p + "ln1_b", l.ln1_beta});
      out.push_back({p + "qkv_w", l.qkv_w});
      out.push_back({p + "qkv_b", l.qkv_b});
      out.push_back({p + "out_w", l.out_w});
      out.push_back({p + "out_b", l.out_b});
      out.push_back({p + "ln2_g", l.ln2_gamma});
      out.push_back({p + "ln2_b", l.ln2_beta});
      out.push_back({p + "mlp_w1", l.mlp_w1});
      out.push_back({p + "mlp_b1", l.mlp_b1});
      out.push_back({p + "mlp_w2", l.mlp_w2});
      out.push_back({p + "mlp_b2", l.mlp_b2});
    }
    out.push_back({"dec.ln_g", decoder.ln_gamma});
    out.push_back({"dec.ln_b", decoder.ln_beta});
    out.push_back({"dec.w", decoder.w});
    out.push_back({"dec.b", decoder.b});
    out.push_back({"merge.w1", merge.w1});
    out.push_back({"merge.b1", merge.b1});
    out.push_back({"merge.w2", merge.w2});
    out.push_back({"merge.b2", merge.b2});
    out.push_back({"qp.w1", quality.w1});
    out.push_back({"qp.b1", quality.b1});
    out.push_back({"qp.w2", quality.w2});
    out.push_back({"qp.b2", quality.b2});
    return out;
  }

  // Same underlying parameter values, fresh gradient buffers. Used by worker
  // threads so gradients can be reduced deterministically afterwards.
  Model gradient_sandbox() {
    Model m = *this;
    auto sandbox = [](Tensor& t) { t = t.grad_sandbox(); };
    sandbox(m.embedder.proj_w);
    sandbox(m.embedder.proj_b);
    sandbox(m.embedder.pos_coarse);
    sandbox(m.embedder.pos_fine);
    sandbox(m.embedder.keypoint_embed);
    sandbox(m.embedder.quality_embed);
    for (auto& l : m.encoder.layers) {
      sandbox(l.ln1_gamma);
      sandbox(l.ln1_beta);
      sandbox(l.qkv_w);
      sandbox(l.qkv_b);
      sandbox(l.out_w);
      sandbox(l.out_b);
      sandbox(l.ln2_gamma);
      sandbox(l.ln2_beta);
      sandbox(l.mlp_w1);
      sandbox(l.mlp_b1);
      sandbox(l.mlp_w2);
      sandbox(l.mlp_b2);
    }
    sandbox(m.decoder.ln_gamma);
    sandbox(m.decoder.ln_beta);
    sandbox(m.decoder.w);
    sandbox(m.decoder.b);
    sandbox(m.merge.w1);
    sandbox(m.merge.b1);
    sandbox(m.merge.w2);
    sandbox(m.merge.b2);
    sandbox(m.quality.w1);
    sandbox(m.quality.b1);
    sandbox(m.quality.w2);
    sandbox(m.quality.b2);
    return m;
  }

  void zero_grads() {
    for (auto& p : named_params()) p.tensor.zero_grad();
  }
};

struct CoarseResult {
  TokenSequence output;
  EncodeRecord record;
  HeatmapSet heatmaps;
  Tensor quality_score;  // graph scalar in [0, 1]
  double q() const { return quality_score.value(); }
};

struct FineResult {
  TokenSequence output;
  HeatmapSet heatmaps;
  FineComposition composition;
};

inline CoarseResult forward_coarse(Model& m, const ImageTensor& img, bool record = true) {
  CoarseResult r;
  TokenSequence seq = assemble_coarse_sequence(img, m.embedder, m.cfg);
  r.output = encode(seq, m.encoder, record, &r.record);
  r.heatmaps = decode_heatmaps(r.output.keypoints, m.decoder, m.cfg, Stage::kCoarse);
  r.quality_score = predict_quality(*r.output.quality, m.quality);
  return r;
}

// Accumulates every layer's keypoint->visual attention slice into a fresh
// ledger and ranks the coarse patches.
inline std::pair<AttentionLedger, SelectionResult> select_from_attention(const Model& m, const CoarseResult& coarse) {
  AttentionLedger ledger = AttentionLedger::make(m.cfg.n_heads, m.cfg.keypoints, m.cfg.n_coarse(), m.cfg.beta_ema);
  for (const LayerAttention& a : coarse.record.attention) {
    ema_update(ledger, keypoint_attention_slice(a, m.cfg.n_coarse(), m.cfg.keypoints));
  }
  const std::vector<double> scores = correlation_scores(ledger);
  SelectionResult sel = select_patches(scores, m.cfg.alpha, m.cfg.n_coarse());
  return {std::move(ledger), std::move(sel)};
}

inline FineResult forward_fine(Model& m, const ImageTensor& img, const CoarseResult& coarse,
                               const SelectionResult& selection) {
  FineResult r;
  Tensor fine_full = fine_grid_embed(img, m.embedder, m.cfg);
  r.composition = compose_fine_sequence(coarse.output, selection, fine_full, m.embedder, m.merge, m.cfg);
  r.output = encode(r.composition.tokens, m.encoder, false);
  r.heatmaps = decode_heatmaps(r.output.keypoints, m.decoder, m.cfg, Stage::kFine);
  return r;
}

}  // namespace sharpose
