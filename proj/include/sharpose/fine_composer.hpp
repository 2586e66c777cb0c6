#pragma once

#include <vector>

#include "sharpose/attention_ledger.hpp"
#include "sharpose/config.hpp"
#include "sharpose/tokenizer.hpp"

namespace sharpose {

// Single-hidden-layer MLP D -> D -> D with GELU; fuses a promoted patch's
// coarse output into each of its fine children.
struct MergeMlp {
  Tensor w1, b1;
  Tensor w2, b2;

  static MergeMlp init(int dim, Rng& rng, double stddev = 0.02) {
    MergeMlp m;
    m.w1 = Tensor::randn({dim, dim}, rng, stddev, true);
    m.b1 = Tensor::zeros({dim}, true);
    m.w2 = Tensor::randn({dim, dim}, rng, stddev, true);
    m.b2 = Tensor::zeros({dim}, true);
    return m;
  }

  Tensor apply(const Tensor& x) const { return add_rowvec(matmul(gelu(add_rowvec(matmul(x, w1), b1)), w2), b2); }
};

struct FineComposition {
  TokenSequence tokens;
  std::vector<int> parent_map;  // per visual token: parent coarse index
};

// Full fine-granularity token grid with fine positional embeddings.
inline Tensor fine_grid_embed(const ImageTensor& img, const PatchEmbedder& embedder, const ModelConfig& cfg) {
  const ImageTensor fine = resample(img, cfg.scale_fine);
  const Tensor patches = detail::patch_matrix(fine, cfg);
  Tensor vis = add_rowvec(matmul(patches, embedder.proj_w), embedder.proj_b);
  return add(vis, embedder.pos_fine);
}

// Fine-grid flat indices spatially covered by one coarse patch, row-major.
inline std::vector<int> child_indices(int coarse_idx, const ModelConfig& cfg) {
  if (coarse_idx < 0 || coarse_idx >= cfg.n_coarse()) throw ConfigError("child_indices: coarse index out of range");
  const int ratio = static_cast<int>(std::lround(cfg.scale_fine / cfg.scale_coarse));
  const int cr = coarse_idx / cfg.coarse_grid_cols();
  const int cc = coarse_idx % cfg.coarse_grid_cols();
  std::vector<int> out;
  out.reserve(static_cast<std::size_t>(ratio) * ratio);
  for (int dy = 0; dy < ratio; ++dy) {
    for (int dx = 0; dx < ratio; ++dx) {
      out.push_back((cr * ratio + dy) * cfg.fine_grid_cols() + (cc * ratio + dx));
    }
  }
  return out;
}

// Fine-stage input (Eq.-8 layout): carried-over low tokens first, then the
// fine children of each promoted patch (merge_mlp(coarse output) + fine
// embedding), then fresh initial keypoint embeddings. No quality token.
inline FineComposition compose_fine_sequence(const TokenSequence& coarse_out, const SelectionResult& selection,
                                             const Tensor& fine_full, const PatchEmbedder& embedder,
                                             const MergeMlp& merge, const ModelConfig& cfg) {
  if (coarse_out.n_visual() != cfg.n_coarse()) throw ShapeError("compose_fine_sequence: coarse output size mismatch");
  if (static_cast<int>(selection.high_idx.size() + selection.low_idx.size()) != cfg.n_coarse()) {
    throw ShapeError("compose_fine_sequence: selection does not partition the coarse grid");
  }
  if (fine_full.rows() != cfg.n_fine()) throw ShapeError("compose_fine_sequence: fine grid size mismatch");

  FineComposition fc;
  std::vector<Tensor> parts;

  if (!selection.low_idx.empty()) {
    parts.push_back(gather_rows(coarse_out.visual, selection.low_idx));
    const int ccols = cfg.coarse_grid_cols();
    for (int idx : selection.low_idx) {
      fc.tokens.region_map.push_back({idx / ccols, idx % ccols, Granularity::kCoarse});
      fc.parent_map.push_back(idx);
    }
  }

  if (!selection.high_idx.empty()) {
    Tensor merged = merge.apply(gather_rows(coarse_out.visual, selection.high_idx));
    // Row i of `merged` corresponds to high_idx[i]; repeat it across that
    // patch's children and add the matching fine-grid tokens.
    std::vector<int> merged_rows;
    std::vector<int> fine_rows;
    const int fcols = cfg.fine_grid_cols();
    for (std::size_t i = 0; i < selection.high_idx.size(); ++i) {
      for (int child : child_indices(selection.high_idx[i], cfg)) {
        merged_rows.push_back(static_cast<int>(i));
        fine_rows.push_back(child);
        fc.tokens.region_map.push_back({child / fcols, child % fcols, Granularity::kFine});
        fc.parent_map.push_back(selection.high_idx[i]);
      }
    }
    parts.push_back(add(gather_rows(merged, merged_rows), gather_rows(fine_full, fine_rows)));
  }

  fc.tokens.visual = parts.size() == 1 ? parts[0] : concat_rows(parts);
  fc.tokens.keypoints = embedder.keypoint_embed;
  fc.tokens.quality.reset();

  if (fc.tokens.n_visual() != cfg.n_fine_tokens()) throw ShapeError("compose_fine_sequence: token count mismatch");
  return fc;
}

}  // namespace sharpose
