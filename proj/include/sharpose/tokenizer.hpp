#pragma once

#include <cmath>
#include <optional>
#include <stdexcept>
#include <vector>

#include "sharpose/config.hpp"
#include "sharpose/image.hpp"
#include "sharpose/rng.hpp"
#include "sharpose/tensor.hpp"

namespace sharpose {

enum class Granularity { kCoarse, kFine };

// Which image region a visual token covers, in its own grid's coordinates.
struct RegionRec {
  int grid_row = 0;
  int grid_col = 0;
  Granularity granularity = Granularity::kCoarse;
};

// Ordered token groups, laid out [visual..., keypoint..., quality?].
struct TokenSequence {
  Tensor visual;                      // [N_v x D]
  Tensor keypoints;                   // [M x D]
  std::optional<Tensor> quality;      // [1 x D]
  std::vector<RegionRec> region_map;  // one record per visual token

  int n_visual() const { return visual.rows(); }
  int n_keypoints() const { return keypoints.rows(); }
  int n_total() const { return n_visual() + n_keypoints() + (quality ? 1 : 0); }
};

// Bilinear resample to (H*s) x (W*s); uses the half-pixel-center convention,
// so s=0.5 averages each 2x2 block exactly. s=1 returns the input unchanged.
inline ImageTensor resample(const ImageTensor& img, double s) {
  const double th = img.h * s;
  const double tw = img.w * s;
  if (std::abs(th - std::lround(th)) > 1e-9 || std::abs(tw - std::lround(tw)) > 1e-9) {
    throw ConfigError("resample: non-integral target dims");
  }
  const int oh = static_cast<int>(std::lround(th));
  const int ow = static_cast<int>(std::lround(tw));
  if (oh == img.h && ow == img.w) return img;
  ImageTensor out = ImageTensor::zeros(oh, ow, img.c);
  const double sy = static_cast<double>(img.h) / oh;
  const double sx = static_cast<double>(img.w) / ow;
  for (int y = 0; y < oh; ++y) {
    const double src_y = (y + 0.5) * sy - 0.5;
    const double fy = std::floor(src_y);
    const int y0 = std::clamp(static_cast<int>(fy), 0, img.h - 1);
    const int y1 = std::clamp(y0 + 1, 0, img.h - 1);
    const double wy = std::clamp(src_y - fy, 0.0, 1.0);
    for (int x = 0; x < ow; ++x) {
      const double src_x = (x + 0.5) * sx - 0.5;
      const double fx = std::floor(src_x);
      const int x0 = std::clamp(static_cast<int>(fx), 0, img.w - 1);
      const int x1 = std::clamp(x0 + 1, 0, img.w - 1);
      const double wx = std::clamp(src_x - fx, 0.0, 1.0);
      for (int ch = 0; ch < img.c; ++ch) {
        const double top = img.at(y0, x0, ch) * (1.0 - wx) + img.at(y0, x1, ch) * wx;
        const double bot = img.at(y1, x0, ch) * (1.0 - wx) + img.at(y1, x1, ch) * wx;
        out.at(y, x, ch) = top * (1.0 - wy) + bot * wy;
      }
    }
  }
  return out;
}

// Splits into (H/p_h)*(W/p_w) flattened patches in row-major grid order.
// Within a patch, pixels are row-major with channels interleaved.
inline std::vector<std::vector<double>> patchify(const ImageTensor& img, int p_h, int p_w) {
  if (p_h <= 0 || p_w <= 0 || img.h % p_h != 0 || img.w % p_w != 0) {
    throw ConfigError("patchify: image dims not divisible by patch size");
  }
  const int rows = img.h / p_h;
  const int cols = img.w / p_w;
  std::vector<std::vector<double>> patches;
  patches.reserve(static_cast<std::size_t>(rows) * cols);
  for (int gr = 0; gr < rows; ++gr) {
    for (int gc = 0; gc < cols; ++gc) {
      std::vector<double> patch(static_cast<std::size_t>(p_h) * p_w * img.c);
      std::size_t k = 0;
      for (int py = 0; py < p_h; ++py) {
        for (int px = 0; px < p_w; ++px) {
          for (int ch = 0; ch < img.c; ++ch) patch[k++] = img.at(gr * p_h + py, gc * p_w + px, ch);
        }
      }
      patches.push_back(std::move(patch));
    }
  }
  return patches;
}

inline ImageTensor unpatchify(const std::vector<std::vector<double>>& patches, int rows, int cols, int p_h, int p_w,
                              int channels) {
  if (patches.size() != static_cast<std::size_t>(rows) * cols) throw ConfigError("unpatchify: patch count mismatch");
  ImageTensor img = ImageTensor::zeros(rows * p_h, cols * p_w, channels);
  for (int gr = 0; gr < rows; ++gr) {
    for (int gc = 0; gc < cols; ++gc) {
      const std::vector<double>& patch = patches[static_cast<std::size_t>(gr) * cols + gc];
      std::size_t k = 0;
      for (int py = 0; py < p_h; ++py) {
        for (int px = 0; px < p_w; ++px) {
          for (int ch = 0; ch < channels; ++ch) img.at(gr * p_h + py, gc * p_w + px, ch) = patch[k++];
        }
      }
    }
  }
  return img;
}

// Learnable embedding tables. The patch projection is shared by both stages
// (patch size in pixels is identical after resampling); keypoint and quality
// embeddings are stage-independent.
struct PatchEmbedder {
  Tensor proj_w;      // [(p_h*p_w*C) x D]
  Tensor proj_b;      // [D]
  Tensor pos_coarse;  // [N_c x D]
  Tensor pos_fine;    // [N_f x D]
  Tensor keypoint_embed;  // [M x D]
  Tensor quality_embed;   // [1 x D]

  static PatchEmbedder init(const ModelConfig& cfg, Rng& rng, double stddev = 0.02) {
    PatchEmbedder e;
    const int pdim = cfg.patch_h * cfg.patch_w * cfg.channels;
    e.proj_w = Tensor::randn({pdim, cfg.embed_dim}, rng, stddev, true);
    e.proj_b = Tensor::zeros({cfg.embed_dim}, true);
    e.pos_coarse = Tensor::randn({cfg.n_coarse(), cfg.embed_dim}, rng, stddev, true);
    e.pos_fine = Tensor::randn({cfg.n_fine(), cfg.embed_dim}, rng, stddev, true);
    e.keypoint_embed = Tensor::randn({cfg.keypoints, cfg.embed_dim}, rng, stddev, true);
    e.quality_embed = Tensor::randn({1, cfg.embed_dim}, rng, stddev, true);
    return e;
  }
};

namespace detail {

// Patch matrix [N x pdim] from a (already resampled) image, with the
// config's channel normalization applied.
inline Tensor patch_matrix(const ImageTensor& img, const ModelConfig& cfg) {
  const auto patches = patchify(img, cfg.patch_h, cfg.patch_w);
  const int pdim = cfg.patch_h * cfg.patch_w * cfg.channels;
  Tensor m = Tensor::zeros({static_cast<int>(patches.size()), pdim});
  double* p = m.data->data();
  const double inv_std = 1.0 / cfg.norm_std;
  for (const auto& patch : patches) {
    for (double v : patch) *p++ = (v - cfg.norm_mean) * inv_std;
  }
  return m;
}

}  // namespace detail

// Eq-1-style coarse sequence: resample by s_c, patchify, project, add coarse
// positional embeddings, then append keypoint and quality tokens.
inline TokenSequence assemble_coarse_sequence(const ImageTensor& img, const PatchEmbedder& embedder,
                                              const ModelConfig& cfg) {
  if (img.h != cfg.input_h || img.w != cfg.input_w || img.c != cfg.channels) {
    throw ConfigError("assemble_coarse_sequence: image dims do not match config");
  }
  const ImageTensor coarse = resample(img, cfg.scale_coarse);
  const Tensor patches = detail::patch_matrix(coarse, cfg);
  Tensor vis = add_rowvec(matmul(patches, embedder.proj_w), embedder.proj_b);
  vis = add(vis, embedder.pos_coarse);

  TokenSequence seq;
  seq.visual = vis;
  seq.keypoints = embedder.keypoint_embed;
  seq.quality = embedder.quality_embed;
  seq.region_map.reserve(static_cast<std::size_t>(cfg.n_coarse()));
  for (int r = 0; r < cfg.coarse_grid_rows(); ++r) {
    for (int c = 0; c < cfg.coarse_grid_cols(); ++c) {
      seq.region_map.push_back({r, c, Granularity::kCoarse});
    }
  }
  return seq;
}

}  // namespace sharpose
