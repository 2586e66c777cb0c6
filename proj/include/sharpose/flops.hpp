#pragma once

#include <cstdint>
#include <iomanip>
#include <sstream>
#include <string>

#include "sharpose/config.hpp"

namespace sharpose {

// Multiply-accumulate counts (one MAC = one "FLOP" under the convention the
// paper's GFLOPs follow; a ViT-Base over 192 tokens lands near its reported
// figure only when MACs are counted once).
struct FlopsBreakdown {
  std::uint64_t patch_embed = 0;
  std::uint64_t encoder_coarse = 0;
  std::uint64_t encoder_fine = 0;
  std::uint64_t merge_mlp = 0;
  std::uint64_t decoder = 0;
  std::uint64_t quality_mlp = 0;
  std::uint64_t total = 0;

  double total_gflops() const { return static_cast<double>(total) / 1e9; }
};

namespace detail {

// Per encoder layer over n tokens: QKV + output projection (4 n D^2), MLP
// with 4D hidden (8 n D^2), attention logits and weighting (2 n^2 D).
inline std::uint64_t encoder_macs(std::uint64_t n, std::uint64_t d, std::uint64_t layers) {
  return layers * (12 * n * d * d + 2 * n * n * d);
}

}  // namespace detail

// Analytical MAC count for one inference. refined=false counts the coarse
// stage only (sample exited at the gate).
inline FlopsBreakdown flops_estimate(const ModelConfig& cfg, bool refined) {
  cfg.validate();
  const std::uint64_t d = static_cast<std::uint64_t>(cfg.embed_dim);
  const std::uint64_t m = static_cast<std::uint64_t>(cfg.keypoints);
  const std::uint64_t pdim = static_cast<std::uint64_t>(cfg.patch_h) * cfg.patch_w * cfg.channels;
  const std::uint64_t n_coarse = static_cast<std::uint64_t>(cfg.n_coarse());
  const std::uint64_t n_fine = static_cast<std::uint64_t>(cfg.n_fine());
  const std::uint64_t hw = static_cast<std::uint64_t>(cfg.heatmap_h()) * cfg.heatmap_w();

  FlopsBreakdown f;
  f.patch_embed = n_coarse * pdim * d;
  f.encoder_coarse = detail::encoder_macs(n_coarse + m + 1, d, static_cast<std::uint64_t>(cfg.depth));
  f.decoder = m * d * hw;
  f.quality_mlp = d * (d / 2) + (d / 2) * 1;

  if (refined) {
    f.patch_embed += n_fine * pdim * d;  // the full fine grid is embedded
    const std::uint64_t n_tokens_fine = static_cast<std::uint64_t>(cfg.n_fine_tokens()) + m;
    f.encoder_fine = detail::encoder_macs(n_tokens_fine, d, static_cast<std::uint64_t>(cfg.depth));
    f.merge_mlp = static_cast<std::uint64_t>(cfg.n_high()) * 2 * d * d;
    f.decoder += m * d * hw;
  }

  f.total = f.patch_embed + f.encoder_coarse + f.encoder_fine + f.merge_mlp + f.decoder + f.quality_mlp;
  return f;
}

inline std::string flops_table(const FlopsBreakdown& f) {
  std::ostringstream os;
  auto row = [&os](const char* name, std::uint64_t macs) {
    os << "  " << std::left << std::setw(16) << name << std::right << std::setw(16) << macs << std::setw(12)
       << std::fixed << std::setprecision(4) << (static_cast<double>(macs) / 1e9) << "\n";
  };
  os << "  " << std::left << std::setw(16) << "component" << std::right << std::setw(16) << "MACs" << std::setw(12)
     << "GMACs" << "\n";
  row("patch_embed", f.patch_embed);
  row("encoder_coarse", f.encoder_coarse);
  row("encoder_fine", f.encoder_fine);
  row("merge_mlp", f.merge_mlp);
  row("decoder", f.decoder);
  row("quality_mlp", f.quality_mlp);
  row("total", f.total);
  os << "  (multiply-accumulates counted once)\n";
  return os.str();
}

}  // namespace sharpose
