#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <vector>

#include "sharpose/config.hpp"
#include "sharpose/image.hpp"
#include "sharpose/metrics.hpp"
#include "sharpose/rng.hpp"

namespace sharpose {

// COCO keypoint order: nose, eyes, ears, shoulders, elbows, wrists, hips,
// knees, ankles (left before right).
enum CocoJoint {
  kNose = 0, kLEye, kREye, kLEar, kREar, kLShoulder, kRShoulder, kLElbow, kRElbow,
  kLWrist, kRWrist, kLHip, kRHip, kLKnee, kRKnee, kLAnkle, kRAnkle, kJointCount
};

struct SynthSample {
  ImageTensor image;
  std::vector<Keypoint> keypoints;  // original-image pixels, COCO order
  double area = 1.0;                // tight keypoint bbox area, for OKS
};

namespace detail {

struct Vec2 {
  double x = 0.0, y = 0.0;
};

inline Vec2 operator+(Vec2 a, Vec2 b) { return {a.x + b.x, a.y + b.y}; }
inline Vec2 operator*(double s, Vec2 a) { return {s * a.x, s * a.y}; }

inline Vec2 rotate(Vec2 v, double angle) {
  const double c = std::cos(angle), s = std::sin(angle);
  return {c * v.x - s * v.y, s * v.x + c * v.y};
}

inline double hash01(int x, int y, std::uint64_t salt) {
  std::uint64_t h = salt ^ (static_cast<std::uint64_t>(static_cast<std::uint32_t>(x)) << 32 |
                            static_cast<std::uint32_t>(y));
  h = (h ^ (h >> 30)) * 0xbf58476d1ce4e5b9ULL;
  h = (h ^ (h >> 27)) * 0x94d049bb133111ebULL;
  h ^= h >> 31;
  return static_cast<double>(h >> 11) * 0x1.0p-53;
}

inline void draw_disc(ImageTensor& img, double cx, double cy, double radius, const std::array<double, 3>& color) {
  const int x0 = std::max(0, static_cast<int>(std::floor(cx - radius - 1)));
  const int x1 = std::min(img.w - 1, static_cast<int>(std::ceil(cx + radius + 1)));
  const int y0 = std::max(0, static_cast<int>(std::floor(cy - radius - 1)));
  const int y1 = std::min(img.h - 1, static_cast<int>(std::ceil(cy + radius + 1)));
  for (int y = y0; y <= y1; ++y) {
    for (int x = x0; x <= x1; ++x) {
      const double d = std::hypot(x - cx, y - cy);
      if (d <= radius) {
        for (int ch = 0; ch < 3; ++ch) img.at(y, x, ch) = color[static_cast<std::size_t>(ch)];
      }
    }
  }
}

inline void draw_segment(ImageTensor& img, Vec2 a, Vec2 b, double thickness, const std::array<double, 3>& color) {
  const double len2 = (b.x - a.x) * (b.x - a.x) + (b.y - a.y) * (b.y - a.y);
  const int x0 = std::max(0, static_cast<int>(std::floor(std::min(a.x, b.x) - thickness - 1)));
  const int x1 = std::min(img.w - 1, static_cast<int>(std::ceil(std::max(a.x, b.x) + thickness + 1)));
  const int y0 = std::max(0, static_cast<int>(std::floor(std::min(a.y, b.y) - thickness - 1)));
  const int y1 = std::min(img.h - 1, static_cast<int>(std::ceil(std::max(a.y, b.y) + thickness + 1)));
  for (int y = y0; y <= y1; ++y) {
    for (int x = x0; x <= x1; ++x) {
      double t = 0.0;
      if (len2 > 0.0) t = std::clamp(((x - a.x) * (b.x - a.x) + (y - a.y) * (b.y - a.y)) / len2, 0.0, 1.0);
      const Vec2 p = a + t * Vec2{b.x - a.x, b.y - a.y};
      if (std::hypot(x - p.x, y - p.y) <= thickness) {
        for (int ch = 0; ch < 3; ++ch) img.at(y, x, ch) = color[static_cast<std::size_t>(ch)];
      }
    }
  }
}

}  // namespace detail

// Renders a randomized articulated stick figure over a textured background.
// Deterministic given the seed; every joint lands inside the frame by
// construction. Each visible joint carries a red marker whose center pixel is
// the rounded annotation.
inline SynthSample synth_sample(std::uint64_t seed, const ModelConfig& cfg) {
  using detail::Vec2;
  if (cfg.keypoints != kJointCount) throw ConfigError("synth_sample: synthetic data is COCO-17 only");
  Rng rng = Rng::stream(seed, 0x5f1c);
  const int H = cfg.input_h, W = cfg.input_w;

  // Proportions in torso units.
  const double shoulder_w = rng.uniform(0.50, 0.70);
  const double hip_w = rng.uniform(0.35, 0.50);
  const double upper_arm = rng.uniform(0.45, 0.60);
  const double forearm = rng.uniform(0.40, 0.55);
  const double thigh = rng.uniform(0.50, 0.65);
  const double shin = rng.uniform(0.45, 0.60);
  const double head_r = rng.uniform(0.22, 0.30);
  const double lean = rng.uniform(-0.30, 0.30);

  const Vec2 down = {std::sin(lean), std::cos(lean)};
  const Vec2 side = {std::cos(lean), -std::sin(lean)};

  std::array<Vec2, kJointCount> j{};
  const Vec2 neck = {0.0, 0.0};
  const Vec2 pelvis = neck + 1.0 * down;
  j[kLShoulder] = neck + (shoulder_w / 2) * side;
  j[kRShoulder] = neck + (-shoulder_w / 2) * side;
  j[kLHip] = pelvis + (hip_w / 2) * side;
  j[kRHip] = pelvis + (-hip_w / 2) * side;
  for (int s = 0; s < 2; ++s) {
    const int sh = s == 0 ? kLShoulder : kRShoulder;
    const int el = s == 0 ? kLElbow : kRElbow;
    const int wr = s == 0 ? kLWrist : kRWrist;
    const double ua = rng.uniform(-1.2, 1.2);
    const double fa = ua + rng.uniform(-1.0, 1.0);
    j[el] = j[sh] + upper_arm * detail::rotate(down, ua);
    j[wr] = j[el] + forearm * detail::rotate(down, fa);
    const int hp = s == 0 ? kLHip : kRHip;
    const int kn = s == 0 ? kLKnee : kRKnee;
    const int an = s == 0 ? kLAnkle : kRAnkle;
    const double th = rng.uniform(-0.45, 0.45);
    const double sn = th + rng.uniform(-0.25, 0.55);
    j[kn] = j[hp] + thigh * detail::rotate(down, th);
    j[an] = j[kn] + shin * detail::rotate(down, sn);
  }
  const Vec2 head_center = neck + (-1.15 * head_r) * down;
  j[kNose] = head_center + (0.10 * head_r) * down;
  j[kLEye] = head_center + (0.45 * head_r) * side + (-0.25 * head_r) * down;
  j[kREye] = head_center + (-0.45 * head_r) * side + (-0.25 * head_r) * down;
  j[kLEar] = head_center + (0.90 * head_r) * side;
  j[kREar] = head_center + (-0.90 * head_r) * side;

  double min_x = head_center.x - head_r, max_x = head_center.x + head_r;
  double min_y = head_center.y - head_r, max_y = head_center.y + head_r;
  for (const Vec2& p : j) {
    min_x = std::min(min_x, p.x);
    max_x = std::max(max_x, p.x);
    min_y = std::min(min_y, p.y);
    max_y = std::max(max_y, p.y);
  }

  const double margin = 4.0;
  const double fit = std::min((H - 2 * margin) / (max_y - min_y), (W - 2 * margin) / (max_x - min_x));
  const double scale = fit * rng.uniform(0.62, 0.95);
  const double tx = rng.uniform(margin - scale * min_x, W - margin - scale * max_x);
  const double ty = rng.uniform(margin - scale * min_y, H - margin - scale * max_y);
  auto to_img = [&](Vec2 p) { return Vec2{scale * p.x + tx, scale * p.y + ty}; };

  SynthSample sample;
  sample.keypoints.resize(kJointCount);
  for (int i = 0; i < kJointCount; ++i) {
    const Vec2 p = to_img(j[static_cast<std::size_t>(i)]);
    const int v = rng.uniform() < 0.10 ? 1 : 2;  // occasionally occluded, still labeled
    sample.keypoints[static_cast<std::size_t>(i)] = {p.x, p.y, v};
  }

  // Background: smooth two-tone gradient plus hash noise.
  sample.image = ImageTensor::zeros(H, W, 3);
  const double gdir = rng.uniform(0.0, 6.283185307179586);
  std::array<double, 3> bg0{}, bg1{};
  for (int ch = 0; ch < 3; ++ch) {
    bg0[static_cast<std::size_t>(ch)] = rng.uniform(0.05, 0.45);
    bg1[static_cast<std::size_t>(ch)] = rng.uniform(0.05, 0.45);
  }
  const std::uint64_t noise_salt = rng.next_u64();
  const double gx = std::cos(gdir), gy = std::sin(gdir);
  for (int y = 0; y < H; ++y) {
    for (int x = 0; x < W; ++x) {
      const double t = 0.5 + 0.5 * ((x * gx + y * gy) / std::hypot(W, H));
      for (int ch = 0; ch < 3; ++ch) {
        const double base = bg0[static_cast<std::size_t>(ch)] * (1 - t) + bg1[static_cast<std::size_t>(ch)] * t;
        sample.image.at(y, x, ch) = std::clamp(base + 0.08 * (detail::hash01(x, y, noise_salt + ch) - 0.5), 0.0, 1.0);
      }
    }
  }

  // Body in a light color; thickness scales with the figure.
  const std::array<double, 3> body{rng.uniform(0.75, 0.95), rng.uniform(0.75, 0.95), rng.uniform(0.70, 0.9)};
  const double thick = std::max(1.0, 0.05 * scale);
  auto seg = [&](int a, int b) {
    detail::draw_segment(sample.image, to_img(j[static_cast<std::size_t>(a)]), to_img(j[static_cast<std::size_t>(b)]),
                         thick, body);
  };
  detail::draw_segment(sample.image, to_img(neck), to_img(pelvis), thick * 1.3, body);
  seg(kLShoulder, kRShoulder);
  seg(kLHip, kRHip);
  seg(kLShoulder, kLElbow);
  seg(kLElbow, kLWrist);
  seg(kRShoulder, kRElbow);
  seg(kRElbow, kRWrist);
  seg(kLHip, kLKnee);
  seg(kLKnee, kLAnkle);
  seg(kRHip, kRKnee);
  seg(kRKnee, kRAnkle);
  detail::draw_disc(sample.image, to_img(head_center).x, to_img(head_center).y, scale * head_r, body);

  // Joint markers last so centers stay on top; ring then exact center pixel.
  for (int i = 0; i < kJointCount; ++i) {
    const Keypoint& kp = sample.keypoints[static_cast<std::size_t>(i)];
    if (kp.v != 2) continue;
    detail::draw_disc(sample.image, kp.x, kp.y, 1.3, {1.0, 0.25, 0.25});
    const int px = static_cast<int>(std::lround(kp.x));
    const int py = static_cast<int>(std::lround(kp.y));
    if (px >= 0 && px < W && py >= 0 && py < H) {
      sample.image.at(py, px, 0) = 1.0;
      sample.image.at(py, px, 1) = 0.0;
      sample.image.at(py, px, 2) = 0.0;
    }
  }

  double kmin_x = sample.keypoints[0].x, kmax_x = kmin_x;
  double kmin_y = sample.keypoints[0].y, kmax_y = kmin_y;
  for (const Keypoint& kp : sample.keypoints) {
    kmin_x = std::min(kmin_x, kp.x);
    kmax_x = std::max(kmax_x, kp.x);
    kmin_y = std::min(kmin_y, kp.y);
    kmax_y = std::max(kmax_y, kp.y);
  }
  sample.area = std::max(1.0, (kmax_x - kmin_x) * (kmax_y - kmin_y));
  return sample;
}

// Head size for PCKh normalization: ear-to-ear distance with a floor.
inline double head_norm_length(const SynthSample& s) {
  const double dx = s.keypoints[kLEar].x - s.keypoints[kREar].x;
  const double dy = s.keypoints[kLEar].y - s.keypoints[kREar].y;
  return std::max(2.0, std::hypot(dx, dy));
}

}  // namespace sharpose
