#pragma once

// Procedural stand-in for scanned plate characters: each class has a fixed
// stroke skeleton which is rendered analytically under a random affine map.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <vector>

#include "blprs/dataset.hpp"

namespace blprs {

struct Range {
  double lo = 0.0;
  double hi = 0.0;
};

struct SynthSpec {
  std::size_t per_class_count = 100;
  Range rotation_deg{-15.0, 15.0};
  Range scale{0.85, 1.15};
  Range translate_px{-3.0, 3.0};
  Range shear{-0.15, 0.15};
  double noise_stddev = 0.05;
  std::uint64_t seed = 42;

  void validate() const {
    if (per_class_count < 1) throw Error("synthetic per-class count must be at least 1");
    for (const Range* r : {&rotation_deg, &scale, &translate_px, &shear}) {
      if (!(r->lo <= r->hi)) throw Error("synthetic perturbation range is not ordered");
    }
    if (!(scale.lo > 0.0)) throw Error("synthetic scale must be positive");
    if (!(noise_stddev >= 0.0)) throw Error("synthetic noise must be non-negative");
  }

  /// No perturbation and no noise.
  static SynthSpec clean(std::size_t per_class, std::uint64_t seed) {
    return {per_class, {}, {1.0, 1.0}, {}, {}, 0.0, seed};
  }
};

namespace glyph {

struct Point {
  double x, y;
};

// A stroke is a straight segment or a circular arc, in glyph units where the
// character body spans roughly [-0.9, 0.9] and y grows downwards.
struct Stroke {
  bool arc;
  Point a, b;           // segment endpoints
  Point c;              // arc center
  double r, t0, t1;     // arc radius and angle span, t0 < t1
};

inline Stroke seg(double x0, double y0, double x1, double y1) { return {false, {x0, y0}, {x1, y1}, {}, 0, 0, 0}; }
inline Stroke arc(double cx, double cy, double r, double from_turns, double to_turns) {
  constexpr double tau = 2.0 * std::numbers::pi;
  return {true, {}, {}, {cx, cy}, r, from_turns * tau, to_turns * tau};
}

inline double distance(const Stroke& s, Point p) {
  if (!s.arc) {
    const double dx = s.b.x - s.a.x, dy = s.b.y - s.a.y;
    const double len2 = dx * dx + dy * dy;
    const double t = len2 > 0 ? std::clamp(((p.x - s.a.x) * dx + (p.y - s.a.y) * dy) / len2, 0.0, 1.0) : 0.0;
    return std::hypot(p.x - (s.a.x + t * dx), p.y - (s.a.y + t * dy));
  }
  constexpr double tau = 2.0 * std::numbers::pi;
  const double vx = p.x - s.c.x, vy = p.y - s.c.y;
  double theta = std::atan2(vy, vx);
  // Bring theta into [t0, t0 + tau).
  theta = s.t0 + std::fmod(std::fmod(theta - s.t0, tau) + tau, tau);
  if (theta <= s.t1) return std::abs(std::hypot(vx, vy) - s.r);
  const Point e0{s.c.x + s.r * std::cos(s.t0), s.c.y + s.r * std::sin(s.t0)};
  const Point e1{s.c.x + s.r * std::cos(s.t1), s.c.y + s.r * std::sin(s.t1)};
  return std::min(std::hypot(p.x - e0.x, p.y - e0.y), std::hypot(p.x - e1.x, p.y - e1.y));
}

using Skeleton = std::vector<Stroke>;

/// Stroke skeletons for the sixteen classes: stylised Bangla digits 0-9
/// followed by six headline-bar letters.
inline const std::array<Skeleton, kClassCount>& skeletons() {
  static const std::array<Skeleton, kClassCount> table = {{
      /* 0 */ {arc(0.0, 0.0, 0.6, 0.0, 1.0)},
      /* 1 */ {arc(0.0, -0.35, 0.4, 0.5, 1.0), seg(0.4, -0.35, -0.45, 0.85)},
      /* 2 */ {arc(0.0, -0.4, 0.35, 0.5, 1.25), seg(0.0, -0.05, 0.0, 0.85), seg(-0.55, 0.85, 0.55, 0.85)},
      /* 3 */ {arc(0.0, -0.45, 0.32, 0.5, 1.25), arc(0.0, 0.32, 0.45, 0.75, 1.4)},
      /* 4 */ {arc(0.0, -0.45, 0.32, 0.0, 1.0), arc(0.0, 0.35, 0.45, 0.0, 1.0)},
      /* 5 */ {seg(-0.6, -0.75, 0.6, -0.75), seg(-0.5, -0.75, -0.5, 0.1), arc(0.0, 0.35, 0.5, 0.55, 1.3)},
      /* 6 */ {arc(0.05, 0.35, 0.45, 0.0, 1.0), seg(-0.4, 0.35, 0.35, -0.85)},
      /* 7 */ {seg(-0.6, -0.75, 0.6, -0.75), arc(0.0, 0.0, 0.5, -0.25, 0.25), seg(0.0, 0.5, -0.55, 0.85)},
      /* 8 */ {seg(-0.6, -0.75, 0.6, -0.75), seg(0.0, -0.75, -0.6, 0.85), seg(0.0, -0.75, 0.6, 0.85)},
      /* 9 */ {arc(-0.1, -0.2, 0.45, 0.3, 1.05), seg(0.35, -0.05, 0.35, 0.9)},
      /* ka */ {seg(-0.75, -0.75, 0.75, -0.75), seg(0.1, -0.75, 0.1, 0.9), arc(-0.3, 0.1, 0.35, 0.0, 1.0)},
      /* kha */ {seg(-0.75, -0.75, 0.75, -0.75), arc(-0.35, 0.2, 0.3, 0.0, 1.0), arc(0.35, 0.2, 0.3, 0.0, 1.0)},
      /* ga */ {seg(-0.75, -0.75, 0.75, -0.75), seg(-0.4, -0.75, -0.4, 0.85), seg(0.45, -0.75, 0.45, 0.85),
                seg(-0.4, 0.1, 0.45, 0.1)},
      /* gha */ {seg(-0.75, -0.75, 0.75, -0.75), seg(0.45, -0.75, 0.45, 0.9), arc(-0.15, 0.3, 0.4, 0.25, 1.0)},
      /* la */ {seg(-0.75, -0.75, 0.75, -0.75), arc(0.0, 0.15, 0.55, 0.55, 1.25), seg(0.55, 0.15, 0.55, 0.9)},
      /* ha */ {seg(-0.75, -0.75, 0.75, -0.75), seg(-0.5, -0.75, 0.5, 0.0), seg(0.5, 0.0, -0.5, 0.85)},
  }};
  return table;
}

/// Forward affine map from glyph units to pixel offsets from the image center.
struct Affine {
  double m00 = 1, m01 = 0, m10 = 0, m11 = 1;
  double tx = 0, ty = 0;
};

inline constexpr double kPixelsPerUnit = 12.0;
inline constexpr double kStrokeHalfWidth = 0.13;

/// Renders a skeleton with a one-pixel antialiased edge; ink is 1, background 0.
inline Tensor render(const Skeleton& strokes, const Affine& a) {
  Tensor img({1, kImageSide, kImageSide});
  const double det = a.m00 * a.m11 - a.m01 * a.m10;
  const double i00 = a.m11 / det, i01 = -a.m01 / det, i10 = -a.m10 / det, i11 = a.m00 / det;
  const double center = kImageSide / 2.0;
  // A unit in output pixels corresponds to roughly 1/(ppu*sqrt|det|) glyph units.
  const double px = 1.0 / (kPixelsPerUnit * std::sqrt(std::abs(det)));
  for (std::size_t y = 0; y < kImageSide; ++y) {
    for (std::size_t x = 0; x < kImageSide; ++x) {
      const double ox = (x + 0.5 - center - a.tx) / kPixelsPerUnit;
      const double oy = (y + 0.5 - center - a.ty) / kPixelsPerUnit;
      const Point p{i00 * ox + i01 * oy, i10 * ox + i11 * oy};
      double d = std::numeric_limits<double>::infinity();
      for (const Stroke& s : strokes) d = std::min(d, distance(s, p));
      img(0, y, x) = std::clamp((kStrokeHalfWidth - d) / px + 0.5, 0.0, 1.0);
    }
  }
  return img;
}

}  // namespace glyph

/// Undistorted rendering of a class's skeleton.
inline Tensor base_glyph(std::size_t class_index) {
  return glyph::render(glyph::skeletons().at(class_index), glyph::Affine{});
}

inline Dataset generate_synthetic(const SynthSpec& spec, const LabelMap& labels = LabelMap::bangla_default()) {
  spec.validate();
  Rng rng(spec.seed);
  auto draw = [&](Range r) { return r.lo == r.hi ? r.lo : std::uniform_real_distribution<double>(r.lo, r.hi)(rng); };

  Dataset ds{{}, labels};
  ds.samples.reserve(spec.per_class_count * labels.size());
  for (std::size_t cls = 0; cls < labels.size(); ++cls) {
    for (std::size_t i = 0; i < spec.per_class_count; ++i) {
      const double theta = draw(spec.rotation_deg) * std::numbers::pi / 180.0;
      const double s = draw(spec.scale);
      const double sh = draw(spec.shear);
      const double tx = draw(spec.translate_px);
      const double ty = draw(spec.translate_px);
      // rotation * shear * scale
      const double c = std::cos(theta), n = std::sin(theta);
      glyph::Affine a{s * c, s * (c * sh - n), s * n, s * (n * sh + c), tx, ty};

      Tensor img = glyph::render(glyph::skeletons()[cls], a);
      if (spec.noise_stddev > 0.0) {
        std::normal_distribution<double> noise(0.0, spec.noise_stddev);
        for (double& v : img.data()) v = std::clamp(v + noise(rng), 0.0, 1.0);
      }
      ds.samples.push_back({std::move(img), cls});
    }
  }
  return ds;
}

}  // namespace blprs
