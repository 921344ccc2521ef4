#include <cmath>
#include <numbers>
#include <random>

#include "sht/data.hpp"

namespace sht {

namespace {

// Canonical layout on the unit face ellipse (x right, y down).
constexpr Point2 kCanonical[5] = {
    {-0.38, -0.20},  // left eye
    {0.38, -0.20},   // right eye
    {0.0, 0.12},     // nose tip
    {-0.30, 0.46},   // left mouth corner
    {0.30, 0.46},    // right mouth corner
};

struct BlobStyle {
  double radius;                   // at a 128 canvas
  std::array<double, 3> strength;  // per-channel darkening
};

BlobStyle style_for(int index) {
  switch (index) {
    case 0:
    case 1: return {2.6, {0.85, 0.85, 0.82}};
    case 2: return {2.2, {0.45, 0.5, 0.5}};
    case 3:
    case 4: return {2.4, {0.55, 0.75, 0.72}};
    default: return {1.8, {0.5, 0.55, 0.55}};
  }
}

Point2 canonical_point(int index, int total) {
  if (index < 5) return kCanonical[index];
  // Remaining landmarks trace the lower face contour.
  const int extra = total - 5;
  const int k = index - 5;
  const double t = extra == 1 ? 0.5 : static_cast<double>(k) / (extra - 1);
  const double angle = std::numbers::pi * (0.12 + 0.76 * t);
  return {-0.9 * std::cos(angle), 0.9 * std::sin(angle)};
}

}  // namespace

ToyFaceSpec sample_toy_face(int canvas, int num_landmarks, const ToyRanges& r, std::uint64_t seed) {
  require(canvas > 0 && num_landmarks > 0, ErrorCode::InvalidArgument, "toy face needs canvas and landmarks");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  auto uniform = [&](double lo, double hi) { return lo + (hi - lo) * 0.5 * (u(rng) + 1.0); };

  ToyFaceSpec s;
  s.canvas = canvas;
  s.seed = seed;
  s.noise_amplitude = r.noise_amplitude;
  const double c = canvas;
  s.center = {0.5 * c - 0.5 + r.center_jitter * c * u(rng), 0.5 * c - 0.5 + r.center_jitter * c * u(rng)};
  s.axis_x = uniform(r.axis_x_min, r.axis_x_max) * c;
  s.axis_y = uniform(r.axis_y_min, r.axis_y_max) * c;
  s.tilt_rad = r.tilt_max_deg * std::numbers::pi / 180.0 * u(rng);
  const double tone = uniform(0.62, 0.88);
  s.skin = {tone, tone * uniform(0.9, 0.95), tone * uniform(0.82, 0.9)};
  s.background = uniform(0.2, 0.4);

  const double cs = std::cos(s.tilt_rad);
  const double sn = std::sin(s.tilt_rad);
  s.features.reserve(num_landmarks);
  for (int i = 0; i < num_landmarks; ++i) {
    const Point2 p = canonical_point(i, num_landmarks);
    const double fx = (p.x + r.feature_jitter * u(rng)) * s.axis_x;
    const double fy = (p.y + r.feature_jitter * u(rng)) * s.axis_y;
    s.features.push_back({s.center.x + cs * fx - sn * fy, s.center.y + sn * fx + cs * fy});
  }
  return s;
}

BBox toy_face_bbox(const ToyFaceSpec& s) {
  // Axis-aligned hull of the rotated ellipse.
  const double cs = std::cos(s.tilt_rad);
  const double sn = std::sin(s.tilt_rad);
  const double hw = std::sqrt(s.axis_x * s.axis_x * cs * cs + s.axis_y * s.axis_y * sn * sn);
  const double hh = std::sqrt(s.axis_x * s.axis_x * sn * sn + s.axis_y * s.axis_y * cs * cs);
  return {s.center.x - hw, s.center.y - hh, 2 * hw, 2 * hh};
}

ImageTensor render_toy_face(const ToyFaceSpec& s) {
  const int n = s.canvas;
  const double scale = n / 128.0;
  auto img = torch::empty({3, n, n}, torch::kFloat32);
  auto acc = img.accessor<float, 3>();
  std::mt19937_64 rng(mix_seed(s.seed, 0x70F));
  std::uniform_real_distribution<double> noise(-1.0, 1.0);
  const double cs = std::cos(s.tilt_rad);
  const double sn = std::sin(s.tilt_rad);
  const double edge = std::min(s.axis_x, s.axis_y);

  for (int y = 0; y < n; ++y) {
    for (int x = 0; x < n; ++x) {
      const double dx = x - s.center.x;
      const double dy = y - s.center.y;
      const double u = (cs * dx + sn * dy) / s.axis_x;
      const double v = (-sn * dx + cs * dy) / s.axis_y;
      const double r = std::sqrt(u * u + v * v);
      const double coverage = std::clamp(0.5 - (r - 1.0) * edge, 0.0, 1.0);
      const double bg = s.background * (0.85 + 0.3 * y / n);
      std::array<double, 3> px;
      for (int c = 0; c < 3; ++c) px[c] = coverage * s.skin[c] * (1.0 - 0.12 * r * r) + (1 - coverage) * bg;
      for (std::size_t i = 0; i < s.features.size(); ++i) {
        const auto style = style_for(static_cast<int>(i));
        const double rad = style.radius * scale;
        const double fx = x - s.features[i].x;
        const double fy = y - s.features[i].y;
        const double d = std::exp(-(fx * fx + fy * fy) / (2 * rad * rad));
        for (int c = 0; c < 3; ++c) px[c] *= 1.0 - style.strength[c] * d;
      }
      const double jitter = s.noise_amplitude * noise(rng);
      for (int c = 0; c < 3; ++c) acc[c][y][x] = static_cast<float>(std::clamp(px[c] + jitter, 0.0, 1.0));
    }
  }
  return ImageTensor(std::move(img), ImageRole::HR);
}

std::vector<AnnotatedFace> generate_toy_dataset(int n, int canvas, int num_landmarks,
                                                const ToyRanges& ranges, std::uint64_t seed) {
  require(n > 0, ErrorCode::InvalidArgument, "toy dataset size must be positive");
  std::vector<AnnotatedFace> faces;
  faces.reserve(n);
  for (int i = 0; i < n; ++i) {
    const auto spec = sample_toy_face(canvas, num_landmarks, ranges, mix_seed(seed, i));
    AnnotatedFace f;
    char name[32];
    std::snprintf(name, sizeof(name), "toy_%05d.png", i);
    f.name = name;
    f.subject = name;
    f.image = render_toy_face(spec);
    std::optional<IndexPair> io;
    if (num_landmarks >= 2) io = IndexPair{0, 1};
    f.landmarks = LandmarkSet(spec.features, toy_face_bbox(spec), io);
    faces.push_back(std::move(f));
  }
  return faces;
}

std::vector<VideoSequence> generate_toy_videos(int n_videos, int frames, int canvas, int num_landmarks,
                                               const ToyRanges& ranges, std::uint64_t seed) {
  require(n_videos > 0 && frames > 0, ErrorCode::InvalidArgument, "toy videos need videos and frames");
  std::vector<VideoSequence> videos;
  for (int v = 0; v < n_videos; ++v) {
    const auto base = sample_toy_face(canvas, num_landmarks, ranges, mix_seed(seed, 1000003ull + v));
    std::mt19937_64 rng(mix_seed(seed, 2000003ull + v));
    std::normal_distribution<double> step(0.0, 1.0);
    VideoSequence seq;
    char id[32];
    std::snprintf(id, sizeof(id), "video_%03d", v);
    seq.id = id;
    Point2 drift{0, 0};
    double tilt = 0;
    for (int f = 0; f < frames; ++f) {
      ToyFaceSpec spec = base;
      spec.seed = mix_seed(base.seed, f);
      const double cs = std::cos(tilt);
      const double sn = std::sin(tilt);
      for (auto& p : spec.features) {
        const double dx = p.x - base.center.x;
        const double dy = p.y - base.center.y;
        p = {base.center.x + drift.x + cs * dx - sn * dy, base.center.y + drift.y + sn * dx + cs * dy};
      }
      spec.center = {base.center.x + drift.x, base.center.y + drift.y};
      spec.tilt_rad = base.tilt_rad + tilt;
      seq.frames.push_back(render_toy_face(spec));
      drift.x += 0.6 * step(rng);
      drift.y += 0.6 * step(rng);
      tilt += 0.02 * step(rng);
    }
    videos.push_back(std::move(seq));
  }
  return videos;
}

}  // namespace sht
