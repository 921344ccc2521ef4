#include "sht/heatmap.hpp"

#include <cmath>

namespace sht {

HeatmapStack render_heatmaps(const LandmarkSet& landmarks, int height, int width, double sigma) {
  require(sigma > 0, ErrorCode::InvalidSigma, "sigma must be positive");
  require(height > 0 && width > 0, ErrorCode::ShapeMismatch, "heatmap resolution must be positive");
  const auto n = static_cast<int64_t>(landmarks.size());
  auto maps = torch::zeros({n, height, width}, torch::kFloat32);
  auto acc = maps.accessor<float, 3>();
  std::vector<bool> visible(n, false);
  const double inv = 1.0 / (2.0 * sigma * sigma);
  for (int64_t i = 0; i < n; ++i) {
    const auto& p = landmarks[i];
    if (p.x < 0 || p.y < 0 || p.x > width - 1 || p.y > height - 1) continue;
    visible[i] = true;
    for (int y = 0; y < height; ++y) {
      const double dy = y - p.y;
      for (int x = 0; x < width; ++x) {
        const double dx = x - p.x;
        acc[i][y][x] = static_cast<float>(std::exp(-(dx * dx + dy * dy) * inv));
      }
    }
  }
  return HeatmapStack(std::move(maps), std::move(visible));
}

DecodeResult decode_heatmaps(const HeatmapStack& stack) { return decode_heatmaps(stack.maps()); }

DecodeResult decode_heatmaps(const torch::Tensor& maps) {
  require(maps.dim() == 3, ErrorCode::ShapeMismatch, "decode expects an L×h×w tensor");
  auto m = maps.detach().to(torch::kFloat64).contiguous();
  const auto n = m.size(0);
  const auto h = m.size(1);
  const auto w = m.size(2);
  auto acc = m.accessor<double, 3>();

  std::vector<Point2> points;
  std::vector<double> peaks;
  points.reserve(n);
  peaks.reserve(n);
  for (int64_t i = 0; i < n; ++i) {
    double best = -INFINITY;
    double worst = INFINITY;
    int64_t bx = 0, by = 0;
    for (int64_t y = 0; y < h; ++y) {
      for (int64_t x = 0; x < w; ++x) {
        const double v = acc[i][y][x];
        if (v > best) {
          best = v;
          bx = x;
          by = y;
        }
        worst = std::min(worst, v);
      }
    }
    if (!(best > worst)) {
      fail(ErrorCode::DegenerateHeatmap, "heatmap " + std::to_string(i) + " is constant");
    }
    double px = static_cast<double>(bx);
    double py = static_cast<double>(by);
    if (bx > 0 && bx < w - 1) {
      const double l = acc[i][by][bx - 1];
      const double r = acc[i][by][bx + 1];
      if (r > l) px += 0.25;
      else if (l > r) px -= 0.25;
    }
    if (by > 0 && by < h - 1) {
      const double u = acc[i][by - 1][bx];
      const double d = acc[i][by + 1][bx];
      if (d > u) py += 0.25;
      else if (u > d) py -= 0.25;
    }
    points.push_back({px, py});
    peaks.push_back(best);
  }
  return {LandmarkSet(std::move(points)), std::move(peaks)};
}

}  // namespace sht
