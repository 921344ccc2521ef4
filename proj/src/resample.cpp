#include "sht/resample.hpp"

#include <algorithm>
#include <cmath>

namespace sht {

double catmull_rom(double x) {
  constexpr double a = -0.5;
  x = std::abs(x);
  if (x <= 1.0) return ((a + 2.0) * x - (a + 3.0)) * x * x + 1.0;
  if (x < 2.0) return ((a * x - 5.0 * a) * x + 8.0 * a) * x - 4.0 * a;
  return 0.0;
}

torch::Tensor bicubic_weights(int in_size, int out_size) {
  require(in_size > 0 && out_size > 0, ErrorCode::ShapeMismatch, "resize sizes must be positive");
  auto weights = torch::zeros({out_size, in_size}, torch::kFloat64);
  auto acc = weights.accessor<double, 2>();
  const double scale = static_cast<double>(in_size) / out_size;
  const double stretch = std::max(1.0, scale);
  const double support = 2.0 * stretch;
  for (int o = 0; o < out_size; ++o) {
    const double center = (o + 0.5) * scale - 0.5;
    const int first = static_cast<int>(std::floor(center - support)) + 1;
    const int last = static_cast<int>(std::ceil(center + support)) - 1;
    double total = 0.0;
    for (int i = first; i <= last; ++i) {
      const double wgt = catmull_rom((i - center) / stretch);
      if (wgt == 0.0) continue;
      acc[o][std::clamp(i, 0, in_size - 1)] += wgt;
      total += wgt;
    }
    for (int i = 0; i < in_size; ++i) acc[o][i] /= total;
  }
  return weights;
}

torch::Tensor resize_bicubic(const torch::Tensor& chw, int out_height, int out_width) {
  require(chw.dim() == 3, ErrorCode::ShapeMismatch, "resize expects C×H×W");
  const auto in_h = static_cast<int>(chw.size(1));
  const auto in_w = static_cast<int>(chw.size(2));
  if (in_h == out_height && in_w == out_width) return chw.clone();
  auto x = chw.to(torch::kFloat64);
  auto wy = bicubic_weights(in_h, out_height);
  auto wx = bicubic_weights(in_w, out_width);
  auto out = torch::matmul(torch::matmul(wy, x), wx.t());
  return out.to(chw.scalar_type()).contiguous();
}

torch::Tensor warp_affine(const torch::Tensor& chw, const Affine2& dst_to_src, int out_height,
                          int out_width) {
  require(chw.dim() == 3, ErrorCode::ShapeMismatch, "warp expects C×H×W");
  auto src = chw.detach().to(torch::kFloat32).contiguous();
  const auto c = src.size(0);
  const auto h = src.size(1);
  const auto w = src.size(2);
  auto out = torch::empty({c, out_height, out_width}, torch::kFloat32);
  auto s = src.accessor<float, 3>();
  auto d = out.accessor<float, 3>();
  for (int v = 0; v < out_height; ++v) {
    for (int u = 0; u < out_width; ++u) {
      const auto p = dst_to_src.apply({static_cast<double>(u), static_cast<double>(v)});
      const double fx = std::clamp(p.x, 0.0, static_cast<double>(w - 1));
      const double fy = std::clamp(p.y, 0.0, static_cast<double>(h - 1));
      const auto x0 = static_cast<int64_t>(std::floor(fx));
      const auto y0 = static_cast<int64_t>(std::floor(fy));
      const auto x1 = std::min<int64_t>(x0 + 1, w - 1);
      const auto y1 = std::min<int64_t>(y0 + 1, h - 1);
      const double ax = fx - x0;
      const double ay = fy - y0;
      for (int64_t ch = 0; ch < c; ++ch) {
        const double top = s[ch][y0][x0] * (1 - ax) + s[ch][y0][x1] * ax;
        const double bot = s[ch][y1][x0] * (1 - ax) + s[ch][y1][x1] * ax;
        d[ch][v][u] = static_cast<float>(top * (1 - ay) + bot * ay);
      }
    }
  }
  return out.to(chw.scalar_type());
}

}  // namespace sht
