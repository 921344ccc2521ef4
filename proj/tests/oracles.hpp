#pragma once
// Scalar reference implementations used only by tests. They share no code
// with the library and favour plain loops over tensor operations.

#include <torch/torch.h>

#include <algorithm>
#include <cmath>
#include <vector>

namespace oracle {

/// Per-pixel central-difference gradient magnitude with replicate borders.
inline std::vector<double> gradient_map(const std::vector<double>& img, int c, int h, int w) {
  auto at = [&](int ch, int y, int x) {
    x = std::clamp(x, 0, w - 1);
    y = std::clamp(y, 0, h - 1);
    return img[(static_cast<std::size_t>(ch) * h + y) * w + x];
  };
  std::vector<double> out(img.size());
  for (int ch = 0; ch < c; ++ch) {
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        const double ix = at(ch, y, x + 1) - at(ch, y, x - 1);
        const double iy = at(ch, y + 1, x) - at(ch, y - 1, x);
        out[(static_cast<std::size_t>(ch) * h + y) * w + x] = std::sqrt(ix * ix + iy * iy);
      }
    }
  }
  return out;
}

inline std::vector<double> to_vector(const torch::Tensor& t) {
  auto c = t.detach().to(torch::kFloat64).contiguous();
  return std::vector<double>(c.data_ptr<double>(), c.data_ptr<double>() + c.numel());
}

inline double luma(double r, double g, double b) { return 16.0 / 255.0 + (65.481 * r + 128.553 * g + 24.966 * b) / 255.0; }

inline std::vector<double> luma_plane(const torch::Tensor& chw) {
  auto v = to_vector(chw);
  const std::size_t n = v.size() / 3;
  std::vector<double> y(n);
  for (std::size_t i = 0; i < n; ++i) y[i] = luma(v[i], v[n + i], v[2 * n + i]);
  return y;
}

inline double psnr_y(const torch::Tensor& a, const torch::Tensor& b) {
  auto ya = luma_plane(a);
  auto yb = luma_plane(b);
  double se = 0.0;
  for (std::size_t i = 0; i < ya.size(); ++i) se += (ya[i] - yb[i]) * (ya[i] - yb[i]);
  const double mse = se / static_cast<double>(ya.size());
  return 10.0 * std::log10(1.0 / mse);
}

/// Windowed SSIM evaluated position by position.
inline double ssim_y(const torch::Tensor& a, const torch::Tensor& b) {
  const int h = static_cast<int>(a.size(1));
  const int w = static_cast<int>(a.size(2));
  auto ya = luma_plane(a);
  auto yb = luma_plane(b);
  double win[11][11];
  double norm = 0.0;
  for (int i = 0; i < 11; ++i) {
    for (int j = 0; j < 11; ++j) {
      const double di = i - 5, dj = j - 5;
      win[i][j] = std::exp(-(di * di) / (2 * 1.5 * 1.5)) * std::exp(-(dj * dj) / (2 * 1.5 * 1.5));
      norm += win[i][j];
    }
  }
  const double c1 = 1e-4, c2 = 9e-4;
  double total = 0.0;
  int count = 0;
  for (int y = 0; y + 11 <= h; ++y) {
    for (int x = 0; x + 11 <= w; ++x) {
      double mx = 0, my = 0;
      for (int i = 0; i < 11; ++i)
        for (int j = 0; j < 11; ++j) {
          const double k = win[i][j] / norm;
          mx += k * ya[(y + i) * w + x + j];
          my += k * yb[(y + i) * w + x + j];
        }
      double vx = 0, vy = 0, cov = 0;
      for (int i = 0; i < 11; ++i)
        for (int j = 0; j < 11; ++j) {
          const double k = win[i][j] / norm;
          const double dx = ya[(y + i) * w + x + j] - mx;
          const double dy = yb[(y + i) * w + x + j] - my;
          vx += k * dx * dx;
          vy += k * dy * dy;
          cov += k * dx * dy;
        }
      total += ((2 * mx * my + c1) * (2 * cov + c2)) / ((mx * mx + my * my + c1) * (vx + vy + c2));
      ++count;
    }
  }
  return total / count;
}

/// Numerical integral of the CED step function on [0, t] by fine midpoint sampling.
inline double ced_auc_numeric(std::vector<double> errors, double t, int samples = 200000) {
  std::sort(errors.begin(), errors.end());
  double area = 0.0;
  for (int s = 0; s < samples; ++s) {
    const double e = (s + 0.5) * t / samples;
    const auto below = std::upper_bound(errors.begin(), errors.end(), e) - errors.begin();
    area += static_cast<double>(below) / errors.size();
  }
  return area / samples;
}

/// Central finite-difference gradient of a scalar function of one double tensor.
template <typename Fn>
torch::Tensor finite_difference(Fn f, const torch::Tensor& x, double h = 1e-5) {
  torch::NoGradGuard guard;
  auto g = torch::zeros_like(x);
  auto flat = x.view({-1});
  auto gflat = g.view({-1});
  for (int64_t i = 0; i < flat.numel(); ++i) {
    const double v = flat[i].item<double>();
    flat[i] = v + h;
    const double up = f(x);
    flat[i] = v - h;
    const double down = f(x);
    flat[i] = v;
    gflat[i] = (up - down) / (2 * h);
  }
  return g;
}

/// Max relative error ‖a − b‖∞ / max(‖b‖∞, floor).
inline double relative_error(const torch::Tensor& a, const torch::Tensor& b, double floor = 1e-8) {
  const double diff = (a - b).abs().max().item<double>();
  return diff / std::max(b.abs().max().item<double>(), floor);
}

}  // namespace oracle
