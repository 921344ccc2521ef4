#pragma once

#include "sht/core.hpp"

namespace sht {

/// Catmull-Rom (a = -0.5) cubic convolution weight.
double catmull_rom(double x);

/// out×in resampling matrix for one axis. When shrinking, the kernel is
/// stretched by the scale factor (anti-aliasing); rows sum to one and border
/// taps are clamped (replicate).
torch::Tensor bicubic_weights(int in_size, int out_size);

/// Separable bicubic resize of a C×H×W tensor (computed in double, returned
/// in the input dtype).
torch::Tensor resize_bicubic(const torch::Tensor& chw, int out_height, int out_width);

/// Bilinear resampling of `chw` at src = dst_to_src(dst), replicate border.
torch::Tensor warp_affine(const torch::Tensor& chw, const Affine2& dst_to_src, int out_height,
                          int out_width);

}  // namespace sht
