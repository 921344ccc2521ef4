#pragma once

#include <torch/torch.h>

namespace sht {

/// Pre-activation bottleneck residual (BN-ReLU-conv1×1, BN-ReLU-conv3×3,
/// BN-ReLU-conv1×1) with a 1×1 projection when the width changes.
class BottleneckImpl : public torch::nn::Module {
 public:
  BottleneckImpl(int in_channels, int out_channels);
  torch::Tensor forward(const torch::Tensor& x);

 private:
  torch::nn::BatchNorm2d bn1{nullptr}, bn2{nullptr}, bn3{nullptr};
  torch::nn::Conv2d conv1{nullptr}, conv2{nullptr}, conv3{nullptr}, skip{nullptr};
};
TORCH_MODULE(Bottleneck);

/// conv3×3 → ReLU → conv3×3 plus identity; no normalization.
class ResidualBlockImpl : public torch::nn::Module {
 public:
  explicit ResidualBlockImpl(int channels);
  torch::Tensor forward(const torch::Tensor& x);
  /// Zeroes the second convolution so the block is the identity.
  void zero_residual();

 private:
  torch::nn::Conv2d conv1{nullptr}, conv2{nullptr};
};
TORCH_MODULE(ResidualBlock);

/// Recursive encoder-decoder: max-pool down, bottlenecks, nearest upsample,
/// plus a skip branch at every scale.
class HourglassImpl : public torch::nn::Module {
 public:
  HourglassImpl(int depth, int channels, int skip_residuals);
  torch::Tensor forward(const torch::Tensor& x);

 private:
  torch::nn::Sequential skip_branch{nullptr};
  Bottleneck down{nullptr};
  std::shared_ptr<HourglassImpl> inner;
  Bottleneck bottom{nullptr};
  Bottleneck up{nullptr};
};
TORCH_MODULE(Hourglass);

void zero_conv(torch::nn::Conv2d& conv);
int64_t count_parameters(const torch::nn::Module& module);

}  // namespace sht
