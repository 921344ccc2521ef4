#pragma once

#include <torch/torch.h>

#include <vector>

#include "sht/config.hpp"
#include "sht/core.hpp"
#include "sht/layers.hpp"

namespace sht {

/// Hourglass followed by a bottleneck and a 1×1 conv-BN-ReLU ("final layer").
/// Shape preserving.
class HourglassUnitImpl : public torch::nn::Module {
 public:
  HourglassUnitImpl(int depth, int channels, int skip_residuals);
  torch::Tensor forward(const torch::Tensor& p);
  void zero_final_layer();

 private:
  Hourglass hourglass{nullptr};
  Bottleneck post{nullptr};
  torch::nn::Conv2d final_conv{nullptr};
  torch::nn::BatchNorm2d final_bn{nullptr};
  int channels_;
};
TORCH_MODULE(HourglassUnit);

/// A chain of residual SR blocks; shape preserving.
class SRModuleImpl : public torch::nn::Module {
 public:
  SRModuleImpl(int channels, int blocks);
  torch::Tensor forward(const torch::Tensor& q);
  void zero_residuals();

 private:
  std::vector<ResidualBlock> blocks_;
  int channels_;
};
TORCH_MODULE(SRModule);

/// Pose attention on SR features: q' = q + q ⊙ sigmoid(RB(p)), where RB is a
/// residual block with a 1×1 projection from pose to SR width.
class FuBlock1Impl : public torch::nn::Module {
 public:
  FuBlock1Impl(int pose_channels, int sr_channels);
  torch::Tensor forward(const torch::Tensor& p, const torch::Tensor& q);
  torch::Tensor attention_logits(const torch::Tensor& p);
  void zero_attention();

 private:
  torch::nn::Conv2d conv1{nullptr}, conv2{nullptr}, project{nullptr};
  int pose_channels_, sr_channels_;
};
TORCH_MODULE(FuBlock1);

/// Pose enrichment: p' = p + conv(p ∥ q').
class FuBlock2Impl : public torch::nn::Module {
 public:
  FuBlock2Impl(int pose_channels, int sr_channels, int kernel);
  torch::Tensor forward(const torch::Tensor& p, const torch::Tensor& q_prime);
  void zero_conv();

 private:
  torch::nn::Conv2d conv{nullptr};
  int pose_channels_, sr_channels_;
};
TORCH_MODULE(FuBlock2);

struct DHLNOutput {
  std::vector<torch::Tensor> heatmaps;  // T tensors of N×L×h×w
  torch::Tensor sr_image;               // N×3×S×S in [0,1]
};

struct DHLNTrace {
  DHLNOutput output;
  std::vector<FeatureMaps> hourglass_out;  // P_t, Q_t
  std::vector<FeatureMaps> fused;          // P'_t, Q'_t
};

/// Dual-stream network: T hourglass units carry pose features, T SR modules
/// carry high-resolution features, coupled after every stack by FuBlock1 and
/// FuBlock2. Each stack emits heatmaps from P'_t; the final Q'_T is upsampled
/// by pixel rearrangement into the hallucinated face.
class DHLNImpl : public torch::nn::Module {
 public:
  explicit DHLNImpl(const SHTConfig& cfg);

  DHLNOutput forward(const torch::Tensor& lr);
  /// `fusion = false` skips both fusion blocks (P'_t = P_t, Q'_t = Q_t).
  DHLNTrace trace(const torch::Tensor& lr, bool fusion = true);

  /// Zeroes FuBlock2 convolutions and every SR block's second convolution.
  void zero_init_fusion_and_sr();

  const SHTConfig& config() const { return cfg_; }
  HourglassUnit& hourglass(int t) { return hourglass_[t]; }
  SRModule& sr_module(int t) { return sr_[t]; }
  FuBlock1& fublock1(int t) { return fu1_[t]; }
  FuBlock2& fublock2(int t) { return fu2_[t]; }
  torch::nn::Conv2d& heatmap_head(int t) { return heads_[t]; }

 private:
  SHTConfig cfg_;
  torch::nn::Sequential pose_stem{nullptr};
  torch::nn::Conv2d sr_stem{nullptr};
  std::vector<HourglassUnit> hourglass_;
  std::vector<SRModule> sr_;
  std::vector<FuBlock1> fu1_;
  std::vector<FuBlock2> fu2_;
  std::vector<torch::nn::Conv2d> heads_;
  torch::nn::Sequential sr_upsampler{nullptr};
  torch::nn::Conv2d sr_out{nullptr};
};
TORCH_MODULE(DHLN);

/// Validated single-image inference: checks the input contract, runs the
/// network in inference mode and rejects non-finite activations.
DHLNOutput dhln_forward(DHLN& model, const ImageTensor& lr_image);
/// Batched variant used by the trainer (N×3×s×s); checks finiteness.
DHLNOutput dhln_forward_batch(DHLN& model, const torch::Tensor& lr);

}  // namespace sht
