#pragma once

#include <torch/torch.h>

#include <vector>

#include "sht/config.hpp"
#include "sht/core.hpp"

namespace sht {

inline constexpr double kScoreEpsilon = 1e-7;

struct TransferInput {
  ImageTensor i_con;
  HeatmapStack h_con;
  HeatmapStack h_tar;
};

/// Per-sample discriminator probabilities, double precision, ε-clamped.
struct DiscriminatorScores {
  torch::Tensor appearance;  // N
  torch::Tensor shape;       // N
};

/// Bilinear resize of N×L×h×w heatmaps to size×size.
torch::Tensor upsample_heatmaps(const torch::Tensor& maps, int size);

/// Pose-attentional transfer block. The image pathway is updated residually
/// under a sigmoid mask computed from the pose pathway; the pose pathway is
/// re-derived from the updated image features and its own branch output.
class TransferBlockImpl : public torch::nn::Module {
 public:
  explicit TransferBlockImpl(int channels);
  std::pair<torch::Tensor, torch::Tensor> forward(const torch::Tensor& img, const torch::Tensor& pose);
  /// Zeroes the last normalization of the image branch, making the image
  /// pathway the identity.
  void zero_residual();

 private:
  torch::nn::Sequential image_branch{nullptr};
  torch::nn::Sequential pose_branch{nullptr};
  torch::nn::Conv2d pose_merge{nullptr};
  torch::nn::BatchNorm2d image_last_bn{nullptr};
};
TORCH_MODULE(TransferBlock);

/// Encoder, transfer-block cascade and decoder. Images are sr_output_size²;
/// heatmaps of any size are resized to the image size before encoding.
class GeneratorImpl : public torch::nn::Module {
 public:
  explicit GeneratorImpl(const SHTConfig& cfg);

  torch::Tensor forward(const torch::Tensor& i_con, const torch::Tensor& h_con, const torch::Tensor& h_tar);

  std::pair<torch::Tensor, torch::Tensor> encode(const torch::Tensor& i_con, const torch::Tensor& h_con,
                                                 const torch::Tensor& h_tar);
  /// Runs the transfer cascade and returns the final image pathway.
  torch::Tensor transfer(torch::Tensor img, torch::Tensor pose);
  torch::Tensor decode(const torch::Tensor& img);

  void zero_transfer_residuals();
  const SHTConfig& config() const { return cfg_; }

 private:
  SHTConfig cfg_;
  torch::nn::Sequential image_encoder{nullptr};
  torch::nn::Sequential pose_encoder{nullptr};
  std::vector<TransferBlock> blocks_;
  torch::nn::Sequential decoder{nullptr};
  torch::nn::Conv2d out{nullptr};
};
TORCH_MODULE(Generator);

/// Strided-conv patch classifier; forward returns one logit per sample (the
/// mean over patch logits).
class PatchDiscriminatorImpl : public torch::nn::Module {
 public:
  PatchDiscriminatorImpl(int in_channels, int width);
  torch::Tensor forward(const torch::Tensor& x);

 private:
  torch::nn::Sequential body{nullptr};
  int in_channels_;
};
TORCH_MODULE(PatchDiscriminator);

/// Generator plus appearance and shape discriminators.
struct FPTN {
  explicit FPTN(const SHTConfig& cfg);
  Generator generator{nullptr};
  PatchDiscriminator d_appearance{nullptr};
  PatchDiscriminator d_shape{nullptr};
};

/// Logistic squash in double precision, clamped into [ε, 1−ε].
torch::Tensor squash_scores(const torch::Tensor& logits);
double clamp_score(double raw);

/// Batched scores: D_A on (i_con ∥ i_query), D_S on (upsampled h_tar ∥ i_query).
torch::Tensor appearance_scores(PatchDiscriminator& d, const torch::Tensor& i_con, const torch::Tensor& i_query);
torch::Tensor shape_scores(PatchDiscriminator& d, const torch::Tensor& h_tar, const torch::Tensor& i_query);
/// Raw logits behind the scores above, for saturation monitoring.
torch::Tensor appearance_logits(PatchDiscriminator& d, const torch::Tensor& i_con, const torch::Tensor& i_query);
torch::Tensor shape_logits(PatchDiscriminator& d, const torch::Tensor& h_tar, const torch::Tensor& i_query);

/// Validated single-sample operations (inference mode).
ImageTensor generator_forward(Generator& g, const TransferInput& inp);
double discriminator_appearance(PatchDiscriminator& d, const ImageTensor& i_con, const ImageTensor& i_query);
double discriminator_shape(PatchDiscriminator& d, const HeatmapStack& h_tar, const ImageTensor& i_query);

}  // namespace sht
