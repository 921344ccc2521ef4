#pragma once

#include <torch/torch.h>

#include <array>
#include <filesystem>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "sht/config.hpp"
#include "sht/core.hpp"
#include "sht/fptn.hpp"

namespace sht {

namespace component {
inline const std::string kHeatmapMse = "heatmap_mse";
inline const std::string kImageL1 = "image_l1";
inline const std::string kGradientL1 = "gradient_l1";
inline const std::string kGan = "gan";
inline const std::string kL1Transfer = "l1_transfer";
inline const std::string kPerceptual = "perceptual";
}  // namespace component

/// Weighted sum of named scalar components.
///
/// `total` is always Σ weights[k]·components[k] accumulated in key order;
/// adding two breakdowns adds components key-wise and requires equal weights
/// for shared keys.
struct LossBreakdown {
  torch::Tensor total;
  std::map<std::string, torch::Tensor> components;
  std::map<std::string, double> weights;

  void add(const std::string& name, torch::Tensor value, double weight);
  LossBreakdown& operator+=(const LossBreakdown& other);

  double value() const;
  double component(const std::string& name) const;
  bool has(const std::string& name) const { return components.count(name) > 0; }
  /// Recomputes the weighted sum from the components.
  torch::Tensor weighted_sum() const;
  std::map<std::string, double> values() const;
};

/// Central-difference gradient magnitude with replicate borders, per channel:
/// sqrt(Ix² + Iy² + δ) − sqrt(δ), δ = 1e−12. Accepts C×H×W or N×C×H×W.
torch::Tensor gradient_map(const torch::Tensor& img);
ImageTensor gradient_map(const ImageTensor& img);

/// Heatmap, image L1 and gradient-map L1 terms for a batch.
///
/// `stacks` holds T predictions of shape N×L×h×w. `labeled` (N, bool) is the
/// per-sample γ₁ indicator; unlabeled samples are excluded from the heatmap
/// term entirely, so no gradient reaches the heatmaps through it. Each term
/// is a per-sample mean, summed over the batch; the heatmap term is summed
/// over stacks.
LossBreakdown loss_dh(const std::vector<torch::Tensor>& stacks, const torch::Tensor& h_star,
                      const torch::Tensor& labeled, const torch::Tensor& i_sr, const torch::Tensor& i_hr,
                      const std::array<double, 3>& gamma);

enum class GanRole { Generator, Discriminator };

/// Adversarial value summed over the batch. Discriminator role: the objective
/// Σ log D_A(r) + log D_S(r) + log(1−D_A(f)) + log(1−D_S(f)) to be maximized.
/// Generator role: Σ log(1−D_A(f)) + log(1−D_S(f)) to be minimized, or with
/// `non_saturating` the value −Σ log D_A(f) + log D_S(f).
torch::Tensor loss_gan(const DiscriminatorScores& real, const DiscriminatorScores& fake, GanRole role,
                       bool non_saturating = false);

/// Per-sample mean absolute difference, summed over the batch.
torch::Tensor loss_l1_transfer(const torch::Tensor& i_tar, const torch::Tensor& i_ger);
double loss_l1_transfer(const ImageTensor& i_tar, const ImageTensor& i_ger);

/// Frozen first-block feature map of a VGG-19 style network: ImageNet
/// normalization, conv1_1, ReLU, conv1_2 (the conv1_2 output, before its
/// activation). Spatial size is preserved.
class PerceptualExtractorImpl : public torch::nn::Module {
 public:
  PerceptualExtractorImpl();
  torch::Tensor forward(const torch::Tensor& x);

  /// Loads conv1_1/conv1_2 weights and biases from a tensor dictionary file
  /// (keys conv1_1.weight, conv1_1.bias, conv1_2.weight, conv1_2.bias).
  static std::shared_ptr<PerceptualExtractorImpl> load(const std::filesystem::path& path);
  /// Deterministic random stand-in with the same architecture.
  static std::shared_ptr<PerceptualExtractorImpl> surrogate(std::uint64_t seed);
  void save(const std::filesystem::path& path) const;

  const std::string& identity() const { return identity_; }

 private:
  void freeze();
  torch::nn::Conv2d conv1_1{nullptr}, conv1_2{nullptr};
  torch::Tensor mean_, std_;
  std::string identity_;
};
TORCH_MODULE(PerceptualExtractor);

/// Resolves `cfg.perceptual_weights`: a file path, or "surrogate" for the
/// seeded stand-in. Missing weights raise ExtractorUnavailable unless
/// `drop_perceptual_if_missing` is set, in which case a warning is printed
/// and an empty holder is returned.
PerceptualExtractor make_perceptual_extractor(const SHTConfig& cfg);

torch::Tensor loss_perceptual(const torch::Tensor& i_tar, const torch::Tensor& i_ger, PerceptualExtractor& phi);
double loss_perceptual(const ImageTensor& i_tar, const ImageTensor& i_ger, PerceptualExtractor& phi);

/// Pose-transfer objective for one direction. Generator role: components gan,
/// l1_transfer and perceptual with weights λ₁, λ₂, λ₃ (perceptual omitted
/// when `phi` is empty). Discriminator role: the single component gan holding
/// the negated discriminator objective, weight λ₁.
LossBreakdown loss_pt(const torch::Tensor& i_tar, const torch::Tensor& i_ger, const DiscriminatorScores& real,
                      const DiscriminatorScores& fake, const std::array<double, 3>& lambda, GanRole role,
                      PerceptualExtractor* phi, bool non_saturating = false);

/// Terms of one training pair: the DHLN loss for both members and the two
/// transfer directions.
struct PairLoss {
  LossBreakdown dh;
  LossBreakdown pt_jk;
  LossBreakdown pt_kj;
};

/// Sum over labeled and unlabeled pairs. Unlabeled pairs must carry no
/// heatmap term (their `dh` was computed with γ₁ = 0).
LossBreakdown loss_sht(const std::vector<PairLoss>& labeled, const std::vector<PairLoss>& unlabeled);

}  // namespace sht
