#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "sht/core.hpp"

namespace sht {

/// Every tunable of the model, losses, pair sampler and optimizer.
///
/// Defaults describe the reference configuration (four stacks, 256 pose
/// channels, 64 SR channels, 64×64 input hallucinated to 128×128). The text
/// form is one `key = value` per line; vectors are space separated.
struct SHTConfig {
  // Architecture.
  int num_landmarks = 68;
  int num_stacks = 4;
  int sr_blocks_per_module = 4;
  int input_size = 64;
  int sr_output_size = 128;
  int heatmap_size = 64;
  double heatmap_sigma = 1.5;
  int pose_channels = 256;
  int sr_channels = 64;
  int hourglass_depth = 4;
  int hourglass_skip_residuals = 2;
  int fusion_kernel = 3;
  int fptn_channels = 64;
  int fptn_blocks = 6;
  int fptn_working_size = 32;
  int disc_channels = 64;

  // Objective weights: gamma = (heatmap, image L1, gradient L1),
  // lambda = (adversarial, transfer L1, perceptual L1).
  std::array<double, 3> gamma{1.0, 0.01, 0.01};
  std::array<double, 3> lambda{0.05, 0.01, 0.01};
  bool non_saturating_gan = false;
  std::string perceptual_weights;
  bool drop_perceptual_if_missing = false;

  // Pair sampling and degradation.
  double rotation_max_deg = 30.0;
  double rotation_sigma_deg = 15.0;
  double scale_min = 0.8;
  double scale_max = 1.2;
  double scale_sigma = 0.1;
  double crop_margin = 1.4;
  double max_out_of_frame = 0.2;
  int max_resample_attempts = 10;
  double identity_pair_fraction = 0.0;
  double labeled_fraction = 0.5;
  int degrade_size = 0;  // 0 selects 16 for 128 output, input_size otherwise
  std::optional<IndexPair> interocular;

  // Optimization.
  int batch_size = 16;
  double lr_dhln = 1e-4;
  double lr_fptn = 2e-4;
  int checkpoint_every = 0;
  std::uint64_t seed = 0;
  bool deterministic = true;

  int effective_degrade_size() const;
  int upsample_stages() const;
  int fptn_down_stages() const;

  bool operator==(const SHTConfig&) const = default;
};

/// `perceptual_weights` value selecting the seeded stand-in extractor.
inline const std::string kSurrogateWeights = "surrogate";

/// Rejects the first violated constraint with ErrorCode::InvalidConfig.
SHTConfig validate_config(SHTConfig cfg);

std::string config_to_text(const SHTConfig& cfg);
/// Parses over the defaults; unknown keys and malformed values are errors.
SHTConfig parse_config(const std::string& text);
SHTConfig load_config(const std::filesystem::path& path);
void save_config(const SHTConfig& cfg, const std::filesystem::path& path);

/// Applies one `key=value` override.
void apply_override(SHTConfig& cfg, const std::string& assignment);
std::vector<std::string> config_keys();

/// Reference configuration for the 256×256 variant with 68 landmarks.
SHTConfig reference_config_256();
/// Reduced configuration used for desk-scale toy runs.
SHTConfig toy_config();

}  // namespace sht
