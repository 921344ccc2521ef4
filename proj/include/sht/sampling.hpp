#pragma once

#include <optional>
#include <random>

#include "sht/config.hpp"
#include "sht/core.hpp"
#include "sht/data.hpp"

namespace sht {

enum class Provenance { ImageAugmented, VideoFrames };

/// Two views of one identity: LR inputs, HR targets and, when labeled,
/// ground-truth heatmaps plus the landmarks they were rendered from (HR crop
/// coordinates).
struct TrainingPair {
  ImageTensor img_j, img_k;
  ImageTensor hr_j, hr_k;
  std::optional<HeatmapStack> gt_heatmaps_j, gt_heatmaps_k;
  std::optional<LandmarkSet> landmarks_j, landmarks_k;
  bool labeled = false;
  Provenance provenance = Provenance::ImageAugmented;

  /// Exchanges the roles of j and k.
  TrainingPair swapped() const;
};

using Rng = std::mt19937_64;

struct Augmentation {
  double angle_deg = 0.0;
  double scale = 1.0;
};

/// Clamped Gaussian draws: angle = clamp(σ_a·z, ±max), scale = clamp(1 + σ_s·z′, [min, max]).
Augmentation sample_augmentation(const SHTConfig& cfg, Rng& rng);

/// Map from source image pixels to the sr_output_size² crop: rotation by the
/// augmentation angle and scaling about the bbox center, with the crop side
/// max(w,h)·crop_margin·scale.
Affine2 crop_transform(const BBox& bbox, const Augmentation& aug, int output_size, double crop_margin);

struct AugmentedView {
  ImageTensor lr;
  ImageTensor hr;
  LandmarkSet landmarks;  // HR crop coordinates
  HeatmapStack heatmaps;  // heatmap_size² maps
  Augmentation augmentation;
};

/// One augmented crop of `face`; resamples while more than
/// max_out_of_frame of the landmarks leave the crop, up to
/// max_resample_attempts draws, then LandmarkOutOfFrame.
AugmentedView sample_view(const AnnotatedFace& face, const ImageTensor& image, const SHTConfig& cfg, Rng& rng);

/// Two independent augmentations of one labeled face.
TrainingPair sample_image_pair(const AnnotatedFace& face, const SHTConfig& cfg, Rng& rng);
/// Same as above with the image already in memory.
TrainingPair sample_image_pair(const AnnotatedFace& face, const ImageTensor& image, const SHTConfig& cfg, Rng& rng);

/// Two distinct uniformly drawn frames, resized to sr_output_size²; unlabeled.
TrainingPair sample_video_pair(const VideoSequence& video, const SHTConfig& cfg, Rng& rng);

/// Landmarks in HR crop coordinates mapped onto the heatmap grid.
LandmarkSet to_heatmap_grid(const LandmarkSet& hr_landmarks, const SHTConfig& cfg);

}  // namespace sht
