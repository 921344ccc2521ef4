#include "sht/sampling.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "sht/heatmap.hpp"
#include "sht/resample.hpp"

namespace sht {

TrainingPair TrainingPair::swapped() const {
  TrainingPair p{img_k, img_j, hr_k, hr_j, gt_heatmaps_k, gt_heatmaps_j, landmarks_k, landmarks_j, labeled, provenance};
  return p;
}

Augmentation sample_augmentation(const SHTConfig& cfg, Rng& rng) {
  std::normal_distribution<double> z(0.0, 1.0);
  Augmentation a;
  a.angle_deg = std::clamp(cfg.rotation_sigma_deg * z(rng), -cfg.rotation_max_deg, cfg.rotation_max_deg);
  a.scale = std::clamp(1.0 + cfg.scale_sigma * z(rng), cfg.scale_min, cfg.scale_max);
  return a;
}

Affine2 crop_transform(const BBox& bbox, const Augmentation& aug, int output_size, double crop_margin) {
  const double side = std::max(bbox.w, bbox.h) * crop_margin * aug.scale;
  require(side > 0.0, ErrorCode::InvalidArgument, "crop side must be positive");
  const double half = 0.5 * output_size - 0.5;
  return Affine2::similarity(bbox.center(), {half, half}, output_size / side, aug.angle_deg * std::numbers::pi / 180.0);
}

LandmarkSet to_heatmap_grid(const LandmarkSet& hr_landmarks, const SHTConfig& cfg) {
  return hr_landmarks.rescaled(cfg.sr_output_size, cfg.heatmap_size);
}

namespace {

double out_of_frame_fraction(const LandmarkSet& lm, int size) {
  std::size_t out = 0;
  for (const auto& p : lm.points()) {
    if (p.x < 0 || p.y < 0 || p.x > size - 1 || p.y > size - 1) ++out;
  }
  return static_cast<double>(out) / static_cast<double>(lm.size());
}

}  // namespace

AugmentedView sample_view(const AnnotatedFace& face, const ImageTensor& image, const SHTConfig& cfg, Rng& rng) {
  require(face.landmarks.bbox().has_value(), ErrorCode::MissingAnnotation, face.name + ": no bounding box");
  const int s = cfg.sr_output_size;
  for (int attempt = 0; attempt < cfg.max_resample_attempts; ++attempt) {
    const auto aug = sample_augmentation(cfg, rng);
    const auto t = crop_transform(*face.landmarks.bbox(), aug, s, cfg.crop_margin);
    auto landmarks = face.landmarks.transformed(t);
    if (out_of_frame_fraction(landmarks, s) > cfg.max_out_of_frame) continue;
    auto hr = ImageTensor::clamped(warp_affine(image.data(), t.inverse(), s, s), ImageRole::HR);
    auto lr = degrade(hr, cfg);
    auto maps = render_heatmaps(to_heatmap_grid(landmarks, cfg), cfg.heatmap_size, cfg.heatmap_size, cfg.heatmap_sigma);
    return AugmentedView{std::move(lr), std::move(hr), std::move(landmarks), std::move(maps), aug};
  }
  fail(ErrorCode::LandmarkOutOfFrame, face.name + ": landmarks left the crop in " +
                                          std::to_string(cfg.max_resample_attempts) + " augmentation attempts");
}

TrainingPair sample_image_pair(const AnnotatedFace& face, const ImageTensor& image, const SHTConfig& cfg, Rng& rng) {
  auto j = sample_view(face, image, cfg, rng);
  auto k = sample_view(face, image, cfg, rng);
  return TrainingPair{std::move(j.lr),       std::move(k.lr),        std::move(j.hr),
                      std::move(k.hr),       std::move(j.heatmaps),  std::move(k.heatmaps),
                      std::move(j.landmarks), std::move(k.landmarks), true,
                      Provenance::ImageAugmented};
}

TrainingPair sample_image_pair(const AnnotatedFace& face, const SHTConfig& cfg, Rng& rng) {
  return sample_image_pair(face, face.load_image(), cfg, rng);
}

TrainingPair sample_video_pair(const VideoSequence& video, const SHTConfig& cfg, Rng& rng) {
  const auto n = video.size();
  require(n >= 2, ErrorCode::TooFewFrames, video.id + ": pair sampling needs at least two frames");
  std::uniform_int_distribution<std::size_t> first(0, n - 1);
  std::uniform_int_distribution<std::size_t> second(0, n - 2);
  const auto j = first(rng);
  auto k = second(rng);
  if (k >= j) ++k;
  const int s = cfg.sr_output_size;
  auto hr = [&](std::size_t i) {
    auto f = video.frame(i);
    if (f.height() == s && f.width() == s) return f.with_role(ImageRole::HR);
    return ImageTensor::clamped(resize_bicubic(f.data(), s, s), ImageRole::HR);
  };
  auto hr_j = hr(j);
  auto hr_k = hr(k);
  auto lr_j = degrade(hr_j, cfg);
  auto lr_k = degrade(hr_k, cfg);
  return TrainingPair{std::move(lr_j), std::move(lr_k), std::move(hr_j), std::move(hr_k), std::nullopt,
                      std::nullopt,    std::nullopt,    std::nullopt,    false,           Provenance::VideoFrames};
}

}  // namespace sht
