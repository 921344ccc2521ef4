#pragma once

#include <map>
#include <string>
#include <vector>

#include "sht/config.hpp"
#include "sht/data.hpp"
#include "sht/dhln.hpp"
#include "sht/metrics.hpp"

namespace sht {

/// Unaugmented crop of a labeled face: the bbox-centered square scaled to
/// sr_output_size, its degraded LR input, and the map back to the source image.
struct EvalView {
  ImageTensor lr;
  ImageTensor hr;
  Affine2 source_to_crop;
};

EvalView prepare_eval_view(const AnnotatedFace& face, const ImageTensor& image, const SHTConfig& cfg);

/// Resizes an arbitrary RGB image to the network input size (bicubic).
ImageTensor to_network_input(const ImageTensor& image, const SHTConfig& cfg);

/// Final-stack heatmaps decoded on the heatmap grid.
LandmarkSet predict_heatmap_landmarks(DHLN& model, const ImageTensor& lr);
/// Heatmap-grid landmarks mapped onto a width×height image covering the same extent.
LandmarkSet heatmap_to_image(const LandmarkSet& heatmap_landmarks, const SHTConfig& cfg, int width, int height);

struct EvalOptions {
  NormalizationKind kind = NormalizationKind::io;
  double auc_threshold = 0.1;
  double fr_threshold = 0.1;
  bool image_quality = true;
};

/// Per-face landmarks in source-image coordinates predicted by `model`.
LandmarkSet predict_face(DHLN& model, const AnnotatedFace& face, const ImageTensor& image, const SHTConfig& cfg,
                         EvalRecord* quality = nullptr);

/// Evaluates `model` on `faces`; errors are measured in source-image
/// coordinates against the annotations.
EvalReport evaluate_model(DHLN& model, const std::vector<AnnotatedFace>& faces, const SHTConfig& cfg,
                          const EvalOptions& options);
/// Evaluates precomputed predictions keyed by face name.
EvalReport evaluate_predictions(const std::map<std::string, LandmarkSet>& predictions,
                                const std::vector<AnnotatedFace>& faces, const EvalOptions& options);

}  // namespace sht
