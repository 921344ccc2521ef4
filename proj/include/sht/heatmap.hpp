#pragma once

#include <vector>

#include "sht/core.hpp"

namespace sht {

struct DecodeResult {
  LandmarkSet landmarks;            // heatmap-grid coordinates
  std::vector<double> peak_values;  // map value at the integer argmax
};

/// Gaussian ground-truth maps exp(-d²/2σ²) sampled on the integer pixel grid.
/// Landmarks outside [0,w-1]×[0,h-1] yield all-zero maps flagged invisible.
HeatmapStack render_heatmaps(const LandmarkSet& landmarks, int height, int width, double sigma);

/// Integer argmax (first in row-major order) refined by a quarter pixel
/// toward the larger axis neighbour. Points on the border are not shifted
/// along the clamped axis.
DecodeResult decode_heatmaps(const HeatmapStack& stack);
/// Same decoding on raw network output (L×h×w, any real values).
DecodeResult decode_heatmaps(const torch::Tensor& maps);

}  // namespace sht
