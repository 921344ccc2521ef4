#pragma once

#include <torch/torch.h>

#include <optional>
#include <utility>
#include <vector>

#include "sht/error.hpp"

namespace sht {

enum class ImageRole { LR, SR, HR, Generated };

struct ValueRange {
  double lo = 0.0;
  double hi = 1.0;
};

/// A single C×H×W raster with a declared value range.
///
/// The canonical range is [0,1]; 8-bit data is divided by 255 at the I/O
/// boundary. Construction validates finiteness, channel count and range, so
/// every instance that exists satisfies the invariants.
class ImageTensor {
 public:
  ImageTensor(torch::Tensor chw, ImageRole role, ValueRange range = {});

  /// Builds from interleaved H×W×C floats.
  static ImageTensor from_hwc(const std::vector<float>& hwc, int height, int width, int channels,
                              ImageRole role, ValueRange range = {});
  /// Clamps into `range` before validating.
  static ImageTensor clamped(torch::Tensor chw, ImageRole role, ValueRange range = {});

  const torch::Tensor& data() const { return data_; }
  ImageRole role() const { return role_; }
  ValueRange range() const { return range_; }
  int channels() const { return static_cast<int>(data_.size(0)); }
  int height() const { return static_cast<int>(data_.size(1)); }
  int width() const { return static_cast<int>(data_.size(2)); }

  std::vector<float> to_hwc() const;
  /// 1×C×H×W float view for network input.
  torch::Tensor batched() const { return data_.unsqueeze(0).to(torch::kFloat32); }

  ImageTensor with_role(ImageRole role) const { return ImageTensor(data_, role, range_); }

 private:
  torch::Tensor data_;
  ImageRole role_;
  ValueRange range_;
};

struct Point2 {
  double x = 0.0;
  double y = 0.0;
};

struct BBox {
  double x0 = 0.0;
  double y0 = 0.0;
  double w = 0.0;
  double h = 0.0;

  Point2 center() const { return {x0 + 0.5 * w, y0 + 0.5 * h}; }
};

/// 2-D affine map p' = A p + t.
struct Affine2 {
  double a = 1, b = 0, tx = 0;
  double c = 0, d = 1, ty = 0;

  Point2 apply(Point2 p) const { return {a * p.x + b * p.y + tx, c * p.x + d * p.y + ty}; }
  Affine2 inverse() const;
  /// this ∘ other
  Affine2 compose(const Affine2& other) const;

  static Affine2 similarity(Point2 src_center, Point2 dst_center, double scale, double angle_rad);
};

using IndexPair = std::pair<int, int>;

/// Ordered landmark coordinates in pixel units (pixel centers at integers),
/// with optional normalization anchors.
class LandmarkSet {
 public:
  LandmarkSet() = default;
  explicit LandmarkSet(std::vector<Point2> points, std::optional<BBox> bbox = std::nullopt,
                       std::optional<IndexPair> interocular = std::nullopt);

  std::size_t size() const { return points_.size(); }
  const std::vector<Point2>& points() const { return points_; }
  const Point2& operator[](std::size_t i) const { return points_[i]; }
  const std::optional<BBox>& bbox() const { return bbox_; }
  const std::optional<IndexPair>& interocular_indices() const { return interocular_; }
  double interocular_distance() const;

  LandmarkSet with_bbox(std::optional<BBox> bbox) const;
  LandmarkSet with_interocular(std::optional<IndexPair> io) const;
  /// Maps points through `t`; the bbox becomes the axis-aligned hull of its mapped corners.
  LandmarkSet transformed(const Affine2& t) const;
  /// Changes the pixel grid from `from`×`from` to `to`×`to` (pixel-area aligned).
  LandmarkSet rescaled(double from, double to) const;
  /// Uniform map p → s·p + offset, bbox scaled the same way.
  LandmarkSet scaled(double s, Point2 offset = {}) const;

 private:
  std::vector<Point2> points_;
  std::optional<BBox> bbox_;
  std::optional<IndexPair> interocular_;
};

/// Converts a coordinate on a grid of `from` pixels to a grid of `to` pixels
/// covering the same extent.
inline double rescale_coordinate(double v, double from, double to) {
  return (v + 0.5) * (to / from) - 0.5;
}

/// L×h×w maps with values in [0,1]; invisible landmarks carry all-zero maps.
class HeatmapStack {
 public:
  HeatmapStack(torch::Tensor maps, std::vector<bool> visible);
  explicit HeatmapStack(torch::Tensor maps);

  const torch::Tensor& maps() const { return maps_; }
  const std::vector<bool>& visible() const { return visible_; }
  int num_landmarks() const { return static_cast<int>(maps_.size(0)); }
  int height() const { return static_cast<int>(maps_.size(1)); }
  int width() const { return static_cast<int>(maps_.size(2)); }

 private:
  torch::Tensor maps_;
  std::vector<bool> visible_;
};

/// Pose features P and super-resolution features Q exchanged by one stack.
struct FeatureMaps {
  torch::Tensor pose;  // N×Cp×h×w
  torch::Tensor sr;    // N×Cq×h×w
  int stack_index = 1;
};

void check_finite(const torch::Tensor& t, ErrorCode code, const std::string& what);
void check_shape(const torch::Tensor& t, c10::IntArrayRef expected, const std::string& what);

}  // namespace sht
