#include "sht/core.hpp"

#include <cmath>
#include <sstream>

namespace sht {

namespace {

std::string shape_string(c10::IntArrayRef s) {
  std::ostringstream os;
  os << s;
  return os.str();
}

}  // namespace

void check_finite(const torch::Tensor& t, ErrorCode code, const std::string& what) {
  if (!torch::isfinite(t).all().item<bool>()) fail(code, what + " contains NaN or Inf");
}

void check_shape(const torch::Tensor& t, c10::IntArrayRef expected, const std::string& what) {
  if (t.sizes() != expected) {
    fail(ErrorCode::ShapeMismatch,
         what + ": expected " + shape_string(expected) + ", got " + shape_string(t.sizes()));
  }
}

// ---------------------------------------------------------------------------

ImageTensor::ImageTensor(torch::Tensor chw, ImageRole role, ValueRange range)
    : data_(std::move(chw)), role_(role), range_(range) {
  require(data_.defined() && data_.dim() == 3, ErrorCode::ShapeMismatch,
          "ImageTensor needs a C×H×W tensor");
  require(data_.size(0) == 1 || data_.size(0) == 3, ErrorCode::ShapeMismatch,
          "ImageTensor channels must be 1 or 3, got " + std::to_string(data_.size(0)));
  require(data_.size(1) > 0 && data_.size(2) > 0, ErrorCode::ShapeMismatch, "empty image");
  require(range_.lo < range_.hi, ErrorCode::InvalidArgument, "empty value range");
  require(data_.is_floating_point(), ErrorCode::InvalidArgument, "ImageTensor must be real-valued");
  auto detached = data_.detach();
  check_finite(detached, ErrorCode::NonFiniteActivation, "ImageTensor");
  const double lo = detached.min().item<double>();
  const double hi = detached.max().item<double>();
  if (lo < range_.lo || hi > range_.hi) {
    fail(ErrorCode::InvalidArgument, "ImageTensor values [" + std::to_string(lo) + ", " +
                                         std::to_string(hi) + "] outside declared range");
  }
}

ImageTensor ImageTensor::from_hwc(const std::vector<float>& hwc, int height, int width,
                                  int channels, ImageRole role, ValueRange range) {
  require(static_cast<std::size_t>(height) * width * channels == hwc.size(),
          ErrorCode::ShapeMismatch, "buffer size does not match H×W×C");
  auto t = torch::from_blob(const_cast<float*>(hwc.data()), {height, width, channels},
                            torch::kFloat32)
               .permute({2, 0, 1})
               .contiguous()
               .clone();
  return ImageTensor(std::move(t), role, range);
}

ImageTensor ImageTensor::clamped(torch::Tensor chw, ImageRole role, ValueRange range) {
  return ImageTensor(chw.clamp(range.lo, range.hi), role, range);
}

std::vector<float> ImageTensor::to_hwc() const {
  auto t = data_.detach().to(torch::kFloat32).permute({1, 2, 0}).contiguous();
  return std::vector<float>(t.data_ptr<float>(), t.data_ptr<float>() + t.numel());
}

// ---------------------------------------------------------------------------

Affine2 Affine2::inverse() const {
  const double det = a * d - b * c;
  require(std::abs(det) > 1e-15, ErrorCode::InvalidArgument, "singular affine transform");
  Affine2 inv;
  inv.a = d / det;
  inv.b = -b / det;
  inv.c = -c / det;
  inv.d = a / det;
  inv.tx = -(inv.a * tx + inv.b * ty);
  inv.ty = -(inv.c * tx + inv.d * ty);
  return inv;
}

Affine2 Affine2::compose(const Affine2& o) const {
  Affine2 r;
  r.a = a * o.a + b * o.c;
  r.b = a * o.b + b * o.d;
  r.c = c * o.a + d * o.c;
  r.d = c * o.b + d * o.d;
  r.tx = a * o.tx + b * o.ty + tx;
  r.ty = c * o.tx + d * o.ty + ty;
  return r;
}

Affine2 Affine2::similarity(Point2 src_center, Point2 dst_center, double scale, double angle_rad) {
  // Scale and rotate about src_center, then translate it onto dst_center.
  const double cs = std::cos(angle_rad) * scale;
  const double sn = std::sin(angle_rad) * scale;
  Affine2 t;
  t.a = cs;
  t.b = -sn;
  t.c = sn;
  t.d = cs;
  t.tx = dst_center.x - (t.a * src_center.x + t.b * src_center.y);
  t.ty = dst_center.y - (t.c * src_center.x + t.d * src_center.y);
  return t;
}

// ---------------------------------------------------------------------------

LandmarkSet::LandmarkSet(std::vector<Point2> points, std::optional<BBox> bbox,
                         std::optional<IndexPair> interocular)
    : points_(std::move(points)), bbox_(bbox), interocular_(interocular) {
  require(!points_.empty(), ErrorCode::InvalidArgument, "LandmarkSet needs at least one point");
  for (const auto& p : points_) {
    require(std::isfinite(p.x) && std::isfinite(p.y), ErrorCode::InvalidArgument,
            "non-finite landmark coordinate");
  }
  if (bbox_) {
    require(bbox_->w > 0 && bbox_->h > 0, ErrorCode::InvalidArgument,
            "bbox width and height must be positive");
  }
  if (interocular_) {
    const auto [i, j] = *interocular_;
    const int n = static_cast<int>(points_.size());
    require(i >= 0 && j >= 0 && i < n && j < n && i != j, ErrorCode::InvalidArgument,
            "interocular indices out of range");
    require(interocular_distance() > 0, ErrorCode::DegenerateNormalizer,
            "interocular distance must be positive");
  }
}

double LandmarkSet::interocular_distance() const {
  require(interocular_.has_value(), ErrorCode::InvalidArgument, "interocular indices not set");
  const auto& p = points_[interocular_->first];
  const auto& q = points_[interocular_->second];
  return std::hypot(p.x - q.x, p.y - q.y);
}

LandmarkSet LandmarkSet::with_bbox(std::optional<BBox> bbox) const {
  return LandmarkSet(points_, bbox, interocular_);
}

LandmarkSet LandmarkSet::with_interocular(std::optional<IndexPair> io) const {
  return LandmarkSet(points_, bbox_, io);
}

LandmarkSet LandmarkSet::transformed(const Affine2& t) const {
  std::vector<Point2> out;
  out.reserve(points_.size());
  for (const auto& p : points_) out.push_back(t.apply(p));
  std::optional<BBox> box;
  if (bbox_) {
    const Point2 corners[4] = {{bbox_->x0, bbox_->y0},
                               {bbox_->x0 + bbox_->w, bbox_->y0},
                               {bbox_->x0, bbox_->y0 + bbox_->h},
                               {bbox_->x0 + bbox_->w, bbox_->y0 + bbox_->h}};
    double x0 = 1e300, y0 = 1e300, x1 = -1e300, y1 = -1e300;
    for (const auto& c : corners) {
      const auto m = t.apply(c);
      x0 = std::min(x0, m.x);
      y0 = std::min(y0, m.y);
      x1 = std::max(x1, m.x);
      y1 = std::max(y1, m.y);
    }
    box = BBox{x0, y0, x1 - x0, y1 - y0};
  }
  return LandmarkSet(std::move(out), box, interocular_);
}

LandmarkSet LandmarkSet::rescaled(double from, double to) const {
  std::vector<Point2> out;
  out.reserve(points_.size());
  for (const auto& p : points_) {
    out.push_back({rescale_coordinate(p.x, from, to), rescale_coordinate(p.y, from, to)});
  }
  std::optional<BBox> box;
  if (bbox_) {
    const double s = to / from;
    box = BBox{rescale_coordinate(bbox_->x0, from, to), rescale_coordinate(bbox_->y0, from, to),
               bbox_->w * s, bbox_->h * s};
  }
  return LandmarkSet(std::move(out), box, interocular_);
}

LandmarkSet LandmarkSet::scaled(double s, Point2 offset) const {
  require(s > 0, ErrorCode::InvalidArgument, "scale must be positive");
  std::vector<Point2> out;
  out.reserve(points_.size());
  for (const auto& p : points_) out.push_back({s * p.x + offset.x, s * p.y + offset.y});
  std::optional<BBox> box;
  if (bbox_) box = BBox{s * bbox_->x0 + offset.x, s * bbox_->y0 + offset.y, s * bbox_->w, s * bbox_->h};
  return LandmarkSet(std::move(out), box, interocular_);
}

// ---------------------------------------------------------------------------

HeatmapStack::HeatmapStack(torch::Tensor maps, std::vector<bool> visible)
    : maps_(std::move(maps)), visible_(std::move(visible)) {
  require(maps_.defined() && maps_.dim() == 3, ErrorCode::ShapeMismatch,
          "HeatmapStack needs an L×h×w tensor");
  require(static_cast<std::size_t>(maps_.size(0)) == visible_.size(), ErrorCode::ShapeMismatch,
          "visibility flags do not match landmark count");
  auto detached = maps_.detach();
  check_finite(detached, ErrorCode::NonFiniteActivation, "HeatmapStack");
  require(detached.min().item<double>() >= 0.0 && detached.max().item<double>() <= 1.0,
          ErrorCode::InvalidArgument, "heatmap values must lie in [0,1]");
  auto peaks = std::get<0>(detached.flatten(1).max(1));
  for (std::size_t i = 0; i < visible_.size(); ++i) {
    if (visible_[i]) {
      require(peaks[static_cast<int64_t>(i)].item<double>() > 0.0, ErrorCode::InvalidArgument,
              "visible heatmap " + std::to_string(i) + " has no positive peak");
    }
  }
}

namespace {

std::vector<bool> visible_from_peaks(const torch::Tensor& maps) {
  require(maps.defined() && maps.dim() == 3, ErrorCode::ShapeMismatch,
          "HeatmapStack needs an L×h×w tensor");
  auto peaks = std::get<0>(maps.detach().flatten(1).max(1)).to(torch::kFloat64);
  std::vector<bool> visible(maps.size(0));
  for (int64_t i = 0; i < maps.size(0); ++i) visible[i] = peaks[i].item<double>() > 0.0;
  return visible;
}

}  // namespace

HeatmapStack::HeatmapStack(torch::Tensor maps)
    : HeatmapStack(maps, visible_from_peaks(maps)) {}

}  // namespace sht
