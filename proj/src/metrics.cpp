#include "sht/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include "json.hpp"

namespace F = torch::nn::functional;
using nlohmann::json;

namespace sht {

std::string to_string(NormalizationKind kind) {
  switch (kind) {
    case NormalizationKind::io: return "io";
    case NormalizationKind::box: return "box";
    case NormalizationKind::diag: return "diag";
    case NormalizationKind::wid: return "wid";
  }
  return "io";
}

NormalizationKind parse_normalization(const std::string& name) {
  for (auto k : {NormalizationKind::io, NormalizationKind::box, NormalizationKind::diag, NormalizationKind::wid}) {
    if (to_string(k) == name) return k;
  }
  fail(ErrorCode::InvalidArgument, "unknown normalization '" + name + "' (io, box, diag, wid)");
}

double nme_normalizer(const LandmarkSet& gt, NormalizationKind kind) {
  double d = 0.0;
  if (kind == NormalizationKind::io) {
    require(gt.interocular_indices().has_value(), ErrorCode::DegenerateNormalizer, "io normalization needs interocular indices");
    d = gt.interocular_distance();
  } else {
    require(gt.bbox().has_value(), ErrorCode::DegenerateNormalizer, to_string(kind) + " normalization needs a bbox");
    const auto& b = *gt.bbox();
    switch (kind) {
      case NormalizationKind::box: d = std::sqrt(b.w * b.h); break;
      case NormalizationKind::diag: d = std::sqrt(b.w * b.w + b.h * b.h); break;
      default: d = b.w; break;
    }
  }
  require(d > 0.0 && std::isfinite(d), ErrorCode::DegenerateNormalizer, "normalizer must be positive");
  return d;
}

double nme(const LandmarkSet& pred, const LandmarkSet& gt, NormalizationKind kind) {
  require(pred.size() == gt.size(), ErrorCode::LandmarkCountMismatch,
          "predicted " + std::to_string(pred.size()) + " landmarks, ground truth has " + std::to_string(gt.size()));
  const double d = nme_normalizer(gt, kind);
  double sum = 0.0;
  for (std::size_t i = 0; i < gt.size(); ++i) sum += std::hypot(pred[i].x - gt[i].x, pred[i].y - gt[i].y);
  return sum / static_cast<double>(gt.size()) / d;
}

namespace {

void check_errors(const std::vector<double>& errors, double threshold) {
  require(!errors.empty(), ErrorCode::EmptyErrorList, "error list is empty");
  require(threshold > 0.0, ErrorCode::InvalidArgument, "threshold must be positive");
  for (double e : errors) require(e >= 0.0 && !std::isnan(e), ErrorCode::InvalidArgument, "errors must be nonnegative");
}

}  // namespace

double ced_auc(const std::vector<double>& errors, double threshold) {
  check_errors(errors, threshold);
  // 1 − mean(min(e, t))/t keeps the perfect and all-failed cases exact.
  double clipped = 0.0;
  for (double e : errors) clipped += std::min(e, threshold);
  return 1.0 - clipped / static_cast<double>(errors.size()) / threshold;
}

double failure_rate(const std::vector<double>& errors, double threshold) {
  check_errors(errors, threshold);
  const auto failures = std::count_if(errors.begin(), errors.end(), [&](double e) { return e > threshold; });
  return static_cast<double>(failures) / static_cast<double>(errors.size());
}

std::vector<std::pair<double, double>> ced_curve(const std::vector<double>& errors, double max_error, int points) {
  check_errors(errors, max_error);
  require(points >= 2, ErrorCode::InvalidArgument, "CED curve needs at least two points");
  std::vector<double> sorted = errors;
  std::sort(sorted.begin(), sorted.end());
  std::vector<std::pair<double, double>> curve;
  for (int i = 0; i < points; ++i) {
    const double e = max_error * i / (points - 1);
    const auto below = std::upper_bound(sorted.begin(), sorted.end(), e) - sorted.begin();
    curve.emplace_back(e, static_cast<double>(below) / static_cast<double>(sorted.size()));
  }
  return curve;
}

// ---------------------------------------------------------------------------

torch::Tensor rgb_to_y(const torch::Tensor& chw) {
  require(chw.dim() == 3 && chw.size(0) == 3, ErrorCode::ShapeMismatch, "luma conversion needs a 3×H×W image");
  auto x = chw.to(torch::kFloat64);
  return 16.0 / 255.0 + (65.481 * x[0] + 128.553 * x[1] + 24.966 * x[2]) / 255.0;
}

namespace {

void check_pair(const ImageTensor& a, const ImageTensor& b) {
  require(a.channels() == 3 && b.channels() == 3, ErrorCode::ShapeMismatch, "quality metrics need RGB images");
  require(a.height() == b.height() && a.width() == b.width(), ErrorCode::ShapeMismatch, "images differ in size");
}

constexpr int kWindow = 11;
constexpr double kSigma = 1.5;

torch::Tensor gaussian_window() {
  auto g = torch::empty({kWindow}, torch::kFloat64);
  auto acc = g.accessor<double, 1>();
  double sum = 0.0;
  for (int i = 0; i < kWindow; ++i) {
    const double d = i - kWindow / 2;
    acc[i] = std::exp(-d * d / (2 * kSigma * kSigma));
    sum += acc[i];
  }
  g /= sum;
  return torch::outer(g, g).view({1, 1, kWindow, kWindow});
}

}  // namespace

double psnr_y(const ImageTensor& a, const ImageTensor& b) {
  check_pair(a, b);
  const double mse = (rgb_to_y(a.data()) - rgb_to_y(b.data())).pow(2).mean().item<double>();
  if (mse == 0.0) return kInfinitePsnr;
  return 10.0 * std::log10(1.0 / mse);
}

double ssim_y(const ImageTensor& a, const ImageTensor& b) {
  check_pair(a, b);
  require(a.height() >= kWindow && a.width() >= kWindow, ErrorCode::ImageTooSmall,
          "SSIM needs images of at least 11×11");
  constexpr double c1 = 0.01 * 0.01;
  constexpr double c2 = 0.03 * 0.03;
  const auto w = gaussian_window();
  auto x = rgb_to_y(a.data()).unsqueeze(0).unsqueeze(0);
  auto y = rgb_to_y(b.data()).unsqueeze(0).unsqueeze(0);
  auto filt = [&](const torch::Tensor& t) { return F::conv2d(t, w); };
  auto mx = filt(x);
  auto my = filt(y);
  auto sxx = filt(x * x) - mx * mx;
  auto syy = filt(y * y) - my * my;
  auto sxy = filt(x * y) - mx * my;
  auto map = ((2 * mx * my + c1) * (2 * sxy + c2)) / ((mx * mx + my * my + c1) * (sxx + syy + c2));
  return map.mean().item<double>();
}

// ---------------------------------------------------------------------------

std::vector<double> EvalReport::errors() const {
  std::vector<double> e;
  e.reserve(records.size());
  for (const auto& r : records) e.push_back(r.nme);
  return e;
}

namespace {

std::optional<double> mean_of(const std::vector<EvalRecord>& records, std::optional<double> EvalRecord::*field) {
  double sum = 0.0;
  std::size_t n = 0;
  for (const auto& r : records) {
    if (!(r.*field)) continue;
    sum += *(r.*field);
    ++n;
  }
  if (n == 0) return std::nullopt;
  return sum / static_cast<double>(n);
}

json number_or_inf(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  return v;
}

double read_number(const json& j) {
  if (j.is_string()) {
    const auto s = j.get<std::string>();
    require(s == "inf" || s == "-inf", ErrorCode::InvalidArgument, "unexpected value '" + s + "' in report");
    return s == "inf" ? kInfinitePsnr : -kInfinitePsnr;
  }
  return j.get<double>();
}

}  // namespace

EvalReport summarize(std::vector<EvalRecord> records, NormalizationKind kind, double auc_threshold,
                     double fr_threshold) {
  EvalReport r;
  r.kind = kind;
  r.auc_threshold = auc_threshold;
  r.fr_threshold = fr_threshold;
  r.records = std::move(records);
  const auto e = r.errors();
  require(!e.empty(), ErrorCode::EmptyErrorList, "no evaluated images");
  r.mean_nme = std::accumulate(e.begin(), e.end(), 0.0) / static_cast<double>(e.size());
  r.auc = ced_auc(e, auc_threshold);
  r.fr = failure_rate(e, fr_threshold);
  r.mean_psnr = mean_of(r.records, &EvalRecord::psnr);
  r.mean_ssim = mean_of(r.records, &EvalRecord::ssim);
  return r;
}

std::string report_to_json(const EvalReport& report) {
  json j;
  j["normalization"] = to_string(report.kind);
  j["auc_threshold"] = report.auc_threshold;
  j["fr_threshold"] = report.fr_threshold;
  j["nme"] = report.mean_nme;
  j["auc"] = report.auc;
  j["fr"] = report.fr;
  j["psnr_y"] = report.mean_psnr ? number_or_inf(*report.mean_psnr) : json(nullptr);
  j["ssim_y"] = report.mean_ssim ? json(*report.mean_ssim) : json(nullptr);
  j["images"] = json::array();
  for (const auto& r : report.records) {
    json rec{{"name", r.name}, {"nme", r.nme}};
    rec["psnr_y"] = r.psnr ? number_or_inf(*r.psnr) : json(nullptr);
    rec["ssim_y"] = r.ssim ? json(*r.ssim) : json(nullptr);
    j["images"].push_back(rec);
  }
  return j.dump(2);
}

EvalReport report_from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    fail(ErrorCode::InvalidArgument, std::string("malformed report: ") + e.what());
  }
  EvalReport r;
  r.kind = parse_normalization(j.at("normalization").get<std::string>());
  r.auc_threshold = j.at("auc_threshold").get<double>();
  r.fr_threshold = j.at("fr_threshold").get<double>();
  r.mean_nme = j.at("nme").get<double>();
  r.auc = j.at("auc").get<double>();
  r.fr = j.at("fr").get<double>();
  if (!j.at("psnr_y").is_null()) r.mean_psnr = read_number(j["psnr_y"]);
  if (!j.at("ssim_y").is_null()) r.mean_ssim = j["ssim_y"].get<double>();
  for (const auto& rec : j.at("images")) {
    EvalRecord e;
    e.name = rec.at("name").get<std::string>();
    e.nme = rec.at("nme").get<double>();
    if (!rec.at("psnr_y").is_null()) e.psnr = read_number(rec["psnr_y"]);
    if (!rec.at("ssim_y").is_null()) e.ssim = rec["ssim_y"].get<double>();
    r.records.push_back(std::move(e));
  }
  return r;
}

void write_report(const EvalReport& report, const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  out << report_to_json(report) << '\n';
  require(out.good(), ErrorCode::InvalidArgument, "cannot write report " + path.string());
}

void write_ced(const std::vector<std::pair<double, double>>& curve, const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  out.precision(9);
  for (const auto& [e, c] : curve) out << e << ' ' << c << '\n';
  require(out.good(), ErrorCode::InvalidArgument, "cannot write CED curve " + path.string());
}

}  // namespace sht
