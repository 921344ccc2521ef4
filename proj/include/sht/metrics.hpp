#pragma once

#include <filesystem>
#include <limits>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "sht/core.hpp"

namespace sht {

/// io: interocular distance; box: sqrt(w·h); diag: sqrt(w² + h²); wid: w.
enum class NormalizationKind { io, box, diag, wid };

std::string to_string(NormalizationKind kind);
NormalizationKind parse_normalization(const std::string& name);

/// Normalizer taken from `gt`.
double nme_normalizer(const LandmarkSet& gt, NormalizationKind kind);
/// Mean point-to-point error divided by the normalizer of `gt`.
double nme(const LandmarkSet& pred, const LandmarkSet& gt, NormalizationKind kind);

/// Area under the cumulative error distribution on [0, threshold], divided by
/// threshold. Exact for the step-function CED: Σᵢ max(0, T − eᵢ) / (n·T).
double ced_auc(const std::vector<double>& errors, double threshold);
/// Fraction of errors strictly greater than `threshold`.
double failure_rate(const std::vector<double>& errors, double threshold);
/// CED sampled at `points` evenly spaced thresholds on [0, max_error].
std::vector<std::pair<double, double>> ced_curve(const std::vector<double>& errors, double max_error, int points);

/// BT.601 luma of a 3×H×W unit-range image, in double precision.
torch::Tensor rgb_to_y(const torch::Tensor& chw);

inline constexpr double kInfinitePsnr = std::numeric_limits<double>::infinity();
/// 10·log10(1/MSE) on luma; identical images give kInfinitePsnr.
double psnr_y(const ImageTensor& a, const ImageTensor& b);
/// Mean SSIM on luma, 11×11 Gaussian window (σ = 1.5), valid positions only.
double ssim_y(const ImageTensor& a, const ImageTensor& b);

struct EvalRecord {
  std::string name;
  double nme = 0.0;
  std::optional<double> psnr;
  std::optional<double> ssim;
};

struct EvalReport {
  NormalizationKind kind = NormalizationKind::io;
  double auc_threshold = 0.1;
  double fr_threshold = 0.1;
  std::vector<EvalRecord> records;
  double mean_nme = 0.0;
  double auc = 0.0;
  double fr = 0.0;
  std::optional<double> mean_psnr;  // may be kInfinitePsnr
  std::optional<double> mean_ssim;

  std::vector<double> errors() const;
};

/// Fills the aggregate fields from `records`.
EvalReport summarize(std::vector<EvalRecord> records, NormalizationKind kind, double auc_threshold,
                     double fr_threshold);

/// JSON document with one record per image and the aggregates. Infinite
/// PSNR is written as the string "inf".
std::string report_to_json(const EvalReport& report);
EvalReport report_from_json(const std::string& text);
void write_report(const EvalReport& report, const std::filesystem::path& path);
/// Two-column "error ced" text.
void write_ced(const std::vector<std::pair<double, double>>& curve, const std::filesystem::path& path);

}  // namespace sht
