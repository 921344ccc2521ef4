#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "sht/config.hpp"
#include "sht/core.hpp"

namespace sht {

/// One labeled face. Items loaded from disk carry a path; generated items
/// carry the image in memory.
struct AnnotatedFace {
  std::string name;
  std::filesystem::path image_path;
  std::optional<ImageTensor> image;
  LandmarkSet landmarks;  // bbox always set
  std::string subject;

  ImageTensor load_image() const;
};

/// Ordered frames of one video; no annotations.
struct VideoSequence {
  std::string id;
  std::vector<std::filesystem::path> frame_paths;
  std::vector<ImageTensor> frames;

  std::size_t size() const { return frames.empty() ? frame_paths.size() : frames.size(); }
  ImageTensor frame(std::size_t i) const;
};

struct DatasetOptions {
  int num_landmarks = 68;
  std::optional<IndexPair> interocular;
  bool strict = false;
  /// Directory holding the landmark files; defaults to the dataset root.
  std::filesystem::path landmark_dir;
  std::string bbox_index = "bboxes.txt";
};

struct LoadReport {
  std::vector<std::string> skipped;  // "name: reason"
};

/// Loads `root/<image>` + `<landmark_dir>/<stem>.txt` + `root/bboxes.txt`.
/// Bad items are skipped and reported unless `strict` is set.
std::vector<AnnotatedFace> load_image_dataset(const std::filesystem::path& root,
                                              const DatasetOptions& options,
                                              LoadReport* report = nullptr);

/// Loads `root/<video_id>/frame_NNNNNN.<ext>`, frames ordered by number.
std::vector<VideoSequence> load_video_dataset(const std::filesystem::path& root);

/// Writes images, landmark files and the bbox index so that
/// load_image_dataset returns the same landmarks.
void write_image_dataset(const std::filesystem::path& root, const std::vector<AnnotatedFace>& faces);
void write_video_dataset(const std::filesystem::path& root, const std::vector<VideoSequence>& videos);

std::vector<Point2> read_landmark_file(const std::filesystem::path& path, int expected_count);
void write_landmark_file(const std::filesystem::path& path, const LandmarkSet& landmarks);
/// 300W-style `.pts` (version / n_points header, braces).
std::vector<Point2> read_pts_file(const std::filesystem::path& path);

std::map<std::string, BBox> read_bbox_index(const std::filesystem::path& path);
void write_bbox_index(const std::filesystem::path& path, const std::map<std::string, BBox>& boxes);

/// Bicubic degradation: HR → bottleneck size → input size, clamped to [0,1].
ImageTensor degrade(const ImageTensor& hr, const SHTConfig& cfg);

// ---------------------------------------------------------------------------
// Procedural toy faces.

struct ToyRanges {
  double center_jitter = 0.04;     // fraction of canvas
  double axis_x_min = 0.30, axis_x_max = 0.35;
  double axis_y_min = 0.37, axis_y_max = 0.42;
  double tilt_max_deg = 12.0;
  double feature_jitter = 0.04;    // fraction of the face axes
  double noise_amplitude = 0.02;
};

struct ToyFaceSpec {
  int canvas = 128;
  Point2 center;
  double axis_x = 40.0;
  double axis_y = 50.0;
  double tilt_rad = 0.0;
  std::vector<Point2> features;  // pixel coordinates, one per landmark
  std::array<double, 3> skin{0.8, 0.74, 0.68};
  double background = 0.35;
  double noise_amplitude = 0.02;
  std::uint64_t seed = 0;
};

ToyFaceSpec sample_toy_face(int canvas, int num_landmarks, const ToyRanges& ranges, std::uint64_t seed);
ImageTensor render_toy_face(const ToyFaceSpec& spec);
/// Face ellipse bounding box.
BBox toy_face_bbox(const ToyFaceSpec& spec);

std::vector<AnnotatedFace> generate_toy_dataset(int n, int canvas, int num_landmarks,
                                                const ToyRanges& ranges, std::uint64_t seed);
/// Short unlabeled clips of one toy identity drifting in position and tilt.
std::vector<VideoSequence> generate_toy_videos(int n_videos, int frames, int canvas, int num_landmarks,
                                               const ToyRanges& ranges, std::uint64_t seed);

/// Mixes a base seed with an index (splitmix64), used for per-item streams.
std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t index);

}  // namespace sht
