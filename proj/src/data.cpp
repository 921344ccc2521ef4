#include "sht/data.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <iomanip>
#include <regex>
#include <sstream>

#include "sht/image_io.hpp"
#include "sht/resample.hpp"

namespace fs = std::filesystem;

namespace sht {

ImageTensor AnnotatedFace::load_image() const {
  if (image) return *image;
  return read_image(image_path, ImageRole::HR);
}

ImageTensor VideoSequence::frame(std::size_t i) const {
  require(i < size(), ErrorCode::InvalidArgument, "frame index out of range");
  if (!frames.empty()) return frames[i];
  return read_image(frame_paths[i], ImageRole::HR);
}

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t index) {
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ull * (index + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

// ---------------------------------------------------------------------------
// Annotation files.

namespace {

bool parse_number(const std::string& tok, double& out) {
  auto res = std::from_chars(tok.data(), tok.data() + tok.size(), out);
  return res.ec == std::errc() && res.ptr == tok.data() + tok.size();
}

std::string format_coord(double v) {
  std::ostringstream os;
  os << std::setprecision(9) << v;
  return os.str();
}

}  // namespace

std::vector<Point2> read_landmark_file(const fs::path& path, int expected_count) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::MissingAnnotation, "no landmark file " + path.string());
  std::vector<Point2> points;
  int line_no = 0;
  for (std::string line; std::getline(in, line);) {
    ++line_no;
    std::istringstream is(line);
    std::vector<std::string> toks;
    for (std::string t; is >> t;) toks.push_back(t);
    if (toks.empty()) continue;
    Point2 p;
    if (toks.size() != 2 || !parse_number(toks[0], p.x) || !parse_number(toks[1], p.y)) {
      fail(ErrorCode::MalformedLandmarkFile,
           path.string() + ":" + std::to_string(line_no) + ": expected 'x y'");
    }
    points.push_back(p);
  }
  if (static_cast<int>(points.size()) != expected_count) {
    fail(ErrorCode::MalformedLandmarkFile,
         path.string() + ":" + std::to_string(line_no) + ": expected " +
             std::to_string(expected_count) + " landmarks, found " + std::to_string(points.size()));
  }
  return points;
}

void write_landmark_file(const fs::path& path, const LandmarkSet& landmarks) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) fail(ErrorCode::InvalidArgument, "cannot write " + path.string());
  for (const auto& p : landmarks.points()) out << format_coord(p.x) << ' ' << format_coord(p.y) << '\n';
}

std::vector<Point2> read_pts_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::MissingAnnotation, "no pts file " + path.string());
  std::vector<Point2> points;
  int declared = -1;
  bool inside = false;
  int line_no = 0;
  for (std::string line; std::getline(in, line);) {
    ++line_no;
    std::istringstream is(line);
    std::string first;
    if (!(is >> first)) continue;
    if (first == "version:") continue;
    if (first == "n_points:") {
      is >> declared;
      continue;
    }
    if (first == "{") {
      inside = true;
      continue;
    }
    if (first == "}") break;
    std::string second;
    Point2 p;
    if (!inside || !(is >> second) || !parse_number(first, p.x) || !parse_number(second, p.y)) {
      fail(ErrorCode::MalformedLandmarkFile, path.string() + ":" + std::to_string(line_no));
    }
    points.push_back(p);
  }
  if (declared >= 0 && declared != static_cast<int>(points.size())) {
    fail(ErrorCode::MalformedLandmarkFile, path.string() + ": n_points does not match body");
  }
  return points;
}

std::map<std::string, BBox> read_bbox_index(const fs::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::MissingAnnotation, "no bbox index " + path.string());
  std::map<std::string, BBox> boxes;
  int line_no = 0;
  for (std::string line; std::getline(in, line);) {
    ++line_no;
    std::istringstream is(line);
    std::string name;
    if (!(is >> name)) continue;
    std::string t[4];
    BBox b;
    if (!(is >> t[0] >> t[1] >> t[2] >> t[3]) || !parse_number(t[0], b.x0) ||
        !parse_number(t[1], b.y0) || !parse_number(t[2], b.w) || !parse_number(t[3], b.h)) {
      fail(ErrorCode::MalformedLandmarkFile,
           path.string() + ":" + std::to_string(line_no) + ": expected 'name x0 y0 w h'");
    }
    boxes[name] = b;
  }
  return boxes;
}

void write_bbox_index(const fs::path& path, const std::map<std::string, BBox>& boxes) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) fail(ErrorCode::InvalidArgument, "cannot write " + path.string());
  for (const auto& [name, b] : boxes) {
    out << name << ' ' << format_coord(b.x0) << ' ' << format_coord(b.y0) << ' '
        << format_coord(b.w) << ' ' << format_coord(b.h) << '\n';
  }
}

// ---------------------------------------------------------------------------
// Datasets.

namespace {

fs::path landmark_path_for(const fs::path& dir, const std::string& name) {
  return dir / fs::path(name).replace_extension(".txt");
}

}  // namespace

std::vector<AnnotatedFace> load_image_dataset(const fs::path& root, const DatasetOptions& options,
                                              LoadReport* report) {
  require(fs::is_directory(root), ErrorCode::MissingAnnotation, "dataset root " + root.string() + " missing");
  const auto boxes = read_bbox_index(root / options.bbox_index);
  const fs::path lm_dir = options.landmark_dir.empty() ? root : options.landmark_dir;

  std::vector<fs::path> images;
  for (const auto& entry : fs::recursive_directory_iterator(root)) {
    if (entry.is_regular_file() && is_image_file(entry.path())) images.push_back(entry.path());
  }
  std::sort(images.begin(), images.end());

  std::vector<AnnotatedFace> faces;
  for (const auto& img : images) {
    const auto name = fs::relative(img, root).generic_string();
    try {
      const auto it = boxes.find(name);
      if (it == boxes.end()) fail(ErrorCode::MissingAnnotation, name + " has no bbox entry");
      auto points = read_landmark_file(landmark_path_for(lm_dir, name), options.num_landmarks);
      const auto image = read_image(img);
      const BBox& b = it->second;
      const bool intersects = b.x0 < image.width() && b.y0 < image.height() && b.x0 + b.w > 0 &&
                              b.y0 + b.h > 0;
      if (!intersects) fail(ErrorCode::MissingAnnotation, name + " bbox lies outside the image");
      AnnotatedFace face;
      face.name = name;
      face.image_path = img;
      face.landmarks = LandmarkSet(std::move(points), b, options.interocular);
      faces.push_back(std::move(face));
    } catch (const Error& e) {
      if (options.strict) throw;
      if (report) report->skipped.push_back(name + ": " + e.what());
    }
  }
  return faces;
}

std::vector<VideoSequence> load_video_dataset(const fs::path& root) {
  require(fs::is_directory(root), ErrorCode::EmptyVideo, "video root " + root.string() + " missing");
  static const std::regex frame_re(R"(frame_(\d+)\.[A-Za-z]+)");
  std::vector<fs::path> dirs;
  for (const auto& entry : fs::directory_iterator(root)) {
    if (entry.is_directory()) dirs.push_back(entry.path());
  }
  std::sort(dirs.begin(), dirs.end());
  std::vector<VideoSequence> videos;
  for (const auto& dir : dirs) {
    std::vector<std::pair<long, fs::path>> numbered;
    for (const auto& entry : fs::directory_iterator(dir)) {
      std::smatch m;
      const auto fname = entry.path().filename().string();
      if (entry.is_regular_file() && is_image_file(entry.path()) && std::regex_match(fname, m, frame_re)) {
        numbered.emplace_back(std::stol(m[1].str()), entry.path());
      }
    }
    if (numbered.empty()) fail(ErrorCode::EmptyVideo, dir.string() + " has no frames");
    std::sort(numbered.begin(), numbered.end());
    VideoSequence seq;
    seq.id = dir.filename().string();
    for (auto& [_, p] : numbered) seq.frame_paths.push_back(p);
    videos.push_back(std::move(seq));
  }
  return videos;
}

void write_image_dataset(const fs::path& root, const std::vector<AnnotatedFace>& faces) {
  fs::create_directories(root);
  std::map<std::string, BBox> boxes;
  for (const auto& f : faces) {
    require(f.landmarks.bbox().has_value(), ErrorCode::MissingAnnotation, f.name + " has no bbox");
    write_image(f.load_image(), root / f.name);
    write_landmark_file(landmark_path_for(root, f.name), f.landmarks);
    boxes[f.name] = *f.landmarks.bbox();
  }
  write_bbox_index(root / "bboxes.txt", boxes);
}

void write_video_dataset(const fs::path& root, const std::vector<VideoSequence>& videos) {
  for (const auto& v : videos) {
    for (std::size_t i = 0; i < v.size(); ++i) {
      std::ostringstream name;
      name << "frame_" << std::setw(6) << std::setfill('0') << i << ".png";
      write_image(v.frame(i), root / v.id / name.str());
    }
  }
}

// ---------------------------------------------------------------------------

ImageTensor degrade(const ImageTensor& hr, const SHTConfig& cfg) {
  require(hr.height() == cfg.sr_output_size && hr.width() == cfg.sr_output_size,
          ErrorCode::ShapeMismatch,
          "degrade expects a " + std::to_string(cfg.sr_output_size) + "² HR image");
  const int bottleneck = cfg.effective_degrade_size();
  auto small = resize_bicubic(hr.data(), bottleneck, bottleneck);
  auto lr = resize_bicubic(small, cfg.input_size, cfg.input_size);
  return ImageTensor::clamped(lr, ImageRole::LR);
}

}  // namespace sht
