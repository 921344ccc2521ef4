#include "sht/image_io.hpp"

#include <algorithm>
#include <cctype>
#include <opencv2/imgcodecs.hpp>

namespace sht {

ImageTensor read_image(const std::filesystem::path& path, ImageRole role) {
  cv::Mat bgr = cv::imread(path.string(), cv::IMREAD_COLOR);
  if (bgr.empty()) fail(ErrorCode::ImageReadError, "cannot read image " + path.string());
  const int h = bgr.rows;
  const int w = bgr.cols;
  auto t = torch::empty({3, h, w}, torch::kFloat32);
  auto acc = t.accessor<float, 3>();
  for (int y = 0; y < h; ++y) {
    const auto* row = bgr.ptr<cv::Vec3b>(y);
    for (int x = 0; x < w; ++x) {
      acc[0][y][x] = row[x][2] / 255.0f;
      acc[1][y][x] = row[x][1] / 255.0f;
      acc[2][y][x] = row[x][0] / 255.0f;
    }
  }
  return ImageTensor(std::move(t), role);
}

void write_image(const ImageTensor& image, const std::filesystem::path& path) {
  const ValueRange r = image.range();
  auto t = ((image.data().detach().to(torch::kFloat64) - r.lo) / (r.hi - r.lo)).clamp(0.0, 1.0);
  if (t.size(0) == 1) t = t.expand({3, t.size(1), t.size(2)});
  t = t.contiguous();
  const int h = static_cast<int>(t.size(1));
  const int w = static_cast<int>(t.size(2));
  cv::Mat bgr(h, w, CV_8UC3);
  auto acc = t.accessor<double, 3>();
  auto to8 = [](double v) { return static_cast<uchar>(std::lround(v * 255.0)); };
  for (int y = 0; y < h; ++y) {
    auto* row = bgr.ptr<cv::Vec3b>(y);
    for (int x = 0; x < w; ++x) {
      row[x] = cv::Vec3b(to8(acc[2][y][x]), to8(acc[1][y][x]), to8(acc[0][y][x]));
    }
  }
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  if (!cv::imwrite(path.string(), bgr)) {
    fail(ErrorCode::ImageReadError, "cannot write image " + path.string());
  }
}

bool is_image_file(const std::filesystem::path& path) {
  auto ext = path.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
  return ext == ".png" || ext == ".jpg" || ext == ".jpeg" || ext == ".bmp" || ext == ".ppm" ||
         ext == ".pgm";
}

}  // namespace sht
