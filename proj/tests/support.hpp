#pragma once

#include <filesystem>
#include <random>
#include <string>

#include "sht/config.hpp"

namespace testing {

/// Small network widths so unit tests run in seconds.
inline sht::SHTConfig tiny_config() {
  sht::SHTConfig cfg = sht::toy_config();
  cfg.num_landmarks = 3;
  cfg.num_stacks = 2;
  cfg.pose_channels = 16;
  cfg.sr_channels = 8;
  cfg.sr_blocks_per_module = 2;
  cfg.hourglass_depth = 2;
  cfg.hourglass_skip_residuals = 1;
  cfg.fptn_channels = 4;
  cfg.fptn_blocks = 2;
  cfg.disc_channels = 8;
  cfg.batch_size = 4;
  cfg.interocular = sht::IndexPair{0, 1};
  return sht::validate_config(cfg);
}

/// Fresh empty directory under the system temp dir.
inline std::filesystem::path temp_dir(const std::string& tag) {
  static std::mt19937_64 rng(std::random_device{}());
  auto dir = std::filesystem::temp_directory_path() / ("sht_" + tag + "_" + std::to_string(rng() % 1000000000));
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace testing
