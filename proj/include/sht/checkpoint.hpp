#pragma once

#include <torch/torch.h>

#include <filesystem>
#include <map>
#include <string>

#include "sht/config.hpp"

namespace sht {

using TensorMap = std::map<std::string, torch::Tensor>;

/// Versioned binary container: the configuration text, named sections of
/// named tensors (one per network) and opaque named blobs (optimizer state,
/// training state). Little-endian.
struct Checkpoint {
  std::string config_text;
  std::map<std::string, TensorMap> sections;
  std::map<std::string, std::string> blobs;

  SHTConfig config() const { return parse_config(config_text); }
  bool has_section(const std::string& name) const { return sections.count(name) > 0; }
};

inline constexpr std::uint32_t kCheckpointVersion = 1;

/// Writes through a temporary file and renames it into place.
void write_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);
Checkpoint read_checkpoint(const std::filesystem::path& path);

/// Parameters and buffers keyed by their qualified names.
TensorMap module_state(const torch::nn::Module& module);
/// Copies `state` into the module; missing keys, unexpected keys and shape
/// differences raise CheckpointMismatch naming `section`.
void load_module_state(torch::nn::Module& module, const TensorMap& state, const std::string& section);

std::string optimizer_blob(torch::optim::Optimizer& optimizer);
void load_optimizer_blob(torch::optim::Optimizer& optimizer, const std::string& blob);

/// Fields that determine network shapes must agree; otherwise CheckpointMismatch.
void require_compatible(const SHTConfig& stored, const SHTConfig& requested);

}  // namespace sht
