#include "sht/checkpoint.hpp"

#include <cstring>
#include <fstream>
#include <sstream>

namespace sht {

namespace {

constexpr char kMagic[8] = {'S', 'H', 'T', 'C', 'K', 'P', 'T', '\0'};

class Writer {
 public:
  explicit Writer(std::ostream& out) : out_(out) {}
  template <typename T>
  void pod(T v) {
    out_.write(reinterpret_cast<const char*>(&v), sizeof(T));
  }
  void bytes(const std::string& s) {
    pod<std::uint64_t>(s.size());
    out_.write(s.data(), static_cast<std::streamsize>(s.size()));
  }
  void tensor(const torch::Tensor& t) {
    auto c = t.detach().contiguous().cpu();
    pod<std::int8_t>(static_cast<std::int8_t>(c.scalar_type()));
    pod<std::uint32_t>(static_cast<std::uint32_t>(c.dim()));
    for (auto d : c.sizes()) pod<std::int64_t>(d);
    const auto n = c.numel() * static_cast<std::int64_t>(c.element_size());
    out_.write(static_cast<const char*>(c.data_ptr()), n);
  }

 private:
  std::ostream& out_;
};

class Reader {
 public:
  Reader(std::istream& in, std::string path) : in_(in), path_(std::move(path)) {}
  template <typename T>
  T pod() {
    T v{};
    in_.read(reinterpret_cast<char*>(&v), sizeof(T));
    check();
    return v;
  }
  std::string bytes() {
    const auto n = pod<std::uint64_t>();
    require(n < (1ull << 34), ErrorCode::CheckpointReadError, path_ + ": implausible record length");
    std::string s(n, '\0');
    in_.read(s.data(), static_cast<std::streamsize>(n));
    check();
    return s;
  }
  torch::Tensor tensor() {
    const auto type = static_cast<c10::ScalarType>(pod<std::int8_t>());
    const auto dim = pod<std::uint32_t>();
    require(dim <= 8, ErrorCode::CheckpointReadError, path_ + ": implausible tensor rank");
    std::vector<int64_t> sizes(dim);
    for (auto& s : sizes) {
      s = pod<std::int64_t>();
      require(s >= 0, ErrorCode::CheckpointReadError, path_ + ": negative tensor extent");
    }
    require(type == torch::kFloat32 || type == torch::kFloat64 || type == torch::kInt64 || type == torch::kInt32 ||
                type == torch::kBool || type == torch::kUInt8,
            ErrorCode::CheckpointReadError, path_ + ": unsupported tensor type");
    auto t = torch::empty(sizes, torch::TensorOptions().dtype(type));
    in_.read(static_cast<char*>(t.data_ptr()), t.numel() * static_cast<std::int64_t>(t.element_size()));
    check();
    return t;
  }

 private:
  void check() { require(in_.good(), ErrorCode::CheckpointReadError, path_ + ": truncated checkpoint"); }
  std::istream& in_;
  std::string path_;
};

}  // namespace

void write_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
  try {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  } catch (const std::filesystem::filesystem_error& e) {
    fail(ErrorCode::CheckpointWriteError, e.what());
  }
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    require(out.good(), ErrorCode::CheckpointWriteError, "cannot open " + tmp.string());
    Writer w(out);
    out.write(kMagic, sizeof(kMagic));
    w.pod<std::uint32_t>(kCheckpointVersion);
    w.bytes(ckpt.config_text);
    w.pod<std::uint32_t>(static_cast<std::uint32_t>(ckpt.sections.size()));
    for (const auto& [name, tensors] : ckpt.sections) {
      w.bytes(name);
      w.pod<std::uint32_t>(static_cast<std::uint32_t>(tensors.size()));
      for (const auto& [key, t] : tensors) {
        w.bytes(key);
        w.tensor(t);
      }
    }
    w.pod<std::uint32_t>(static_cast<std::uint32_t>(ckpt.blobs.size()));
    for (const auto& [name, blob] : ckpt.blobs) {
      w.bytes(name);
      w.bytes(blob);
    }
    out.flush();
    require(out.good(), ErrorCode::CheckpointWriteError, "write failed: " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  require(!ec, ErrorCode::CheckpointWriteError, "cannot move checkpoint into place: " + ec.message());
}

Checkpoint read_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  require(in.good(), ErrorCode::CheckpointReadError, "cannot open checkpoint " + path.string());
  char magic[sizeof(kMagic)];
  in.read(magic, sizeof(magic));
  require(in.good() && std::memcmp(magic, kMagic, sizeof(kMagic)) == 0, ErrorCode::CheckpointReadError,
          path.string() + " is not a checkpoint");
  Reader r(in, path.string());
  const auto version = r.pod<std::uint32_t>();
  require(version == kCheckpointVersion, ErrorCode::CheckpointReadError,
          "unsupported checkpoint version " + std::to_string(version));
  Checkpoint ckpt;
  ckpt.config_text = r.bytes();
  const auto sections = r.pod<std::uint32_t>();
  for (std::uint32_t s = 0; s < sections; ++s) {
    auto name = r.bytes();
    auto& tensors = ckpt.sections[name];
    const auto count = r.pod<std::uint32_t>();
    for (std::uint32_t i = 0; i < count; ++i) {
      auto key = r.bytes();
      tensors[key] = r.tensor();
    }
  }
  const auto blobs = r.pod<std::uint32_t>();
  for (std::uint32_t b = 0; b < blobs; ++b) {
    auto name = r.bytes();
    ckpt.blobs[name] = r.bytes();
  }
  return ckpt;
}

TensorMap module_state(const torch::nn::Module& module) {
  TensorMap state;
  for (const auto& p : module.named_parameters(true)) state[p.key()] = p.value().detach().clone();
  for (const auto& b : module.named_buffers(true)) state[b.key()] = b.value().detach().clone();
  return state;
}

void load_module_state(torch::nn::Module& module, const TensorMap& state, const std::string& section) {
  torch::NoGradGuard guard;
  std::size_t matched = 0;
  auto assign = [&](const std::string& key, torch::Tensor& target) {
    auto it = state.find(key);
    require(it != state.end(), ErrorCode::CheckpointMismatch, section + ": missing tensor " + key);
    require(it->second.sizes() == target.sizes(), ErrorCode::CheckpointMismatch, section + ": shape mismatch for " + key);
    target.copy_(it->second);
    ++matched;
  };
  for (auto& p : module.named_parameters(true)) assign(p.key(), p.value());
  for (auto& b : module.named_buffers(true)) assign(b.key(), b.value());
  require(matched == state.size(), ErrorCode::CheckpointMismatch, section + ": checkpoint holds unexpected tensors");
}

std::string optimizer_blob(torch::optim::Optimizer& optimizer) {
  torch::serialize::OutputArchive archive;
  optimizer.save(archive);
  std::ostringstream out;
  archive.save_to(out);
  return out.str();
}

void load_optimizer_blob(torch::optim::Optimizer& optimizer, const std::string& blob) {
  std::istringstream in(blob);
  torch::serialize::InputArchive archive;
  try {
    archive.load_from(in);
    optimizer.load(archive);
  } catch (const c10::Error& e) {
    fail(ErrorCode::CheckpointReadError, std::string("cannot restore optimizer state: ") + e.what_without_backtrace());
  }
}

void require_compatible(const SHTConfig& stored, const SHTConfig& requested) {
  auto check = [](bool ok, const char* field) {
    require(ok, ErrorCode::CheckpointMismatch, std::string("checkpoint and configuration differ in ") + field);
  };
  check(stored.num_landmarks == requested.num_landmarks, "num_landmarks");
  check(stored.num_stacks == requested.num_stacks, "num_stacks");
  check(stored.sr_blocks_per_module == requested.sr_blocks_per_module, "sr_blocks_per_module");
  check(stored.input_size == requested.input_size, "input_size");
  check(stored.sr_output_size == requested.sr_output_size, "sr_output_size");
  check(stored.heatmap_size == requested.heatmap_size, "heatmap_size");
  check(stored.pose_channels == requested.pose_channels, "pose_channels");
  check(stored.sr_channels == requested.sr_channels, "sr_channels");
  check(stored.hourglass_depth == requested.hourglass_depth, "hourglass_depth");
  check(stored.hourglass_skip_residuals == requested.hourglass_skip_residuals, "hourglass_skip_residuals");
  check(stored.fusion_kernel == requested.fusion_kernel, "fusion_kernel");
  check(stored.fptn_channels == requested.fptn_channels, "fptn_channels");
  check(stored.fptn_blocks == requested.fptn_blocks, "fptn_blocks");
  check(stored.fptn_working_size == requested.fptn_working_size, "fptn_working_size");
  check(stored.disc_channels == requested.disc_channels, "disc_channels");
}

}  // namespace sht
