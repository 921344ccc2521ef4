#include "sht/config.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <sstream>

namespace sht {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split_ws(const std::string& s) {
  std::istringstream is(s);
  std::vector<std::string> out;
  for (std::string tok; is >> tok;) out.push_back(tok);
  return out;
}

std::string fmt_double(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

double parse_double(const std::string& key, const std::string& s) {
  double v = 0;
  const auto t = trim(s);
  auto res = std::from_chars(t.data(), t.data() + t.size(), v);
  if (res.ec != std::errc() || res.ptr != t.data() + t.size()) {
    fail(ErrorCode::InvalidConfig, key + ": expected a number, got '" + s + "'");
  }
  return v;
}

template <typename Int>
Int parse_int(const std::string& key, const std::string& s) {
  Int v = 0;
  const auto t = trim(s);
  auto res = std::from_chars(t.data(), t.data() + t.size(), v);
  if (res.ec != std::errc() || res.ptr != t.data() + t.size()) {
    fail(ErrorCode::InvalidConfig, key + ": expected an integer, got '" + s + "'");
  }
  return v;
}

bool parse_bool(const std::string& key, const std::string& s) {
  const auto t = trim(s);
  if (t == "true" || t == "1") return true;
  if (t == "false" || t == "0") return false;
  fail(ErrorCode::InvalidConfig, key + ": expected true/false, got '" + s + "'");
}

std::array<double, 3> parse_triple(const std::string& key, const std::string& s) {
  const auto toks = split_ws(s);
  if (toks.size() != 3) fail(ErrorCode::InvalidConfig, key + ": expected three numbers");
  return {parse_double(key, toks[0]), parse_double(key, toks[1]), parse_double(key, toks[2])};
}

struct Field {
  std::string name;
  std::function<std::string(const SHTConfig&)> get;
  std::function<void(SHTConfig&, const std::string&)> set;
};

template <typename T>
Field int_field(const char* name, T SHTConfig::*member) {
  return {name, [member](const SHTConfig& c) { return std::to_string(c.*member); },
          [member, name](SHTConfig& c, const std::string& v) { c.*member = parse_int<T>(name, v); }};
}

Field double_field(const char* name, double SHTConfig::*member) {
  return {name, [member](const SHTConfig& c) { return fmt_double(c.*member); },
          [member, name](SHTConfig& c, const std::string& v) { c.*member = parse_double(name, v); }};
}

Field bool_field(const char* name, bool SHTConfig::*member) {
  return {name, [member](const SHTConfig& c) { return std::string(c.*member ? "true" : "false"); },
          [member, name](SHTConfig& c, const std::string& v) { c.*member = parse_bool(name, v); }};
}

Field triple_field(const char* name, std::array<double, 3> SHTConfig::*member) {
  return {name,
          [member](const SHTConfig& c) {
            const auto& a = c.*member;
            return fmt_double(a[0]) + " " + fmt_double(a[1]) + " " + fmt_double(a[2]);
          },
          [member, name](SHTConfig& c, const std::string& v) { c.*member = parse_triple(name, v); }};
}

const std::vector<Field>& fields() {
  static const std::vector<Field> table = {
      int_field("num_landmarks", &SHTConfig::num_landmarks),
      int_field("num_stacks", &SHTConfig::num_stacks),
      int_field("sr_blocks_per_module", &SHTConfig::sr_blocks_per_module),
      int_field("input_size", &SHTConfig::input_size),
      int_field("sr_output_size", &SHTConfig::sr_output_size),
      int_field("heatmap_size", &SHTConfig::heatmap_size),
      double_field("heatmap_sigma", &SHTConfig::heatmap_sigma),
      int_field("pose_channels", &SHTConfig::pose_channels),
      int_field("sr_channels", &SHTConfig::sr_channels),
      int_field("hourglass_depth", &SHTConfig::hourglass_depth),
      int_field("hourglass_skip_residuals", &SHTConfig::hourglass_skip_residuals),
      int_field("fusion_kernel", &SHTConfig::fusion_kernel),
      int_field("fptn_channels", &SHTConfig::fptn_channels),
      int_field("fptn_blocks", &SHTConfig::fptn_blocks),
      int_field("fptn_working_size", &SHTConfig::fptn_working_size),
      int_field("disc_channels", &SHTConfig::disc_channels),
      triple_field("gamma", &SHTConfig::gamma),
      triple_field("lambda", &SHTConfig::lambda),
      bool_field("non_saturating_gan", &SHTConfig::non_saturating_gan),
      {"perceptual_weights", [](const SHTConfig& c) { return c.perceptual_weights; },
       [](SHTConfig& c, const std::string& v) { c.perceptual_weights = trim(v); }},
      bool_field("drop_perceptual_if_missing", &SHTConfig::drop_perceptual_if_missing),
      double_field("rotation_max_deg", &SHTConfig::rotation_max_deg),
      double_field("rotation_sigma_deg", &SHTConfig::rotation_sigma_deg),
      double_field("scale_min", &SHTConfig::scale_min),
      double_field("scale_max", &SHTConfig::scale_max),
      double_field("scale_sigma", &SHTConfig::scale_sigma),
      double_field("crop_margin", &SHTConfig::crop_margin),
      double_field("max_out_of_frame", &SHTConfig::max_out_of_frame),
      int_field("max_resample_attempts", &SHTConfig::max_resample_attempts),
      double_field("identity_pair_fraction", &SHTConfig::identity_pair_fraction),
      double_field("labeled_fraction", &SHTConfig::labeled_fraction),
      int_field("degrade_size", &SHTConfig::degrade_size),
      {"interocular",
       [](const SHTConfig& c) {
         return c.interocular ? std::to_string(c.interocular->first) + " " +
                                    std::to_string(c.interocular->second)
                              : std::string("none");
       },
       [](SHTConfig& c, const std::string& v) {
         const auto toks = split_ws(v);
         if (toks.size() == 1 && toks[0] == "none") {
           c.interocular.reset();
           return;
         }
         if (toks.size() != 2) fail(ErrorCode::InvalidConfig, "interocular: expected two indices or 'none'");
         c.interocular = IndexPair{parse_int<int>("interocular", toks[0]),
                                   parse_int<int>("interocular", toks[1])};
       }},
      int_field("batch_size", &SHTConfig::batch_size),
      double_field("lr_dhln", &SHTConfig::lr_dhln),
      double_field("lr_fptn", &SHTConfig::lr_fptn),
      int_field("checkpoint_every", &SHTConfig::checkpoint_every),
      int_field("seed", &SHTConfig::seed),
      bool_field("deterministic", &SHTConfig::deterministic),
  };
  return table;
}

const Field& find_field(const std::string& key) {
  for (const auto& f : fields()) {
    if (f.name == key) return f;
  }
  fail(ErrorCode::InvalidConfig, "unknown key '" + key + "'");
}

bool is_power_of_two(int v) { return v > 0 && (v & (v - 1)) == 0; }

void check(bool ok, const std::string& what) {
  if (!ok) fail(ErrorCode::InvalidConfig, what);
}

}  // namespace

int SHTConfig::effective_degrade_size() const {
  if (degrade_size > 0) return degrade_size;
  return sr_output_size == 128 ? 16 : input_size;
}

int SHTConfig::upsample_stages() const {
  int stages = 0;
  for (int s = input_size; s < sr_output_size; s *= 2) ++stages;
  return stages;
}

int SHTConfig::fptn_down_stages() const {
  int stages = 0;
  for (int s = sr_output_size; s > fptn_working_size; s /= 2) ++stages;
  return stages;
}

SHTConfig validate_config(SHTConfig cfg) {
  check(cfg.num_landmarks > 0, "num_landmarks must be positive");
  check(cfg.num_stacks >= 1, "num_stacks must be at least 1");
  check(cfg.sr_blocks_per_module >= 1, "sr_blocks_per_module must be at least 1");
  check(cfg.input_size > 0, "input_size must be positive");
  check(cfg.sr_output_size == 128 || cfg.sr_output_size == 256, "sr_output_size must be 128 or 256");
  check(cfg.sr_output_size % cfg.input_size == 0 &&
            is_power_of_two(cfg.sr_output_size / cfg.input_size),
        "sr_output_size must be a power-of-two multiple of input_size");
  check(cfg.heatmap_size == cfg.input_size, "heatmap_size must equal input_size");
  check(cfg.heatmap_sigma > 0, "heatmap_sigma must be positive");
  check(cfg.pose_channels > 0 && cfg.pose_channels % 2 == 0, "pose_channels must be positive and even");
  check(cfg.sr_channels > 0, "sr_channels must be positive");
  check(cfg.hourglass_depth >= 1 && cfg.input_size % (1 << cfg.hourglass_depth) == 0,
        "input_size must be divisible by 2^hourglass_depth");
  check(cfg.hourglass_skip_residuals >= 1, "hourglass_skip_residuals must be at least 1");
  check(cfg.fusion_kernel >= 1 && cfg.fusion_kernel % 2 == 1, "fusion_kernel must be odd");
  check(cfg.fptn_channels > 0 && cfg.fptn_blocks >= 0 && cfg.disc_channels > 0,
        "FPTN widths must be positive");
  check(is_power_of_two(cfg.fptn_working_size) && cfg.fptn_working_size <= cfg.sr_output_size,
        "fptn_working_size must be a power of two no larger than sr_output_size");
  check(cfg.gamma[0] == 0.0 || cfg.gamma[0] == 1.0, "gamma1 must be 0 or 1");
  check(cfg.gamma[1] > 0 && cfg.gamma[2] > 0, "gamma2 and gamma3 must be positive");
  check(cfg.lambda[0] > 0 && cfg.lambda[1] > 0 && cfg.lambda[2] > 0, "lambda weights must be positive");
  check(cfg.rotation_max_deg >= 0 && cfg.rotation_sigma_deg >= 0, "rotation limits must be nonnegative");
  check(cfg.scale_min > 0 && cfg.scale_min <= 1 && cfg.scale_max >= 1, "scale range must bracket 1");
  check(cfg.scale_sigma >= 0, "scale_sigma must be nonnegative");
  check(cfg.crop_margin > 0, "crop_margin must be positive");
  check(cfg.max_out_of_frame >= 0 && cfg.max_out_of_frame <= 1, "max_out_of_frame must lie in [0,1]");
  check(cfg.max_resample_attempts >= 1, "max_resample_attempts must be at least 1");
  check(cfg.identity_pair_fraction >= 0 && cfg.identity_pair_fraction <= 1,
        "identity_pair_fraction must lie in [0,1]");
  check(cfg.labeled_fraction >= 0 && cfg.labeled_fraction <= 1, "labeled_fraction must lie in [0,1]");
  check(cfg.degrade_size >= 0 && cfg.degrade_size <= cfg.sr_output_size, "degrade_size out of range");
  if (cfg.interocular) {
    const auto [a, b] = *cfg.interocular;
    check(a >= 0 && b >= 0 && a < cfg.num_landmarks && b < cfg.num_landmarks && a != b,
          "interocular indices out of range");
  }
  check(cfg.batch_size > 0 && cfg.batch_size % 2 == 0, "batch_size must be even (pairs)");
  check(cfg.lr_dhln > 0 && cfg.lr_fptn > 0, "learning rates must be positive");
  check(cfg.checkpoint_every >= 0, "checkpoint_every must be nonnegative");
  return cfg;
}

std::string config_to_text(const SHTConfig& cfg) {
  std::string out;
  for (const auto& f : fields()) out += f.name + " = " + f.get(cfg) + "\n";
  return out;
}

SHTConfig parse_config(const std::string& text) {
  SHTConfig cfg;
  std::istringstream is(text);
  int line_no = 0;
  for (std::string line; std::getline(is, line);) {
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      fail(ErrorCode::InvalidConfig, "line " + std::to_string(line_no) + ": expected key = value");
    }
    find_field(trim(line.substr(0, eq))).set(cfg, trim(line.substr(eq + 1)));
  }
  return validate_config(cfg);
}

SHTConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::InvalidConfig, "cannot open config " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

void save_config(const SHTConfig& cfg, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) fail(ErrorCode::InvalidConfig, "cannot write config " + path.string());
  out << config_to_text(cfg);
}

void apply_override(SHTConfig& cfg, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos) fail(ErrorCode::InvalidConfig, "override must be key=value: " + assignment);
  find_field(trim(assignment.substr(0, eq))).set(cfg, assignment.substr(eq + 1));
}

std::vector<std::string> config_keys() {
  std::vector<std::string> keys;
  for (const auto& f : fields()) keys.push_back(f.name);
  return keys;
}

SHTConfig reference_config_256() {
  SHTConfig cfg;
  cfg.num_landmarks = 68;
  cfg.sr_output_size = 256;
  cfg.interocular = IndexPair{36, 45};
  return validate_config(cfg);
}

SHTConfig toy_config() {
  SHTConfig cfg;
  cfg.num_landmarks = 5;
  cfg.num_stacks = 2;
  cfg.pose_channels = 64;
  cfg.sr_channels = 16;
  cfg.fptn_channels = 8;
  cfg.disc_channels = 16;
  cfg.batch_size = 4;
  cfg.perceptual_weights = kSurrogateWeights;
  cfg.identity_pair_fraction = 0.2;
  cfg.interocular = IndexPair{0, 1};
  cfg.seed = 1;
  return validate_config(cfg);
}

}  // namespace sht
