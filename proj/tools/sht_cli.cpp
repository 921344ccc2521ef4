// Command-line front end: training, evaluation, inference and toy data.
//
// Exit codes: 0 success, 1 configuration or usage error, 2 data error,
// 3 runtime failure during training or inference.

#include <CLI11.hpp>
#include <torch/torch.h>

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "sht/checkpoint.hpp"
#include "sht/config.hpp"
#include "sht/data.hpp"
#include "sht/dhln.hpp"
#include "sht/error.hpp"
#include "sht/fptn.hpp"
#include "sht/heatmap.hpp"
#include "sht/image_io.hpp"
#include "sht/inference.hpp"
#include "sht/metrics.hpp"
#include "sht/trainer.hpp"

namespace fs = std::filesystem;
using namespace sht;

namespace {

constexpr int kExitConfig = 1;
constexpr int kExitData = 2;
constexpr int kExitRuntime = 3;

int exit_code_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidConfig:
    case ErrorCode::InvalidArgument:
    case ErrorCode::PhaseViolation:
    case ErrorCode::CheckpointMismatch:
    case ErrorCode::ExtractorUnavailable:
      return kExitConfig;
    case ErrorCode::MissingAnnotation:
    case ErrorCode::MalformedLandmarkFile:
    case ErrorCode::ImageReadError:
    case ErrorCode::EmptyVideo:
    case ErrorCode::TooFewFrames:
    case ErrorCode::LandmarkOutOfFrame:
    case ErrorCode::LandmarkCountMismatch:
    case ErrorCode::CheckpointReadError:
    case ErrorCode::ImageTooSmall:
      return kExitData;
    default:
      return kExitRuntime;
  }
}

// Raised for usage problems detected by the front end itself.
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Common {
  std::string config_path;
  std::vector<std::string> overrides;
  bool force = false;
};

SHTConfig resolve_config(const Common& c, const std::optional<SHTConfig>& base = std::nullopt) {
  SHTConfig cfg;
  std::string path = c.config_path;
  if (path.empty()) {
    if (const char* env = std::getenv("SHT_CONFIG")) path = env;
  }
  if (!path.empty()) {
    cfg = load_config(path);
  } else if (base) {
    cfg = *base;
  }
  for (const auto& o : c.overrides) apply_override(cfg, o);
  return validate_config(cfg);
}

bool config_given(const Common& c) {
  return !c.config_path.empty() || std::getenv("SHT_CONFIG") != nullptr || !c.overrides.empty();
}

void guard_output(const fs::path& path, bool force) {
  if (fs::exists(path) && !force) {
    throw UsageError(path.string() + " exists; pass --force to overwrite");
  }
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
}

std::vector<fs::path> list_images(const fs::path& input) {
  std::vector<fs::path> out;
  if (fs::is_directory(input)) {
    for (const auto& e : fs::directory_iterator(input)) {
      if (e.is_regular_file() && is_image_file(e.path())) out.push_back(e.path());
    }
    std::sort(out.begin(), out.end());
    require(!out.empty(), ErrorCode::ImageReadError, "no images in " + input.string());
  } else {
    require(fs::exists(input), ErrorCode::ImageReadError, "cannot read " + input.string());
    out.push_back(input);
  }
  return out;
}

// Checkpoint plus the configuration it runs under. A requested configuration
// must agree with the stored one on every shape-defining field.
struct LoadedModel {
  Checkpoint ckpt;
  SHTConfig cfg;
};

LoadedModel load_model_checkpoint(const fs::path& path, const Common& common) {
  LoadedModel m{read_checkpoint(path), {}};
  const auto stored = m.ckpt.config();
  m.cfg = config_given(common) ? resolve_config(common, stored) : stored;
  require_compatible(stored, m.cfg);
  return m;
}

DHLN load_dhln(const LoadedModel& m) {
  require(m.ckpt.has_section("dhln"), ErrorCode::CheckpointMismatch, "checkpoint has no DHLN weights");
  torch::manual_seed(m.cfg.seed);
  DHLN net(m.cfg);
  load_module_state(*net, m.ckpt.sections.at("dhln"), "dhln");
  net->eval();
  return net;
}

// ---------------------------------------------------------------------------

struct TrainArgs {
  std::vector<std::string> phases;
  std::int64_t steps = 0;
  std::string labeled, unlabeled, videos;
  std::string checkpoint, resume, log;
  std::optional<std::uint64_t> seed;
  int checkpoint_every = -1;
};

int cmd_train(const Common& common, const TrainArgs& a) {
  auto cfg = resolve_config(common);
  if (a.seed) cfg.seed = *a.seed;
  if (a.checkpoint_every >= 0) cfg.checkpoint_every = a.checkpoint_every;
  cfg = validate_config(cfg);

  std::vector<std::pair<Phase, std::int64_t>> schedule;
  for (const auto& p : a.phases) schedule.emplace_back(parse_phase(p), a.steps);

  const fs::path ckpt_path = a.checkpoint;
  const bool resuming_in_place = !a.resume.empty() && fs::exists(ckpt_path) &&
                                 fs::equivalent(fs::path(a.resume), ckpt_path);
  if (!resuming_in_place) guard_output(ckpt_path, common.force);
  if (!a.log.empty() && !resuming_in_place) {
    guard_output(a.log, common.force);
    fs::remove(a.log);
  }

  Trainer trainer(cfg);
  if (!a.resume.empty()) {
    auto ckpt = read_checkpoint(a.resume);
    require_compatible(ckpt.config(), cfg);
    trainer.load_checkpoint(ckpt);
  }

  DatasetOptions opts;
  opts.num_landmarks = cfg.num_landmarks;
  opts.interocular = cfg.interocular;
  TrainingData data;
  std::map<std::string, std::string> roots;
  if (!a.labeled.empty()) {
    LoadReport report;
    data.labeled = load_image_dataset(a.labeled, opts, &report);
    for (const auto& s : report.skipped) std::cerr << "skipped " << s << '\n';
    roots["labeled"] = a.labeled;
  }
  if (!a.unlabeled.empty()) {
    data.unlabeled = load_image_dataset(a.unlabeled, opts);
    roots["unlabeled"] = a.unlabeled;
  }
  if (!a.videos.empty()) {
    data.videos = load_video_dataset(a.videos);
    roots["videos"] = a.videos;
  }

  RunOptions run;
  run.checkpoint_path = ckpt_path;
  run.checkpoint_every = cfg.checkpoint_every;
  run.log_path = a.log;
  run.on_step = [](const StepRecord& r) {
    if (r.phase_step % 50 == 0 || r.skipped) {
      std::cout << to_string(r.phase) << " step " << r.phase_step << " loss " << r.total
                << (r.skipped ? " (skipped)" : "") << '\n';
    }
  };
  for (const auto& [phase, steps] : schedule) trainer.run_phase(phase, data, steps, run);

  const auto perceptual = trainer.perceptual().is_empty() ? std::string("none") : trainer.perceptual()->identity();
  write_manifest(fs::path(ckpt_path).concat(".manifest.json"), roots, schedule, cfg.checkpoint_every, cfg,
                 perceptual);
  std::cout << "wrote " << ckpt_path.string() << '\n';
  return 0;
}

// ---------------------------------------------------------------------------

struct EvalArgs {
  std::string checkpoint, data, predictions, report, ced;
  std::string nme = "io";
  double auc_threshold = 0.1;
  double fr_threshold = 0.1;
  bool no_quality = false;
};

int cmd_eval(const Common& common, const EvalArgs& a) {
  if (a.checkpoint.empty() == a.predictions.empty()) {
    throw UsageError("eval needs exactly one of --checkpoint or --predictions");
  }
  EvalOptions eo;
  eo.kind = parse_normalization(a.nme);
  eo.auc_threshold = a.auc_threshold;
  eo.fr_threshold = a.fr_threshold;
  eo.image_quality = !a.no_quality;
  if (!a.report.empty()) guard_output(a.report, common.force);
  if (!a.ced.empty()) guard_output(a.ced, common.force);

  std::optional<LoadedModel> model;
  SHTConfig cfg;
  if (!a.checkpoint.empty()) {
    model = load_model_checkpoint(a.checkpoint, common);
    cfg = model->cfg;
  } else {
    cfg = resolve_config(common);
  }
  DatasetOptions opts;
  opts.num_landmarks = cfg.num_landmarks;
  opts.interocular = cfg.interocular;
  opts.strict = true;
  const auto faces = load_image_dataset(a.data, opts);

  EvalReport report;
  if (model) {
    auto net = load_dhln(*model);
    report = evaluate_model(net, faces, cfg, eo);
  } else {
    std::map<std::string, LandmarkSet> preds;
    for (const auto& f : faces) {
      const auto file = fs::path(a.predictions) / fs::path(f.name).replace_extension(".txt");
      preds.emplace(f.name, LandmarkSet(read_landmark_file(file, cfg.num_landmarks)));
    }
    report = evaluate_predictions(preds, faces, eo);
  }

  std::cout << "faces " << report.records.size() << "\nnme_" << to_string(report.kind) << ' ' << report.mean_nme
            << "\nauc " << report.auc << "\nfr " << report.fr << '\n';
  if (report.mean_psnr) std::cout << "psnr_y " << *report.mean_psnr << '\n';
  if (report.mean_ssim) std::cout << "ssim_y " << *report.mean_ssim << '\n';
  if (!a.report.empty()) write_report(report, a.report);
  if (!a.ced.empty()) {
    write_ced(ced_curve(report.errors(), eo.auc_threshold, 101), a.ced);
  }
  return 0;
}

// ---------------------------------------------------------------------------

struct InferArgs {
  std::string checkpoint, input, output;
};

fs::path output_for(const fs::path& out_dir, const fs::path& input, const std::string& ext, bool force) {
  auto name = input.filename();
  if (!ext.empty()) name.replace_extension(ext);
  auto path = out_dir / name;
  guard_output(path, force);
  return path;
}

int cmd_detect(const Common& common, const InferArgs& a) {
  auto m = load_model_checkpoint(a.checkpoint, common);
  auto net = load_dhln(m);
  const auto inputs = list_images(a.input);
  fs::create_directories(a.output);
  for (const auto& in : inputs) {
    const auto img = read_image(in, ImageRole::LR);
    const auto hm = predict_heatmap_landmarks(net, to_network_input(img, m.cfg));
    write_landmark_file(output_for(a.output, in, ".txt", common.force),
                        heatmap_to_image(hm, m.cfg, img.width(), img.height()));
  }
  std::cout << "detected " << inputs.size() << " image(s)\n";
  return 0;
}

int cmd_hallucinate(const Common& common, const InferArgs& a) {
  auto m = load_model_checkpoint(a.checkpoint, common);
  auto net = load_dhln(m);
  const auto inputs = list_images(a.input);
  fs::create_directories(a.output);
  for (const auto& in : inputs) {
    const auto out = dhln_forward(net, to_network_input(read_image(in, ImageRole::LR), m.cfg));
    write_image(ImageTensor::clamped(out.sr_image[0], ImageRole::SR), output_for(a.output, in, "", common.force));
  }
  std::cout << "hallucinated " << inputs.size() << " image(s)\n";
  return 0;
}

// ---------------------------------------------------------------------------

struct TransferArgs {
  std::string checkpoint, condition, target_landmarks, target_image, output;
};

int cmd_transfer(const Common& common, const TransferArgs& a) {
  if (a.target_landmarks.empty() == a.target_image.empty()) {
    throw UsageError("transfer needs exactly one of --target-landmarks or --target-image");
  }
  auto m = load_model_checkpoint(a.checkpoint, common);
  require(m.ckpt.has_section("generator"), ErrorCode::CheckpointMismatch,
          "checkpoint has no FPTN generator weights; transfer needs an FPTN-trained checkpoint");
  auto net = load_dhln(m);
  FPTN fptn(m.cfg);
  load_module_state(*fptn.generator, m.ckpt.sections.at("generator"), "generator");
  fptn.generator->eval();
  guard_output(a.output, common.force);

  const auto condition = read_image(a.condition, ImageRole::LR);
  const auto cond = dhln_forward(net, to_network_input(condition, m.cfg));
  const auto final_maps = [](const DHLNOutput& o) { return HeatmapStack(o.heatmaps.back()[0].clamp(0.0, 1.0)); };

  std::optional<HeatmapStack> target;
  if (!a.target_landmarks.empty()) {
    // Landmarks are given in condition-image pixels, as written by detect.
    const auto pts = read_landmark_file(a.target_landmarks, m.cfg.num_landmarks);
    std::vector<Point2> grid;
    for (const auto& p : pts) {
      grid.push_back({rescale_coordinate(p.x, condition.width(), m.cfg.heatmap_size),
                      rescale_coordinate(p.y, condition.height(), m.cfg.heatmap_size)});
    }
    target = render_heatmaps(LandmarkSet(grid), m.cfg.heatmap_size, m.cfg.heatmap_size, m.cfg.heatmap_sigma);
  } else {
    const auto other = read_image(a.target_image, ImageRole::LR);
    target = final_maps(dhln_forward(net, to_network_input(other, m.cfg)));
  }

  const ImageTensor i_con = ImageTensor::clamped(cond.sr_image[0], ImageRole::SR);
  write_image(generator_forward(fptn.generator, {i_con, final_maps(cond), *target}), a.output);
  std::cout << "wrote " << a.output << '\n';
  return 0;
}

// ---------------------------------------------------------------------------

struct ToyArgs {
  std::string output, video_output;
  int count = 200;
  int canvas = 128;
  int landmarks = 5;
  int videos = 0;
  int frames = 8;
  std::uint64_t seed = 0;
};

int cmd_make_toy(const Common& common, const ToyArgs& a) {
  if (fs::exists(fs::path(a.output) / "bboxes.txt") && !common.force) {
    throw UsageError(a.output + " already holds a dataset; pass --force to overwrite");
  }
  const ToyRanges ranges;
  write_image_dataset(a.output, generate_toy_dataset(a.count, a.canvas, a.landmarks, ranges, a.seed));
  std::cout << "wrote " << a.count << " faces to " << a.output << '\n';
  if (a.videos > 0) {
    if (a.video_output.empty()) throw UsageError("--videos needs --video-output");
    if (fs::exists(a.video_output) && !fs::is_empty(a.video_output) && !common.force) {
      throw UsageError(a.video_output + " is not empty; pass --force to overwrite");
    }
    write_video_dataset(a.video_output,
                        generate_toy_videos(a.videos, a.frames, a.canvas, a.landmarks, ranges, mix_seed(a.seed, 1)));
    std::cout << "wrote " << a.videos << " videos to " << a.video_output << '\n';
  }
  return 0;
}

// ---------------------------------------------------------------------------

struct ConvertArgs {
  std::string input, output;
};

int cmd_convert_pts(const Common& common, const ConvertArgs& a) {
  std::vector<std::pair<fs::path, fs::path>> jobs;
  if (fs::is_directory(a.input)) {
    fs::create_directories(a.output);
    for (const auto& e : fs::directory_iterator(a.input)) {
      if (e.path().extension() == ".pts") {
        jobs.emplace_back(e.path(), fs::path(a.output) / e.path().filename().replace_extension(".txt"));
      }
    }
    std::sort(jobs.begin(), jobs.end());
  } else {
    jobs.emplace_back(a.input, a.output);
  }
  for (const auto& [in, out] : jobs) {
    guard_output(out, common.force);
    write_landmark_file(out, LandmarkSet(read_pts_file(in)));
  }
  std::cout << "converted " << jobs.size() << " file(s)\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  torch::set_num_threads(1);
  CLI::App app{"Super-resolution guided face alignment: training, evaluation and inference"};
  app.require_subcommand(1);

  Common common;
  auto add_common = [&](CLI::App* sub, bool with_config) {
    if (with_config) {
      sub->add_option("--config", common.config_path, "configuration file (default: $SHT_CONFIG)");
      sub->add_option("--set", common.overrides, "configuration override key=value")->take_all();
    }
    sub->add_flag("--force", common.force, "overwrite existing outputs");
  };

  TrainArgs train;
  auto* t = app.add_subcommand("train", "run one or more training phases");
  add_common(t, true);
  t->add_option("--phase", train.phases, "pretrain_dhln | pretrain_fptn | finetune_sht | weak_finetune")
      ->required()
      ->take_all();
  t->add_option("--steps", train.steps, "steps per phase")->required()->check(CLI::PositiveNumber);
  t->add_option("--data", train.labeled, "labeled image dataset root");
  t->add_option("--unlabeled", train.unlabeled, "image dataset whose landmarks are ignored");
  t->add_option("--videos", train.videos, "video dataset root");
  t->add_option("--checkpoint", train.checkpoint, "checkpoint output path")->required();
  t->add_option("--resume", train.resume, "checkpoint to resume from");
  t->add_option("--log", train.log, "metrics log (JSON lines)");
  t->add_option("--seed", train.seed, "random seed");
  t->add_option("--checkpoint-every", train.checkpoint_every, "steps between checkpoints (0: end of phase)");

  EvalArgs ev;
  auto* e = app.add_subcommand("eval", "evaluate a checkpoint or stored predictions");
  add_common(e, true);
  e->add_option("--checkpoint", ev.checkpoint, "trained checkpoint");
  e->add_option("--predictions", ev.predictions, "directory of predicted landmark files");
  e->add_option("--data", ev.data, "labeled image dataset root")->required();
  e->add_option("--nme", ev.nme, "io | box | diag | wid");
  e->add_option("--auc-threshold", ev.auc_threshold, "CED integration limit")->check(CLI::PositiveNumber);
  e->add_option("--fr-threshold", ev.fr_threshold, "failure threshold")->check(CLI::PositiveNumber);
  e->add_option("--report", ev.report, "EvalReport JSON output");
  e->add_option("--ced", ev.ced, "CED curve output");
  e->add_flag("--no-quality", ev.no_quality, "skip PSNR and SSIM");

  InferArgs det, hal;
  auto* d = app.add_subcommand("detect", "write landmark files for input images");
  add_common(d, true);
  d->add_option("--checkpoint", det.checkpoint)->required();
  d->add_option("--input", det.input, "image or directory")->required();
  d->add_option("--output", det.output, "output directory")->required();
  auto* h = app.add_subcommand("hallucinate", "write super-resolved faces for input images");
  add_common(h, true);
  h->add_option("--checkpoint", hal.checkpoint)->required();
  h->add_option("--input", hal.input, "image or directory")->required();
  h->add_option("--output", hal.output, "output directory")->required();

  TransferArgs tr;
  auto* x = app.add_subcommand("transfer", "re-pose a face to target landmarks");
  add_common(x, true);
  x->add_option("--checkpoint", tr.checkpoint)->required();
  x->add_option("--condition", tr.condition, "condition face image")->required();
  x->add_option("--target-landmarks", tr.target_landmarks, "landmark file in condition-image pixels");
  x->add_option("--target-image", tr.target_image, "image whose predicted pose is the target");
  x->add_option("--output", tr.output, "generated image path")->required();

  ToyArgs toy;
  auto* m = app.add_subcommand("make-toy-data", "generate a procedural face dataset");
  add_common(m, false);
  m->add_option("--output", toy.output, "dataset root")->required();
  m->add_option("--count", toy.count)->check(CLI::PositiveNumber);
  m->add_option("--canvas", toy.canvas)->check(CLI::PositiveNumber);
  m->add_option("--landmarks", toy.landmarks)->check(CLI::Range(2, 68));
  m->add_option("--seed", toy.seed);
  m->add_option("--videos", toy.videos, "number of clips")->check(CLI::NonNegativeNumber);
  m->add_option("--frames", toy.frames, "frames per clip")->check(CLI::Range(2, 1000));
  m->add_option("--video-output", toy.video_output, "video dataset root");

  ConvertArgs conv;
  auto* c = app.add_subcommand("convert-pts", "convert .pts annotations to landmark files");
  add_common(c, false);
  c->add_option("--input", conv.input, ".pts file or directory")->required();
  c->add_option("--output", conv.output, "landmark file or directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& err) {
    const int rc = app.exit(err);
    return rc == 0 ? 0 : kExitConfig;
  }

  try {
    if (t->parsed()) return cmd_train(common, train);
    if (e->parsed()) return cmd_eval(common, ev);
    if (d->parsed()) return cmd_detect(common, det);
    if (h->parsed()) return cmd_hallucinate(common, hal);
    if (x->parsed()) return cmd_transfer(common, tr);
    if (m->parsed()) return cmd_make_toy(common, toy);
    if (c->parsed()) return cmd_convert_pts(common, conv);
  } catch (const Error& err) {
    std::cerr << "error [" << to_string(err.code()) << "]: " << err.what() << '\n';
    return exit_code_for(err.code());
  } catch (const UsageError& err) {
    std::cerr << "error: " << err.what() << '\n';
    return kExitConfig;
  } catch (const std::exception& err) {
    std::cerr << "error: " << err.what() << '\n';
    return kExitRuntime;
  }
  return kExitConfig;
}
