#include "sht/trainer.hpp"

#include <cmath>
#include <fstream>

#include "json.hpp"

using nlohmann::json;

namespace sht {

namespace {

constexpr Phase kPhases[] = {Phase::pretrain_dhln, Phase::pretrain_fptn, Phase::finetune_sht, Phase::weak_finetune};
constexpr int kMaxConsecutiveSkips = 3;

torch::Tensor swap_halves(const torch::Tensor& t, int pairs) {
  return torch::cat({t.slice(0, pairs, 2 * pairs), t.slice(0, 0, pairs)});
}

bool all_finite(const LossBreakdown& loss) {
  if (!std::isfinite(loss.value())) return false;
  for (const auto& [name, v] : loss.components) {
    if (!std::isfinite(v.item<double>())) return false;
  }
  return true;
}

std::string first_non_finite(const LossBreakdown& loss) {
  for (const auto& [name, v] : loss.components) {
    if (!std::isfinite(v.item<double>())) return name;
  }
  return "total";
}

void set_requires_grad(torch::nn::Module& m, bool on) {
  for (auto& p : m.parameters()) p.set_requires_grad(on);
}

std::vector<torch::Tensor> parameters_of(std::initializer_list<torch::nn::Module*> modules) {
  std::vector<torch::Tensor> out;
  for (auto* m : modules) {
    for (auto& p : m->parameters()) out.push_back(p);
  }
  return out;
}

/// Logit and raw (unclamped) probability statistics of one discriminator pass.
void record_score_stats(std::map<std::string, double>& diag, const std::vector<torch::Tensor>& logits) {
  double lo = 1.0, hi = 0.0, max_abs = 0.0;
  for (const auto& l : logits) {
    auto p = torch::sigmoid(l.detach().to(torch::kFloat64));
    lo = std::min(lo, p.min().item<double>());
    hi = std::max(hi, p.max().item<double>());
    max_abs = std::max(max_abs, l.detach().abs().max().item<double>());
  }
  diag["raw_score_min"] = lo;
  diag["raw_score_max"] = hi;
  diag["max_abs_logit"] = max_abs;
}

}  // namespace

std::string to_string(Phase phase) {
  switch (phase) {
    case Phase::pretrain_dhln: return "pretrain_dhln";
    case Phase::pretrain_fptn: return "pretrain_fptn";
    case Phase::finetune_sht: return "finetune_sht";
    case Phase::weak_finetune: return "weak_finetune";
  }
  return "pretrain_dhln";
}

Phase parse_phase(const std::string& name) {
  for (auto p : kPhases) {
    if (to_string(p) == name) return p;
  }
  fail(ErrorCode::InvalidArgument,
       "unknown phase '" + name + "' (pretrain_dhln, pretrain_fptn, finetune_sht, weak_finetune)");
}

// ---------------------------------------------------------------------------

void TrainState::append(StepRecord record) { history.push_back(std::move(record)); }

namespace {

json record_json(const StepRecord& r) {
  json j{{"step", r.step},   {"phase_step", r.phase_step}, {"phase", to_string(r.phase)},
         {"skipped", r.skipped}, {"total", r.total}};
  j["components"] = r.components;
  j["diagnostics"] = r.diagnostics;
  return j;
}

StepRecord record_from(const json& j) {
  StepRecord r;
  r.step = j.at("step").get<std::int64_t>();
  r.phase_step = j.at("phase_step").get<std::int64_t>();
  r.phase = parse_phase(j.at("phase").get<std::string>());
  r.skipped = j.at("skipped").get<bool>();
  r.total = j.at("total").is_null() ? std::nan("") : j.at("total").get<double>();
  for (const auto& [k, v] : j.at("components").items()) r.components[k] = v.is_null() ? std::nan("") : v.get<double>();
  for (const auto& [k, v] : j.at("diagnostics").items()) r.diagnostics[k] = v.is_null() ? std::nan("") : v.get<double>();
  return r;
}

}  // namespace

std::string step_record_to_json(const StepRecord& record) { return record_json(record).dump(); }

std::string TrainState::to_json() const {
  json j;
  j["phase"] = phase ? json(sht::to_string(*phase)) : json(nullptr);
  j["step"] = step;
  j["phase_step"] = phase_step;
  j["phase_steps"] = phase_steps;
  j["seed"] = seed;
  j["consecutive_skips"] = consecutive_skips;
  j["dhln_pretrained"] = dhln_pretrained;
  j["fptn_pretrained"] = fptn_pretrained;
  j["history"] = json::array();
  for (const auto& r : history) j["history"].push_back(record_json(r));
  return j.dump();
}

TrainState TrainState::from_json(const std::string& text) {
  TrainState s;
  try {
    auto j = json::parse(text);
    if (!j.at("phase").is_null()) s.phase = parse_phase(j["phase"].get<std::string>());
    s.step = j.at("step").get<std::int64_t>();
    s.phase_step = j.at("phase_step").get<std::int64_t>();
    s.phase_steps = j.at("phase_steps").get<std::int64_t>();
    s.seed = j.at("seed").get<std::uint64_t>();
    s.consecutive_skips = j.at("consecutive_skips").get<int>();
    s.dhln_pretrained = j.at("dhln_pretrained").get<bool>();
    s.fptn_pretrained = j.at("fptn_pretrained").get<bool>();
    for (const auto& r : j.at("history")) s.history.push_back(record_from(r));
  } catch (const json::exception& e) {
    fail(ErrorCode::CheckpointReadError, std::string("malformed training state: ") + e.what());
  }
  return s;
}

// ---------------------------------------------------------------------------

PairBatch collate(const std::vector<TrainingPair>& pairs, const SHTConfig& cfg) {
  require(!pairs.empty(), ErrorCode::InvalidArgument, "empty batch");
  const int p = static_cast<int>(pairs.size());
  std::vector<torch::Tensor> lr, hr, maps, labeled;
  auto zero_maps = torch::zeros({cfg.num_landmarks, cfg.heatmap_size, cfg.heatmap_size}, torch::kFloat32);
  auto push = [&](const ImageTensor& l, const ImageTensor& h, const std::optional<HeatmapStack>& m, bool lab) {
    require(l.height() == cfg.input_size && h.height() == cfg.sr_output_size, ErrorCode::ShapeMismatch,
            "training pair does not match the configured sizes");
    lr.push_back(l.data().to(torch::kFloat32));
    hr.push_back(h.data().to(torch::kFloat32));
    maps.push_back(lab && m ? m->maps().to(torch::kFloat32) : zero_maps);
    labeled.push_back(torch::tensor(lab && m.has_value()));
  };
  for (const auto& q : pairs) push(q.img_j, q.hr_j, q.gt_heatmaps_j, q.labeled);
  for (const auto& q : pairs) push(q.img_k, q.hr_k, q.gt_heatmaps_k, q.labeled);
  return PairBatch{torch::stack(lr), torch::stack(hr), torch::stack(maps), torch::stack(labeled), p};
}

TransferBatch transfer_from_ground_truth(const PairBatch& batch) {
  const int p = batch.pairs;
  return TransferBatch{batch.hr, batch.heatmaps, swap_halves(batch.heatmaps, p), swap_halves(batch.hr, p)};
}

TransferBatch transfer_from_dhln(const PairBatch& batch, const DHLNOutput& out) {
  const int p = batch.pairs;
  auto h = out.heatmaps.back().clamp(0.0, 1.0);
  return TransferBatch{out.sr_image, h, swap_halves(h, p), swap_halves(batch.hr, p)};
}

DiscriminatorScores real_scores(FPTN& fptn, const TransferBatch& t) {
  return {appearance_scores(fptn.d_appearance, t.i_con, t.i_tar), shape_scores(fptn.d_shape, t.h_tar, t.i_tar)};
}

DiscriminatorScores fake_scores(FPTN& fptn, const TransferBatch& t, const torch::Tensor& generated) {
  return {appearance_scores(fptn.d_appearance, t.i_con, generated), shape_scores(fptn.d_shape, t.h_tar, generated)};
}

LossBreakdown sht_objective(DHLN& dhln, FPTN& fptn, PerceptualExtractor* phi, const SHTConfig& cfg,
                            const PairBatch& batch, DHLNOutput* dhln_out, torch::Tensor* generated) {
  auto out = dhln->forward(batch.lr);
  auto loss = loss_dh(out.heatmaps, batch.heatmaps, batch.labeled, out.sr_image, batch.hr, cfg.gamma);
  auto t = transfer_from_dhln(batch, out);
  auto fake = fptn.generator->forward(t.i_con, t.h_con, t.h_tar);
  loss += loss_pt(t.i_tar, fake, {}, fake_scores(fptn, t, fake), cfg.lambda, GanRole::Generator, phi,
                  cfg.non_saturating_gan);
  if (dhln_out) *dhln_out = out;
  if (generated) *generated = fake;
  return loss;
}

// ---------------------------------------------------------------------------

Trainer::Trainer(const SHTConfig& cfg) : cfg_(validate_config(cfg)), fptn_((torch::manual_seed(cfg_.seed), cfg_)) {
  if (cfg_.deterministic) at::set_num_threads(1);
  dhln_ = DHLN(cfg_);
  dhln_->zero_init_fusion_and_sr();
  state_.seed = cfg_.seed;
  opt_dhln_ = std::make_unique<torch::optim::Adam>(dhln_->parameters(), torch::optim::AdamOptions(cfg_.lr_dhln));
  const auto gan_betas = std::make_tuple(0.5, 0.999);
  opt_gen_ = std::make_unique<torch::optim::Adam>(fptn_.generator->parameters(),
                                                  torch::optim::AdamOptions(cfg_.lr_fptn).betas(gan_betas));
  opt_disc_ = std::make_unique<torch::optim::Adam>(
      parameters_of({fptn_.d_appearance.ptr().get(), fptn_.d_shape.ptr().get()}),
      torch::optim::AdamOptions(cfg_.lr_fptn).betas(gan_betas));
}

double Trainer::learning_rate_factor() const {
  if (state_.phase_steps <= 0) return 1.0;
  const double progress = static_cast<double>(state_.phase_step) / static_cast<double>(state_.phase_steps);
  if (progress >= 0.85) return 0.25;
  if (progress >= 0.6) return 0.5;
  return 1.0;
}

void Trainer::apply_learning_rates() {
  const double f = learning_rate_factor();
  auto set = [](torch::optim::Optimizer& opt, double lr) {
    for (auto& g : opt.param_groups()) static_cast<torch::optim::AdamOptions&>(g.options()).lr(lr);
  };
  set(*opt_dhln_, cfg_.lr_dhln * f);
  set(*opt_gen_, cfg_.lr_fptn * f);
  set(*opt_disc_, cfg_.lr_fptn * f);
}

void Trainer::begin_phase(Phase phase, std::int64_t steps) {
  if (state_.phase == phase && state_.phase_step < state_.phase_steps) return;  // resume
  if (state_.phase) {
    require(static_cast<int>(phase) > static_cast<int>(*state_.phase), ErrorCode::PhaseViolation,
            "cannot enter " + to_string(phase) + " after " + to_string(*state_.phase));
  }
  if (phase == Phase::finetune_sht || phase == Phase::weak_finetune) {
    require(state_.dhln_pretrained && state_.fptn_pretrained, ErrorCode::PhaseViolation,
            to_string(phase) + " requires pretrained DHLN and FPTN weights");
  }
  require(steps > 0, ErrorCode::InvalidArgument, "phase step count must be positive");
  if (phase != Phase::pretrain_dhln && phi_.is_empty()) phi_ = make_perceptual_extractor(cfg_);
  state_.phase = phase;
  state_.phase_step = 0;
  state_.phase_steps = steps;
  state_.consecutive_skips = 0;
}

StepRecord Trainer::finish_step(StepRecord record, const LossBreakdown& loss) {
  record.phase = *state_.phase;
  record.step = ++state_.step;
  record.phase_step = ++state_.phase_step;
  record.total = loss.value();
  record.components = loss.values();
  if (record.skipped) {
    ++state_.consecutive_skips;
  } else {
    state_.consecutive_skips = 0;
  }
  if (state_.phase_step == state_.phase_steps) {
    if (record.phase == Phase::pretrain_dhln) state_.dhln_pretrained = true;
    if (record.phase == Phase::pretrain_fptn) state_.fptn_pretrained = true;
  }
  state_.append(record);
  if (state_.consecutive_skips >= kMaxConsecutiveSkips) {
    fail(ErrorCode::NonFiniteLoss, std::to_string(kMaxConsecutiveSkips) + " consecutive non-finite losses in " +
                                       to_string(record.phase) + " at step " + std::to_string(record.step) +
                                       " (component " + first_non_finite(loss) + ")");
  }
  return record;
}

StepRecord Trainer::step_dhln(const std::vector<TrainingPair>& pairs) {
  require(state_.phase == Phase::pretrain_dhln, ErrorCode::PhaseViolation, "step_dhln outside pretrain_dhln");
  apply_learning_rates();
  auto batch = collate(pairs, cfg_);
  dhln_->train();
  auto out = dhln_->forward(batch.lr);
  auto loss = loss_dh(out.heatmaps, batch.heatmaps, batch.labeled, out.sr_image, batch.hr, cfg_.gamma);
  StepRecord record;
  if (!all_finite(loss)) {
    record.skipped = true;
    return finish_step(record, loss);
  }
  opt_dhln_->zero_grad();
  loss.total.backward();
  opt_dhln_->step();
  return finish_step(record, loss);
}

namespace {

struct DiscriminatorStep {
  LossBreakdown loss;
  std::map<std::string, double> diagnostics;
};

/// One discriminator update on detached generator-side inputs.
DiscriminatorStep discriminator_step(FPTN& fptn, torch::optim::Optimizer& opt, const TransferBatch& t,
                                     const torch::Tensor& fake, const SHTConfig& cfg) {
  TransferBatch d{t.i_con.detach(), t.h_con.detach(), t.h_tar.detach(), t.i_tar.detach()};
  auto f = fake.detach();
  auto la_r = appearance_logits(fptn.d_appearance, d.i_con, d.i_tar);
  auto ls_r = shape_logits(fptn.d_shape, d.h_tar, d.i_tar);
  auto la_f = appearance_logits(fptn.d_appearance, d.i_con, f);
  auto ls_f = shape_logits(fptn.d_shape, d.h_tar, f);
  DiscriminatorStep out;
  record_score_stats(out.diagnostics, {la_r, ls_r, la_f, ls_f});
  DiscriminatorScores real{squash_scores(la_r), squash_scores(ls_r)};
  DiscriminatorScores fk{squash_scores(la_f), squash_scores(ls_f)};
  out.diagnostics["d_real_appearance"] = real.appearance.mean().item<double>();
  out.diagnostics["d_fake_appearance"] = fk.appearance.mean().item<double>();
  out.diagnostics["d_real_shape"] = real.shape.mean().item<double>();
  out.diagnostics["d_fake_shape"] = fk.shape.mean().item<double>();
  out.loss = loss_pt(d.i_tar, f, real, fk, cfg.lambda, GanRole::Discriminator, nullptr);
  out.diagnostics["d_loss"] = out.loss.value();
  if (std::isfinite(out.loss.value())) {
    opt.zero_grad();
    out.loss.total.backward();
    opt.step();
  }
  return out;
}

}  // namespace

StepRecord Trainer::step_fptn(const std::vector<TrainingPair>& pairs) {
  require(state_.phase == Phase::pretrain_fptn, ErrorCode::PhaseViolation, "step_fptn outside pretrain_fptn");
  apply_learning_rates();
  auto batch = collate(pairs, cfg_);
  require(batch.labeled.all().item<bool>(), ErrorCode::InvalidArgument, "FPTN pretraining needs ground-truth heatmaps");
  fptn_.generator->train();
  fptn_.d_appearance->train();
  fptn_.d_shape->train();
  auto t = transfer_from_ground_truth(batch);
  auto fake = fptn_.generator->forward(t.i_con, t.h_con, t.h_tar);
  auto d = discriminator_step(fptn_, *opt_disc_, t, fake, cfg_);

  set_requires_grad(*fptn_.d_appearance, false);
  set_requires_grad(*fptn_.d_shape, false);
  auto loss = loss_pt(t.i_tar, fake, {}, fake_scores(fptn_, t, fake), cfg_.lambda, GanRole::Generator,
                      phi_.is_empty() ? nullptr : &phi_, cfg_.non_saturating_gan);
  StepRecord record;
  record.diagnostics = d.diagnostics;
  if (!all_finite(loss) || !std::isfinite(d.loss.value())) {
    record.skipped = true;
  } else {
    opt_gen_->zero_grad();
    loss.total.backward();
    opt_gen_->step();
  }
  set_requires_grad(*fptn_.d_appearance, true);
  set_requires_grad(*fptn_.d_shape, true);
  return finish_step(record, loss);
}

StepRecord Trainer::step_sht(const std::vector<TrainingPair>& pairs) {
  require(state_.phase == Phase::finetune_sht || state_.phase == Phase::weak_finetune, ErrorCode::PhaseViolation,
          "step_sht outside finetune_sht / weak_finetune");
  apply_learning_rates();
  auto batch = collate(pairs, cfg_);
  dhln_->train();
  fptn_.generator->train();
  fptn_.d_appearance->train();
  fptn_.d_shape->train();

  auto out = dhln_->forward(batch.lr);
  auto loss = loss_dh(out.heatmaps, batch.heatmaps, batch.labeled, out.sr_image, batch.hr, cfg_.gamma);
  auto t = transfer_from_dhln(batch, out);
  auto fake = fptn_.generator->forward(t.i_con, t.h_con, t.h_tar);
  auto d = discriminator_step(fptn_, *opt_disc_, t, fake, cfg_);

  set_requires_grad(*fptn_.d_appearance, false);
  set_requires_grad(*fptn_.d_shape, false);
  loss += loss_pt(t.i_tar, fake, {}, fake_scores(fptn_, t, fake), cfg_.lambda, GanRole::Generator,
                  phi_.is_empty() ? nullptr : &phi_, cfg_.non_saturating_gan);
  StepRecord record;
  record.diagnostics = d.diagnostics;
  record.diagnostics["labeled_fraction"] = batch.labeled.to(torch::kFloat64).mean().item<double>();
  if (!all_finite(loss) || !std::isfinite(d.loss.value())) {
    record.skipped = true;
  } else {
    opt_dhln_->zero_grad();
    opt_gen_->zero_grad();
    loss.total.backward();
    opt_dhln_->step();
    opt_gen_->step();
  }
  set_requires_grad(*fptn_.d_appearance, true);
  set_requires_grad(*fptn_.d_shape, true);
  return finish_step(record, loss);
}

// ---------------------------------------------------------------------------

void Trainer::cache_images(const TrainingData& data) {
  for (const auto* list : {&data.labeled, &data.unlabeled}) {
    for (const auto& f : *list) {
      if (!f.image && image_cache_.count(f.image_path.string()) == 0) {
        image_cache_.emplace(f.image_path.string(), f.load_image());
      }
    }
  }
}

ImageTensor Trainer::image_of(const AnnotatedFace& face) {
  if (face.image) return *face.image;
  auto it = image_cache_.find(face.image_path.string());
  if (it != image_cache_.end()) return it->second;
  return image_cache_.emplace(face.image_path.string(), face.load_image()).first->second;
}

std::vector<TrainingPair> Trainer::sample_batch(const TrainingData& data) {
  require(state_.phase.has_value(), ErrorCode::PhaseViolation, "no active phase");
  const int pairs = cfg_.batch_size / 2;
  const Phase phase = *state_.phase;
  require(!data.labeled.empty() || phase == Phase::weak_finetune, ErrorCode::InvalidArgument,
          to_string(phase) + " needs labeled faces");
  int labeled_pairs = pairs;
  if (phase == Phase::weak_finetune) {
    labeled_pairs = data.labeled.empty() ? 0 : static_cast<int>(std::lround(pairs * cfg_.labeled_fraction));
    require(labeled_pairs == pairs || !data.videos.empty() || !data.unlabeled.empty(), ErrorCode::InvalidArgument,
            "weak_finetune needs unlabeled videos or faces");
  }
  std::vector<TrainingPair> out;
  out.reserve(pairs);
  for (int b = 0; b < pairs; ++b) {
    const auto index = static_cast<std::uint64_t>(state_.step) * static_cast<std::uint64_t>(pairs) + b;
    Rng rng(mix_seed(state_.seed, index));
    if (b < labeled_pairs) {
      const auto& face = data.labeled[std::uniform_int_distribution<std::size_t>(0, data.labeled.size() - 1)(rng)];
      auto pair = sample_image_pair(face, image_of(face), cfg_, rng);
      if (phase == Phase::pretrain_fptn && std::uniform_real_distribution<double>(0, 1)(rng) < cfg_.identity_pair_fraction) {
        pair.img_k = pair.img_j;
        pair.hr_k = pair.hr_j;
        pair.gt_heatmaps_k = pair.gt_heatmaps_j;
        pair.landmarks_k = pair.landmarks_j;
      }
      out.push_back(std::move(pair));
      continue;
    }
    const auto sources = data.videos.size() + data.unlabeled.size();
    const auto pick = std::uniform_int_distribution<std::size_t>(0, sources - 1)(rng);
    if (pick < data.videos.size()) {
      out.push_back(sample_video_pair(data.videos[pick], cfg_, rng));
    } else {
      const auto& face = data.unlabeled[pick - data.videos.size()];
      auto pair = sample_image_pair(face, image_of(face), cfg_, rng);
      pair.labeled = false;
      pair.gt_heatmaps_j.reset();
      pair.gt_heatmaps_k.reset();
      out.push_back(std::move(pair));
    }
  }
  return out;
}

void Trainer::run_phase(Phase phase, const TrainingData& data, std::int64_t steps, const RunOptions& options) {
  begin_phase(phase, steps);
  cache_images(data);
  std::ofstream log;
  if (!options.log_path.empty()) {
    if (options.log_path.has_parent_path()) std::filesystem::create_directories(options.log_path.parent_path());
    log.open(options.log_path, std::ios::app);
    require(log.good(), ErrorCode::InvalidArgument, "cannot open metrics log " + options.log_path.string());
  }
  while (state_.phase_step < state_.phase_steps) {
    auto pairs = sample_batch(data);
    StepRecord record;
    switch (phase) {
      case Phase::pretrain_dhln: record = step_dhln(pairs); break;
      case Phase::pretrain_fptn: record = step_fptn(pairs); break;
      default: record = step_sht(pairs); break;
    }
    if (log.is_open()) log << step_record_to_json(record) << '\n' << std::flush;
    if (options.on_step) options.on_step(record);
    if (!options.checkpoint_path.empty() && options.checkpoint_every > 0 &&
        state_.phase_step % options.checkpoint_every == 0 && state_.phase_step < state_.phase_steps) {
      save_checkpoint(options.checkpoint_path);
    }
  }
  if (!options.checkpoint_path.empty()) save_checkpoint(options.checkpoint_path);
}

// ---------------------------------------------------------------------------

Checkpoint Trainer::to_checkpoint() const {
  Checkpoint c;
  c.config_text = config_to_text(cfg_);
  const bool dhln_weights = state_.dhln_pretrained || (state_.phase && *state_.phase != Phase::pretrain_fptn);
  const bool fptn_weights = state_.fptn_pretrained || (state_.phase && *state_.phase != Phase::pretrain_dhln);
  if (dhln_weights) {
    c.sections["dhln"] = module_state(*dhln_);
    c.blobs["optimizer/dhln"] = optimizer_blob(*opt_dhln_);
  }
  if (fptn_weights) {
    c.sections["generator"] = module_state(*fptn_.generator);
    c.sections["d_appearance"] = module_state(*fptn_.d_appearance);
    c.sections["d_shape"] = module_state(*fptn_.d_shape);
    c.blobs["optimizer/generator"] = optimizer_blob(*opt_gen_);
    c.blobs["optimizer/discriminators"] = optimizer_blob(*opt_disc_);
  }
  if (!phi_.is_empty()) c.blobs["perceptual"] = phi_->identity();
  c.blobs["train_state"] = state_.to_json();
  return c;
}

void Trainer::save_checkpoint(const std::filesystem::path& path) const { write_checkpoint(to_checkpoint(), path); }

void Trainer::load_checkpoint(const Checkpoint& ckpt) {
  require_compatible(ckpt.config(), cfg_);
  auto restore = [&](const std::string& section, torch::nn::Module& m) {
    auto it = ckpt.sections.find(section);
    if (it != ckpt.sections.end()) load_module_state(m, it->second, section);
  };
  restore("dhln", *dhln_);
  restore("generator", *fptn_.generator);
  restore("d_appearance", *fptn_.d_appearance);
  restore("d_shape", *fptn_.d_shape);
  auto blob = [&](const std::string& name, torch::optim::Optimizer& opt) {
    auto it = ckpt.blobs.find(name);
    if (it != ckpt.blobs.end()) load_optimizer_blob(opt, it->second);
  };
  blob("optimizer/dhln", *opt_dhln_);
  blob("optimizer/generator", *opt_gen_);
  blob("optimizer/discriminators", *opt_disc_);
  auto it = ckpt.blobs.find("train_state");
  if (it != ckpt.blobs.end()) {
    state_ = TrainState::from_json(it->second);
  } else {
    state_ = TrainState{};
    state_.seed = cfg_.seed;
  }
  state_.dhln_pretrained = state_.dhln_pretrained || ckpt.has_section("dhln");
  state_.fptn_pretrained = state_.fptn_pretrained || ckpt.has_section("generator");
  if (state_.phase && *state_.phase != Phase::pretrain_dhln && phi_.is_empty()) phi_ = make_perceptual_extractor(cfg_);
}

void Trainer::load_checkpoint(const std::filesystem::path& path) { load_checkpoint(read_checkpoint(path)); }

// ---------------------------------------------------------------------------

void write_manifest(const std::filesystem::path& path, const std::map<std::string, std::string>& dataset_roots,
                    const std::vector<std::pair<Phase, std::int64_t>>& phases, int checkpoint_every,
                    const SHTConfig& cfg, const std::string& perceptual_identity) {
  json j;
  j["dataset_roots"] = dataset_roots;
  j["phases"] = json::array();
  for (const auto& [phase, steps] : phases) j["phases"].push_back({{"phase", to_string(phase)}, {"steps", steps}});
  j["checkpoint_every"] = checkpoint_every;
  j["seed"] = cfg.seed;
  j["perceptual"] = perceptual_identity;
  j["config"] = config_to_text(cfg);
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  out << j.dump(2) << '\n';
  require(out.good(), ErrorCode::InvalidArgument, "cannot write manifest " + path.string());
}

}  // namespace sht
