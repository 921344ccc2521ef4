#pragma once

#include <torch/torch.h>

#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "sht/checkpoint.hpp"
#include "sht/config.hpp"
#include "sht/data.hpp"
#include "sht/dhln.hpp"
#include "sht/fptn.hpp"
#include "sht/losses.hpp"
#include "sht/sampling.hpp"

namespace sht {

enum class Phase { pretrain_dhln = 0, pretrain_fptn = 1, finetune_sht = 2, weak_finetune = 3 };

std::string to_string(Phase phase);
Phase parse_phase(const std::string& name);

struct StepRecord {
  std::int64_t step = 0;        // global step, 1-based
  std::int64_t phase_step = 0;  // step within the phase, 1-based
  Phase phase = Phase::pretrain_dhln;
  bool skipped = false;
  double total = 0.0;
  std::map<std::string, double> components;
  std::map<std::string, double> diagnostics;
};

/// Progress through the phase schedule. Phases advance in declared order;
/// any phase may be skipped, none may be revisited once another has begun.
struct TrainState {
  std::optional<Phase> phase;
  std::int64_t step = 0;
  std::int64_t phase_step = 0;
  std::int64_t phase_steps = 0;
  std::uint64_t seed = 0;
  int consecutive_skips = 0;
  bool dhln_pretrained = false;
  bool fptn_pretrained = false;
  std::vector<StepRecord> history;

  void append(StepRecord record);
  std::string to_json() const;
  static TrainState from_json(const std::string& text);
};

/// One batch in network layout: all j members followed by all k members.
struct PairBatch {
  torch::Tensor lr;        // 2P×3×s×s
  torch::Tensor hr;        // 2P×3×S×S
  torch::Tensor heatmaps;  // 2P×L×h×w, zeros where unlabeled
  torch::Tensor labeled;   // 2P bool
  int pairs = 0;
};

PairBatch collate(const std::vector<TrainingPair>& pairs, const SHTConfig& cfg);

/// Both transfer directions stacked: rows [0,P) are j→k, rows [P,2P) are k→j.
struct TransferBatch {
  torch::Tensor i_con, h_con, h_tar, i_tar;
};

/// Transfer inputs built from ground truth (pretraining FPTN).
TransferBatch transfer_from_ground_truth(const PairBatch& batch);
/// Transfer inputs built from DHLN outputs: hallucinated faces as conditions
/// and final-stack heatmaps clamped to [0,1], both keeping their gradients.
TransferBatch transfer_from_dhln(const PairBatch& batch, const DHLNOutput& out);

DiscriminatorScores real_scores(FPTN& fptn, const TransferBatch& t);
DiscriminatorScores fake_scores(FPTN& fptn, const TransferBatch& t, const torch::Tensor& generated);

/// Generator-side objective of a DHLN + FPTN forward pass on `batch` (the
/// Eq. 9 total in the generator role). `dhln_out` and `generated` receive the
/// intermediate results when non-null.
LossBreakdown sht_objective(DHLN& dhln, FPTN& fptn, PerceptualExtractor* phi, const SHTConfig& cfg,
                            const PairBatch& batch, DHLNOutput* dhln_out = nullptr,
                            torch::Tensor* generated = nullptr);

struct RunOptions {
  std::filesystem::path checkpoint_path;  // empty: no checkpoints
  int checkpoint_every = 0;               // 0: only at the end of the phase
  std::filesystem::path log_path;         // empty: no metrics log
  std::function<void(const StepRecord&)> on_step;
};

struct TrainingData {
  std::vector<AnnotatedFace> labeled;
  std::vector<AnnotatedFace> unlabeled;  // landmarks ignored
  std::vector<VideoSequence> videos;
};

/// Owns the networks, optimizers and schedule state of one training run.
class Trainer {
 public:
  explicit Trainer(const SHTConfig& cfg);

  const SHTConfig& config() const { return cfg_; }
  DHLN& dhln() { return dhln_; }
  FPTN& fptn() { return fptn_; }
  PerceptualExtractor& perceptual() { return phi_; }
  TrainState& state() { return state_; }
  const TrainState& state() const { return state_; }

  /// Enters `phase` for `steps` steps, or continues it after a resume.
  void begin_phase(Phase phase, std::int64_t steps);

  StepRecord step_dhln(const std::vector<TrainingPair>& pairs);
  StepRecord step_fptn(const std::vector<TrainingPair>& pairs);
  StepRecord step_sht(const std::vector<TrainingPair>& pairs);

  /// Draws the pairs of the current step; deterministic in (seed, phase, step).
  std::vector<TrainingPair> sample_batch(const TrainingData& data);

  /// Runs the remaining steps of `phase` (begin_phase included).
  void run_phase(Phase phase, const TrainingData& data, std::int64_t steps, const RunOptions& options = {});

  Checkpoint to_checkpoint() const;
  void save_checkpoint(const std::filesystem::path& path) const;
  /// Restores weights, optimizer states and schedule state. Shape-defining
  /// configuration fields must match.
  void load_checkpoint(const Checkpoint& ckpt);
  void load_checkpoint(const std::filesystem::path& path);

  double learning_rate_factor() const;

 private:
  StepRecord finish_step(StepRecord record, const LossBreakdown& loss);
  void apply_learning_rates();
  void cache_images(const TrainingData& data);
  ImageTensor image_of(const AnnotatedFace& face);

  SHTConfig cfg_;
  DHLN dhln_{nullptr};
  FPTN fptn_;
  PerceptualExtractor phi_{nullptr};
  std::unique_ptr<torch::optim::Adam> opt_dhln_, opt_gen_, opt_disc_;
  TrainState state_;
  std::map<std::string, ImageTensor> image_cache_;
};

/// Writes the run manifest: dataset roots, phase step counts, checkpoint
/// cadence, configuration and perceptual-extractor identity.
void write_manifest(const std::filesystem::path& path, const std::map<std::string, std::string>& dataset_roots,
                    const std::vector<std::pair<Phase, std::int64_t>>& phases, int checkpoint_every,
                    const SHTConfig& cfg, const std::string& perceptual_identity);

std::string step_record_to_json(const StepRecord& record);

}  // namespace sht
