#pragma once

// Training loop, evaluation and the four-variant ablation harness.

#include <functional>
#include <string>
#include <vector>

#include "hpgn/checkpoint.hpp"
#include "hpgn/dataset.hpp"
#include "hpgn/metrics.hpp"

namespace hpgn {

struct TrainHooks {
  /// Called every `log_every` steps (1-based step count) and after the last step.
  std::function<void(std::size_t step, double loss)> on_log;
  /// Called every `checkpoint_every` steps with the state after that step.
  std::function<void(const Checkpoint&)> on_checkpoint;
};

struct TrainResult {
  Checkpoint checkpoint;
  std::vector<double> losses;  // one per step run by this call
};

/// Deterministic given the config and data. With `resume`, continues from its
/// step, weights, optimizer moments and RNG state up to `config.steps`. Throws
/// TrainingError on a non-finite loss.
TrainResult train(const TrainConfig& config, const std::vector<ImagePair>& data, const TrainHooks& hooks = {},
                  const Checkpoint* resume = nullptr);

/// Full-image evaluation with QFs drawn from `mode` using an RNG seeded by `seed`.
MetricsReport evaluate_model(const HpgnModel<float>& model, const std::vector<ImagePair>& data, const QfMode& mode,
                             std::uint64_t seed);
/// As evaluate_model, with the report stamped with the checkpoint's config hash and step.
MetricsReport evaluate(const Checkpoint& checkpoint, const std::vector<ImagePair>& data, const QfMode& mode,
                       std::uint64_t seed);
/// Scores the compressed input itself against the ground truth (same QF draws).
MetricsReport evaluate_passthrough(const std::vector<ImagePair>& data, const QfMode& mode, std::uint64_t seed);

struct CropScores {
  double enhanced_psnr = 0;    // mean PSNR(I_en, I_high)
  double compressed_psnr = 0;  // mean PSNR(I_comp, I_high)
  std::size_t count = 0;
};

/// Scores `rounds` passes over `data` of training-style crops (same sampling as
/// training, RNG seeded by `seed`).
CropScores score_training_crops(const HpgnModel<float>& model, const std::vector<ImagePair>& data,
                                const TrainConfig& config, std::uint64_t seed, std::size_t rounds);

struct AblationRow {
  Variant variant = Variant::baseline;
  std::size_t parameter_count = 0;
  double final_loss = 0;
  MetricsReport report;
  Checkpoint checkpoint;
};

struct AblationOptions {
  /// Reused for the full variant when its config matches, saving one training run.
  const TrainResult* full_run = nullptr;
  std::function<void(Variant, std::size_t step, double loss)> on_log;
};

/// Trains baseline, +QF, +QM and full under one seed and budget, then evaluates
/// each on `eval_data` with the same QF draws.
std::vector<AblationRow> ablation(const TrainConfig& config, const std::vector<ImagePair>& train_data,
                                  const std::vector<ImagePair>& eval_data, const QfMode& eval_mode,
                                  const AblationOptions& options = {});

/// Markdown table, rows in the order baseline, +QF, +QM, full.
std::string format_ablation_table(const std::vector<AblationRow>& rows);

}  // namespace hpgn
