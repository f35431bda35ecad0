#include "hpgn/training.hpp"

#include <cmath>
#include <cstdio>
#include <optional>

#include "hpgn/errors.hpp"

namespace hpgn {

namespace {

std::string batch_metadata(const Batch& batch) {
  std::string out;
  for (std::size_t i = 0; i < batch.examples.size(); ++i) {
    const auto& ex = batch.examples[i];
    if (i) out += ", ";
    out += batch.names[i] + "@(" + std::to_string(ex.x0) + "," + std::to_string(ex.y0) +
           ") qf=" + std::to_string(ex.qf.value());
  }
  return out;
}

std::size_t parameter_count(const TrainConfig& config) {
  return HpgnModel<float>::create(config.model, config.seed).parameters().scalar_count();
}

}  // namespace

TrainResult train(const TrainConfig& config, const std::vector<ImagePair>& data, const TrainHooks& hooks,
                  const Checkpoint* resume) {
  config.validate();
  if (data.empty()) throw ContractError("train: empty dataset");

  std::optional<HpgnModel<float>> model_slot;
  Rng rng(config.seed);
  std::size_t start = 0;
  if (resume) {
    if (resume->config.hash() != config.hash()) {
      auto a = resume->config, b = config;
      a.steps = b.steps = 0;
      if (a.hash() != b.hash()) throw IncompatibleCheckpoint("resume checkpoint was trained with a different config");
    }
    model_slot = restore_model(*resume);
    rng = restore_rng(*resume);
    start = resume->step;
  } else {
    model_slot = HpgnModel<float>::create(config.model, config.seed);
  }
  auto& model = *model_slot;
  auto params = model.parameters();
  auto adam = resume ? restore_optimizer(*resume, params) : Adam<float>(params, config.adam);

  std::optional<PerceptualExtractor<float>> extractor;
  if (config.loss.mode != PerceptualMode::off && config.loss.lambda_per != 0.0) extractor.emplace(config.loss.extractor_seed);

  TrainResult result;
  for (std::size_t step = start; step < config.steps; ++step) {
    const auto batch = make_batch(data, step, rng, config);
    double loss_value = 0;
    {
      Tape<float> tape;
      const auto out = model.forward(batch.compressed, batch.qfs, batch.qms);
      const auto loss = total_loss(out.enhanced, batch.high, config.loss, extractor ? &*extractor : nullptr);
      loss_value = static_cast<double>(loss.item());
      if (!std::isfinite(loss_value)) {
        throw TrainingError("non-finite loss at step " + std::to_string(step + 1) + " (batch: " +
                            batch_metadata(batch) + ")");
      }
      backward(loss);
    }
    try {
      adam.step(params);
    } catch (const NumericError& e) {
      throw TrainingError("step " + std::to_string(step + 1) + ": " + e.what() + " (batch: " + batch_metadata(batch) + ")");
    }
    params.zero_grads();
    result.losses.push_back(loss_value);
    const std::size_t done = step + 1;
    if (hooks.on_log && ((config.log_every && done % config.log_every == 0) || done == config.steps)) {
      hooks.on_log(done, loss_value);
    }
    if (hooks.on_checkpoint && config.checkpoint_every && done % config.checkpoint_every == 0 && done != config.steps) {
      hooks.on_checkpoint(snapshot(config, done, model, adam, rng));
    }
  }
  result.checkpoint = snapshot(config, std::max<std::size_t>(start, config.steps), model, adam, rng);
  return result;
}

MetricsReport evaluate_model(const HpgnModel<float>& model, const std::vector<ImagePair>& data, const QfMode& mode,
                             std::uint64_t seed) {
  MetricsReport report;
  report.seed = seed;
  report.qf_mode = mode.str();
  Rng rng(seed);
  for (const auto& pair : data) {
    const auto qf = sample_qf(rng, mode);
    const auto compressed = compress_roundtrip(pair.low, qf);
    const auto enhanced = enhance_image(model, compressed, qf);
    report.records.push_back({pair.low_path.string(), qf.value(), psnr(enhanced, pair.high), ssim(enhanced, pair.high)});
  }
  return report;
}

MetricsReport evaluate(const Checkpoint& checkpoint, const std::vector<ImagePair>& data, const QfMode& mode,
                       std::uint64_t seed) {
  if (checkpoint.version != kCheckpointVersion) {
    throw IncompatibleCheckpoint("checkpoint format version " + std::to_string(checkpoint.version) + " is not supported");
  }
  const auto model = restore_model(checkpoint);
  auto report = evaluate_model(model, data, mode, seed);
  report.config_hash = checkpoint.config.hash();
  report.step = checkpoint.step;
  return report;
}

MetricsReport evaluate_passthrough(const std::vector<ImagePair>& data, const QfMode& mode, std::uint64_t seed) {
  MetricsReport report;
  report.seed = seed;
  report.qf_mode = mode.str();
  Rng rng(seed);
  for (const auto& pair : data) {
    const auto qf = sample_qf(rng, mode);
    const auto compressed = compress_roundtrip(pair.low, qf);
    report.records.push_back(
        {pair.low_path.string(), qf.value(), psnr(compressed, pair.high), ssim(compressed, pair.high)});
  }
  return report;
}

CropScores score_training_crops(const HpgnModel<float>& model, const std::vector<ImagePair>& data,
                                const TrainConfig& config, std::uint64_t seed, std::size_t rounds) {
  NoGradGuard<float> no_grad;
  Rng rng(seed);
  CropScores scores;
  for (std::size_t r = 0; r < rounds; ++r) {
    for (const auto& pair : data) {
      const auto ex = make_example(pair, rng, config);
      const QualityFactor qfs[] = {ex.qf};
      const QuantizationMatrix qms[] = {ex.qm};
      const auto out = model.forward(image_to_tensor<float>(ex.compressed), qfs, qms).enhanced;
      scores.enhanced_psnr += psnr(tensor_to_image(out), ex.high);
      scores.compressed_psnr += psnr(ex.compressed, ex.high);
      ++scores.count;
    }
  }
  if (scores.count) {
    scores.enhanced_psnr /= static_cast<double>(scores.count);
    scores.compressed_psnr /= static_cast<double>(scores.count);
  }
  return scores;
}

std::vector<AblationRow> ablation(const TrainConfig& config, const std::vector<ImagePair>& train_data,
                                  const std::vector<ImagePair>& eval_data, const QfMode& eval_mode,
                                  const AblationOptions& options) {
  config.validate();
  std::vector<AblationRow> rows;
  for (const auto variant : {Variant::baseline, Variant::qf_only, Variant::qm_only, Variant::full}) {
    auto variant_config = config;
    variant_config.model.variant = variant;
    TrainResult run;
    if (variant == Variant::full && options.full_run &&
        options.full_run->checkpoint.config.hash() == variant_config.hash()) {
      run = *options.full_run;
    } else {
      TrainHooks hooks;
      if (options.on_log) hooks.on_log = [&](std::size_t s, double l) { options.on_log(variant, s, l); };
      run = train(variant_config, train_data, hooks);
    }
    AblationRow row;
    row.variant = variant;
    row.parameter_count = parameter_count(variant_config);
    row.final_loss = run.losses.empty() ? std::nan("") : run.losses.back();
    row.report = evaluate(run.checkpoint, eval_data, eval_mode, config.seed);
    row.checkpoint = std::move(run.checkpoint);
    rows.push_back(std::move(row));
  }
  return rows;
}

std::string format_ablation_table(const std::vector<AblationRow>& rows) {
  std::string out =
      "| Variant  | QF-branch | QM-branch | Params  | Final loss | PSNR (dB) | SSIM   |\n"
      "|----------|:---------:|:---------:|--------:|-----------:|----------:|-------:|\n";
  for (const auto& row : rows) {
    const char* label = "Baseline";
    bool qf = false, qm = false;
    switch (row.variant) {
      case Variant::baseline: break;
      case Variant::qf_only: label = "+QF"; qf = true; break;
      case Variant::qm_only: label = "+QM"; qm = true; break;
      case Variant::full: label = "Full"; qf = qm = true; break;
    }
    char line[256];
    std::snprintf(line, sizeof line, "| %-8s | %s | %s | %7zu | %10.6f | %9.3f | %6.4f |\n", label,
                  qf ? "    ✓    " : "         ", qm ? "    ✓    " : "         ", row.parameter_count, row.final_loss,
                  row.report.mean_psnr(), row.report.mean_ssim());
    out += line;
  }
  return out;
}

}  // namespace hpgn
