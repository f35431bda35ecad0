// hpgn command-line front end.

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <string>

#include "hpgn/checkpoint.hpp"
#include "hpgn/dataset.hpp"
#include "hpgn/errors.hpp"
#include "hpgn/io_util.hpp"
#include "hpgn/selftest.hpp"
#include "hpgn/training.hpp"

namespace fs = std::filesystem;
using namespace hpgn;

namespace {

std::string read_text(const fs::path& path) {
  const auto bytes = read_file_bytes(path);
  return std::string(bytes.begin(), bytes.end());
}

int parse_qf_flag(const std::string& text) {
  try {
    std::size_t used = 0;
    const int q = std::stoi(text, &used);
    if (used == text.size()) return QualityFactor(q).value();
  } catch (const std::logic_error&) {
  }
  throw ConfigError("--qf expects an integer in [1, 100], got '" + text + "'");
}

void print_qm(const QuantizationMatrix& qm) {
  std::cout << format_qm_grid(qm);
  const auto v = qm_to_feature_vector(qm);
  std::cout << "normalized:";
  for (const double x : v) std::printf(" %.6f", x);
  std::cout << '\n';
}

void log_loss(std::size_t step, double loss) { std::fprintf(stderr, "step %zu loss %.6f\n", step, loss); }

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Compressed low-light image enhancement toolkit", "hpgn"};
  app.require_subcommand(1);

  std::string in, out, config_path, data, ckpt, qf_text, qf_mode_text = "fixed:80", report, resume, eval_data;
  int qf = 80;
  bool chroma = false;
  std::uint64_t seed = 1;
  std::size_t count = 8, size = 96;

  auto* compress = app.add_subcommand("compress", "JPEG-style compress/decompress round trip of a PNG");
  compress->add_option("--in", in, "Input image")->required();
  compress->add_option("--qf", qf, "Quality factor 1-100")->required()->check(CLI::Range(1, 100));
  compress->add_option("--out", out, "Output PNG")->required();

  auto* inspect = app.add_subcommand("inspect-qm", "Print the quantization table for a quality factor");
  inspect->add_option("--qf", qf, "Quality factor 1-100")->required()->check(CLI::Range(1, 100));
  inspect->add_flag("--chroma", chroma, "Show the chroma table instead of luma");

  auto* train_cmd = app.add_subcommand("train", "Train a model");
  train_cmd->add_option("--config", config_path, "key=value config file")->required();
  train_cmd->add_option("--data", data, "Dataset root with low/ and high/")->required();
  train_cmd->add_option("--out", out, "Output checkpoint")->required();
  train_cmd->add_option("--resume", resume, "Continue from this checkpoint");

  auto* enhance_cmd = app.add_subcommand("enhance", "Enhance one image");
  enhance_cmd->add_option("--ckpt", ckpt, "Checkpoint")->required();
  enhance_cmd->add_option("--in", in, "Compressed low-light image")->required();
  enhance_cmd->add_option("--qf", qf_text, "Quality factor 1-100, or auto")->required();
  enhance_cmd->add_option("--out", out, "Output PNG")->required();

  auto* eval_cmd = app.add_subcommand("eval", "Evaluate a checkpoint and write a metrics report");
  eval_cmd->add_option("--ckpt", ckpt, "Checkpoint")->required();
  eval_cmd->add_option("--data", data, "Dataset root with low/ and high/")->required();
  eval_cmd->add_option("--qf-mode", qf_mode_text, "fixed:Q or random:LO:HI")->capture_default_str();
  eval_cmd->add_option("--report", report, "Output report")->required();
  eval_cmd->add_option("--seed", seed, "Seed for random QF draws")->capture_default_str();

  auto* ablate = app.add_subcommand("ablate", "Train and compare baseline, +QF, +QM and full variants");
  ablate->add_option("--config", config_path, "key=value config file")->required();
  ablate->add_option("--data", data, "Training dataset root")->required();
  ablate->add_option("--out", out, "Output directory")->required();
  ablate->add_option("--eval-data", eval_data, "Evaluation dataset root (defaults to --data)");
  ablate->add_option("--qf-mode", qf_mode_text, "Evaluation QF mode (defaults to the training mode)");

  auto* selftest = app.add_subcommand("selftest", "Run the built-in invariant checks");

  auto* corpus = app.add_subcommand("make-corpus", "Write a synthetic paired low/high corpus");
  corpus->add_option("--out", out, "Output directory")->required();
  corpus->add_option("--count", count, "Number of pairs")->capture_default_str();
  corpus->add_option("--size", size, "Square image size in pixels")->capture_default_str();
  corpus->add_option("--seed", seed, "Generator seed")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success&) {
    std::cout << (app.get_subcommands().empty() ? app.help() : app.get_subcommands().front()->help());
    return 0;
  } catch (const CLI::ParseError& e) {
    std::cerr << "hpgn: " << e.what() << '\n';
    return 1;
  }

  try {
    if (compress->parsed()) {
      write_png(out, compress_roundtrip(read_image(in), QualityFactor(qf)));
    } else if (inspect->parsed()) {
      print_qm(qf_to_qm(QualityFactor(qf), chroma ? ChannelKind::chroma : ChannelKind::luma));
    } else if (train_cmd->parsed()) {
      const auto config = TrainConfig::parse(read_text(config_path));
      const auto pairs = ingest(data);
      std::optional<Checkpoint> start;
      if (!resume.empty()) start = load_checkpoint(resume);
      TrainHooks hooks;
      hooks.on_log = log_loss;
      hooks.on_checkpoint = [&](const Checkpoint& c) {
        save_checkpoint(out + ".step" + std::to_string(c.step), c);
      };
      const auto result = train(config, pairs, hooks, start ? &*start : nullptr);
      save_checkpoint(out, result.checkpoint);
    } else if (enhance_cmd->parsed()) {
      const auto model = restore_model(load_checkpoint(ckpt));
      const auto image = read_image(in);
      const auto q = qf_text == "auto" ? estimate_qf(image) : QualityFactor(parse_qf_flag(qf_text));
      if (qf_text == "auto") std::fprintf(stderr, "estimated qf %d\n", q.value());
      write_png(out, enhance_image(model, image, q));
    } else if (eval_cmd->parsed()) {
      const auto mode = QfMode::parse(qf_mode_text);
      const auto checkpoint = load_checkpoint(ckpt);
      const auto pairs = ingest(data);
      const auto result = evaluate(checkpoint, pairs, mode, seed);
      write_report(report, result);
      std::printf("mean psnr %.4f dB, mean ssim %.4f over %zu images\n", result.mean_psnr(), result.mean_ssim(),
                  result.records.size());
    } else if (ablate->parsed()) {
      const auto config = TrainConfig::parse(read_text(config_path));
      const auto mode = ablate->count("--qf-mode") ? QfMode::parse(qf_mode_text) : config.qf_mode;
      const auto train_pairs = ingest(data);
      const auto eval_pairs = eval_data.empty() ? train_pairs : ingest(eval_data);
      AblationOptions options;
      options.on_log = [](Variant v, std::size_t step, double loss) {
        std::fprintf(stderr, "[%s] step %zu loss %.6f\n", to_string(v).c_str(), step, loss);
      };
      const auto rows = ablation(config, train_pairs, eval_pairs, mode, options);
      fs::create_directories(out);
      for (const auto& row : rows) {
        const auto name = to_string(row.variant);
        save_checkpoint(fs::path(out) / (name + ".ckpt"), row.checkpoint);
        write_report(fs::path(out) / (name + ".report"), row.report);
      }
      const auto table = format_ablation_table(rows);
      write_file_atomic(fs::path(out) / "table.md", table);
      std::cout << table;
    } else if (selftest->parsed()) {
      return run_selftest(std::cout) ? 0 : 2;
    } else if (corpus->parsed()) {
      if (count == 0 || size < 16) throw ConfigError("make-corpus needs --count >= 1 and --size >= 16");
      write_desk_corpus(out, count, size, size, seed);
    }
  } catch (const ConfigError& e) {
    std::cerr << "hpgn: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::string msg = e.what();
    for (auto& c : msg) {
      if (c == '\n') c = ';';
    }
    std::cerr << "hpgn: error: " << msg << '\n';
    return 2;
  }
  return 0;
}
