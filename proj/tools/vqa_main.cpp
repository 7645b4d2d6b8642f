// vqa: data generation, training, evaluation, ablations and gradient checks.
#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "vqa/config.hpp"
#include "vqa/dataset.hpp"
#include "vqa/errors.hpp"
#include "vqa/gradcheck_suite.hpp"
#include "vqa/metrics.hpp"
#include "vqa/tensor.hpp"
#include "vqa/trainer.hpp"

namespace fs = std::filesystem;

namespace {

struct Common {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string out;
};

void add_common(CLI::App* cmd, Common& c, bool out_required) {
  cmd->add_option("--config", c.config_path, "key=value model/training config")->check(CLI::ExistingFile);
  cmd->add_option("--seed", c.seed, "master seed (overrides the config)");
  auto* out = cmd->add_option("--out", c.out, "output directory");
  if (out_required) out->required();
}

vqa::ModelConfig load_config(const Common& c) {
  vqa::ModelConfig config = c.config_path.empty() ? vqa::ModelConfig{} : vqa::ModelConfig::load(c.config_path);
  if (c.seed) config.seed = *c.seed;
  config.validate();
  return config;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
}

// Table on stdout; the CSV goes to <out>/<name> or, without --out, after the table.
void emit_reports(const vqa::ReportRows& rows, const std::string& out_dir, const std::string& name) {
  std::cout << vqa::format_table(rows);
  if (out_dir.empty()) {
    std::cout << '\n' << vqa::format_csv(rows);
  } else {
    fs::create_directories(out_dir);
    write_text(fs::path(out_dir) / name, vqa::format_csv(rows));
    std::cout << "wrote " << (fs::path(out_dir) / name).string() << '\n';
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Attention-based VQA on synthetic shape scenes"};
  app.require_subcommand(1);

  Common gen;
  std::size_t pairs = 3000, val_pairs = 500;
  auto* gen_cmd = app.add_subcommand("gen-data", "generate train.tsv and val.tsv");
  add_common(gen_cmd, gen, true);
  gen_cmd->add_option("--pairs-per-category", pairs, "training pairs per question category");
  gen_cmd->add_option("--val-pairs-per-category", val_pairs, "validation pairs per question category");

  Common tr;
  std::string train_data;
  std::optional<std::size_t> epochs;
  auto* train_cmd = app.add_subcommand("train", "train a model; writes config, vocabulary, checkpoint and log");
  add_common(train_cmd, tr, true);
  train_cmd->add_option("--data", train_data, "directory with train.tsv and val.tsv")->required();
  train_cmd->add_option("--epochs", epochs, "override the configured epoch count");

  Common ev;
  std::string run_dir, eval_data;
  auto* eval_cmd = app.add_subcommand("eval", "evaluate a trained run on a dataset file");
  add_common(eval_cmd, ev, false);
  eval_cmd->add_option("--run", run_dir, "run directory written by train")->required()->check(CLI::ExistingDirectory);
  eval_cmd->add_option("--data", eval_data, "dataset file")->required()->check(CLI::ExistingFile);

  Common ab;
  std::string ablate_data;
  std::vector<std::string> modes = {"none", "no-count", "no-text", "no-attention", "no-attn-count"};
  auto* ablate_cmd = app.add_subcommand("ablate", "train and compare ablation modes");
  add_common(ablate_cmd, ab, true);
  ablate_cmd->add_option("--data", ablate_data, "directory with train.tsv and val.tsv")->required();
  ablate_cmd->add_option("--modes", modes, "subset of none, no-count, no-text, no-attention, no-attn-count");
  ablate_cmd->add_option("--epochs", epochs, "override the configured epoch count");

  Common gc;
  std::string fault;
  auto* grad_cmd = app.add_subcommand("gradcheck", "finite-difference check of every layer and the full loss");
  add_common(grad_cmd, gc, false);
  grad_cmd->add_option("--inject-fault", fault, "testing hook: double the gradient of this op (e.g. linear)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*gen_cmd) {
      const auto config = load_config(gen);
      const auto data = vqa::generate_dataset(config.seed, pairs, val_pairs);
      fs::create_directories(gen.out);
      vqa::write_dataset(fs::path(gen.out) / "train.tsv", data.train);
      vqa::write_dataset(fs::path(gen.out) / "val.tsv", data.val);
      std::cout << "wrote " << data.train.size() << " training and " << data.val.size() << " validation samples to "
                << gen.out << '\n';
      return 0;
    }
    if (*train_cmd) {
      auto config = load_config(tr);
      if (epochs) config.epochs = *epochs;
      const auto train_set = vqa::read_dataset(fs::path(train_data) / "train.tsv");
      const auto val_set = vqa::read_dataset(fs::path(train_data) / "val.tsv");
      vqa::TrainOptions options{tr.out, &std::cerr};
      auto result = vqa::train(config, train_set, val_set, options);
      std::cout << "best epoch " << result.best_epoch << '\n';
      emit_reports({{"val", result.epochs.at(result.best_epoch - 1).val}}, tr.out, "val_report.csv");
      return 0;
    }
    if (*eval_cmd) {
      auto run = vqa::load_run(run_dir);
      const auto samples = vqa::read_dataset(fs::path(eval_data));
      const auto report = vqa::evaluate(*run.model, run.vocab, samples);
      emit_reports({{fs::path(eval_data).stem().string(), report}}, ev.out, "report.csv");
      return 0;
    }
    if (*ablate_cmd) {
      auto config = load_config(ab);
      if (epochs) config.epochs = *epochs;
      std::vector<vqa::Ablation> parsed;
      for (const auto& m : modes) parsed.push_back(vqa::parse_ablation(m));
      const auto train_set = vqa::read_dataset(fs::path(ablate_data) / "train.tsv");
      const auto val_set = vqa::read_dataset(fs::path(ablate_data) / "val.tsv");
      vqa::TrainOptions options{ab.out, &std::cerr};
      const auto results = vqa::ablate(config, parsed, train_set, val_set, options);
      vqa::ReportRows rows;
      for (const auto& r : results) rows.emplace_back(std::string(vqa::to_string(r.mode)), r.val);
      emit_reports(rows, ab.out, "ablation.csv");
      return 0;
    }
    if (*grad_cmd) {
      const auto config = load_config(gc);
      vqa::set_gradient_fault(fault);
      const auto result = vqa::run_gradcheck_suite(config, &std::cout);
      vqa::set_gradient_fault("");
      std::cout << (result.passed() ? "all checks passed" : "gradient check FAILED") << " in " << result.seconds
                << " s\n";
      return result.passed() ? 0 : 1;
    }
  } catch (const vqa::ParseError& e) {
    std::cerr << "parse error: " << e.what() << '\n';
    return 2;
  } catch (const vqa::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
