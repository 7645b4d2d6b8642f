#pragma once

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <memory>
#include <span>
#include <vector>

#include "vqa/config.hpp"
#include "vqa/dataset.hpp"
#include "vqa/metrics.hpp"
#include "vqa/model.hpp"
#include "vqa/question_encoder.hpp"

namespace vqa {

// Files inside a run directory.
inline constexpr const char* kConfigFile = "config.cfg";
inline constexpr const char* kVocabFile = "vocab.txt";
inline constexpr const char* kCheckpointFile = "model.ckpt";
inline constexpr const char* kLogFile = "train_log.jsonl";

// Raises the glibc mmap/trim thresholds so large activation buffers are
// reused between steps instead of being page-faulted in afresh. Idempotent;
// a no-op on other C libraries.
void tune_allocator();

struct TrainOptions {
  std::filesystem::path out_dir;  // empty: keep everything in memory
  std::ostream* progress = nullptr;
};

struct EpochLog {
  std::size_t epoch = 0;  // 1-based
  double train_loss = 0;  // mean over batches
  MetricReport train;     // from the training-mode predictions of the epoch
  MetricReport val;
  double seconds = 0;
};

struct TrainResult {
  std::vector<double> losses;  // every batch, in order
  std::vector<EpochLog> epochs;
  std::size_t best_epoch = 0;
  Vocabulary vocab;
  std::unique_ptr<VqaModel<float>> model;  // holds the best-epoch weights
};

/// Adam over all parameters with seeded shuffling. After each epoch the
/// validation report is computed; the best all(s) epoch is kept (and written
/// to out_dir). Throws NumericError naming the batch on a non-finite loss.
TrainResult train(const ModelConfig& config, const std::vector<Sample>& train_set, const std::vector<Sample>& val_set,
                  const TrainOptions& options = {});

std::vector<std::size_t> predict_all(VqaModel<float>& model, const Vocabulary& vocab, std::span<const Sample> samples,
                                     std::size_t batch_size = 128);

MetricReport evaluate(VqaModel<float>& model, const Vocabulary& vocab, std::span<const Sample> samples,
                      std::size_t batch_size = 128);

struct LoadedRun {
  ModelConfig config;
  Vocabulary vocab;
  std::unique_ptr<VqaModel<float>> model;
};

// Writes config, vocabulary and checkpoint into dir.
void save_run(const std::filesystem::path& dir, const VqaModel<float>& model, const Vocabulary& vocab);
LoadedRun load_run(const std::filesystem::path& dir);

struct AblationResult {
  Ablation mode;
  MetricReport val;
  TrainResult run;
};

// Trains one model per mode (same seed and data), each in out_dir/<mode>.
std::vector<AblationResult> ablate(const ModelConfig& config, std::span<const Ablation> modes,
                                   const std::vector<Sample>& train_set, const std::vector<Sample>& val_set,
                                   const TrainOptions& options = {});

}  // namespace vqa
