#include "vqa/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <numeric>
#include <ostream>

#include <json.hpp>

#if defined(__GLIBC__)
#include <malloc.h>
#endif

#include "vqa/checkpoint.hpp"
#include "vqa/errors.hpp"
#include "vqa/ops.hpp"
#include "vqa/optimizer.hpp"

namespace vqa {

namespace {

nlohmann::json accuracy_json(const Accuracy& a) {
  return {{"accuracy", a.value()}, {"correct", a.correct}, {"total", a.total}};
}

nlohmann::json report_json(const MetricReport& r) {
  return {{"number_s", accuracy_json(r.number_single)}, {"number_p", accuracy_json(r.number_pair)},
          {"count_s", accuracy_json(r.count_single)},   {"count_p", accuracy_json(r.count_pair)},
          {"other_s", accuracy_json(r.other_single)},   {"other_p", accuracy_json(r.other_pair)},
          {"all_s", accuracy_json(r.all_single)},       {"all_p", accuracy_json(r.all_pair)}};
}

// Consecutive index ranges; a trailing batch of one joins its predecessor
// because batch normalization needs two rows.
std::vector<std::pair<std::size_t, std::size_t>> batch_ranges(std::size_t n, std::size_t batch_size) {
  std::vector<std::pair<std::size_t, std::size_t>> out;
  for (std::size_t begin = 0; begin < n; begin += batch_size) out.emplace_back(begin, std::min(n, begin + batch_size));
  if (out.size() > 1 && out.back().second - out.back().first == 1) {
    out[out.size() - 2].second = n;
    out.pop_back();
  }
  return out;
}

std::vector<std::size_t> argmax_rows(const Tensor<float>& logits) {
  const std::size_t n = logits.dim(0), k = logits.dim(1);
  std::vector<std::size_t> out(n);
  auto z = logits.data();
  for (std::size_t i = 0; i < n; ++i) {
    auto row = z.subspan(i * k, k);
    out[i] = static_cast<std::size_t>(std::max_element(row.begin(), row.end()) - row.begin());
  }
  return out;
}

std::vector<std::vector<float>> snapshot(const NamedTensors<float>& state) {
  std::vector<std::vector<float>> out;
  for (const auto& [name, t] : state) out.emplace_back(t.data().begin(), t.data().end());
  return out;
}

void restore(const NamedTensors<float>& state, const std::vector<std::vector<float>>& values) {
  for (std::size_t i = 0; i < state.size(); ++i) {
    std::copy(values[i].begin(), values[i].end(), state[i].second.node().data.begin());
  }
}

}  // namespace

void tune_allocator() {
#if defined(__GLIBC__)
  static const bool done = [] {
    mallopt(M_MMAP_THRESHOLD, 1 << 30);
    mallopt(M_TRIM_THRESHOLD, 1 << 30);
    mallopt(M_TOP_PAD, 64 << 20);
    return true;
  }();
  (void)done;
#endif
}

TrainResult train(const ModelConfig& config, const std::vector<Sample>& train_set, const std::vector<Sample>& val_set,
                  const TrainOptions& options) {
  config.validate();
  if (train_set.empty()) throw UsageError("train: training set is empty");
  if (train_set.size() < 2) throw UsageError("train: need at least two training samples");
  tune_allocator();

  TrainResult result;
  std::vector<std::vector<std::string>> corpus;
  corpus.reserve(train_set.size());
  for (const auto& s : train_set) corpus.push_back(s.question);
  result.vocab = Vocabulary::build(corpus, config.token_size);
  result.model = std::make_unique<VqaModel<float>>(config, result.vocab.size());
  auto& model = *result.model;

  std::vector<Tensor<float>> params;
  for (const auto& [name, t] : model.parameters()) params.push_back(t);
  OptimizerState<float> optimizer(params, AdamOptions{config.learning_rate});

  std::ofstream log;
  if (!options.out_dir.empty()) {
    std::filesystem::create_directories(options.out_dir);
    config.save(options.out_dir / kConfigFile);
    result.vocab.save(options.out_dir / kVocabFile);
    log.open(options.out_dir / kLogFile, std::ios::app);
    if (!log) throw std::runtime_error("cannot open training log in " + options.out_dir.string());
  }

  const auto state = model.state();
  std::vector<std::vector<float>> best_state;
  double best_score = -1;
  std::size_t since_best = 0;
  Rng dropout_rng(derive_seed(config.seed, 1));
  std::vector<std::size_t> order(train_set.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  const auto ranges = batch_ranges(train_set.size(), config.batch_size);
  std::vector<Sample> batch_samples;

  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    const auto start = std::chrono::steady_clock::now();
    Rng shuffle_rng(derive_seed(config.seed, 1000 + epoch));
    shuffle_rng.shuffle(std::span(order));
    std::vector<std::size_t> train_predictions(train_set.size());
    double loss_sum = 0;

    for (std::size_t b = 0; b < ranges.size(); ++b) {
      batch_samples.clear();
      for (std::size_t i = ranges[b].first; i < ranges[b].second; ++i) batch_samples.push_back(train_set[order[i]]);
      auto batch = make_batch<float>(batch_samples, result.vocab, config.max_question_length);
      for (auto& p : optimizer.params) p.zero_grad();
      auto out = model.forward(batch, Mode::kTrain, dropout_rng);
      auto loss = cross_entropy_loss(out.logits, std::span<const std::size_t>(batch.targets), config.label_smoothing);
      const double value = loss.item();
      if (!std::isfinite(value)) {
        throw NumericError("non-finite loss in epoch " + std::to_string(epoch) + ", batch " + std::to_string(b + 1) +
                           " (first sample id " + std::to_string(batch_samples.front().id) + ")");
      }
      backward(loss);
      adam_step(optimizer);
      result.losses.push_back(value);
      loss_sum += value;
      const auto predicted = argmax_rows(out.logits);
      for (std::size_t i = 0; i < predicted.size(); ++i) train_predictions[order[ranges[b].first + i]] = predicted[i];
    }

    EpochLog entry;
    entry.epoch = epoch;
    entry.train_loss = loss_sum / static_cast<double>(ranges.size());
    entry.train = compute_metrics(train_set, train_predictions);
    if (!val_set.empty()) entry.val = evaluate(model, result.vocab, val_set);
    entry.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    result.epochs.push_back(entry);

    if (log.is_open()) {
      log << nlohmann::json{{"epoch", epoch},
                            {"split", "train"},
                            {"loss", entry.train_loss},
                            {"report", report_json(entry.train)}}
                 .dump()
          << '\n';
      if (!val_set.empty()) {
        log << nlohmann::json{{"epoch", epoch}, {"split", "val"}, {"report", report_json(entry.val)}}.dump() << '\n';
      }
      log.flush();
    }
    if (options.progress) {
      *options.progress << "epoch " << epoch << "  loss " << entry.train_loss << "  train all(s) "
                        << format_percent(entry.train.all_single.value()) << "  val all(s) "
                        << format_percent(entry.val.all_single.value()) << " [number "
                        << format_percent(entry.val.number_single.value()) << ", count "
                        << format_percent(entry.val.count_single.value()) << ", other "
                        << format_percent(entry.val.other_single.value()) << "]  (" << entry.seconds << " s)"
                        << std::endl;
    }

    // Without a validation split the latest epoch counts as best.
    const double score = val_set.empty() ? static_cast<double>(epoch) : entry.val.all_single.value();
    if (score > best_score) {
      best_score = score;
      result.best_epoch = epoch;
      best_state = snapshot(state);
      since_best = 0;
      if (!options.out_dir.empty()) save_checkpoint(options.out_dir / kCheckpointFile, state);
    } else if (config.patience > 0 && ++since_best >= config.patience) {
      break;
    }
  }
  restore(state, best_state);
  return result;
}

std::vector<std::size_t> predict_all(VqaModel<float>& model, const Vocabulary& vocab, std::span<const Sample> samples,
                                     std::size_t batch_size) {
  tune_allocator();
  std::vector<std::size_t> out;
  out.reserve(samples.size());
  for (std::size_t begin = 0; begin < samples.size(); begin += batch_size) {
    const auto part = samples.subspan(begin, std::min(batch_size, samples.size() - begin));
    const auto batch = make_batch<float>(part, vocab, model.config().max_question_length);
    const auto predicted = model.predict(batch);
    out.insert(out.end(), predicted.begin(), predicted.end());
  }
  return out;
}

MetricReport evaluate(VqaModel<float>& model, const Vocabulary& vocab, std::span<const Sample> samples,
                      std::size_t batch_size) {
  validate_pairs(samples);
  return compute_metrics(samples, predict_all(model, vocab, samples, batch_size));
}

void save_run(const std::filesystem::path& dir, const VqaModel<float>& model, const Vocabulary& vocab) {
  std::filesystem::create_directories(dir);
  model.config().save(dir / kConfigFile);
  vocab.save(dir / kVocabFile);
  save_checkpoint(dir / kCheckpointFile, model.state());
}

LoadedRun load_run(const std::filesystem::path& dir) {
  LoadedRun run;
  run.config = ModelConfig::load(dir / kConfigFile);
  run.vocab = Vocabulary::load(dir / kVocabFile);
  run.model = std::make_unique<VqaModel<float>>(run.config, run.vocab.size());
  assign_state(run.model->state(), load_checkpoint(dir / kCheckpointFile));
  return run;
}

std::vector<AblationResult> ablate(const ModelConfig& config, std::span<const Ablation> modes,
                                   const std::vector<Sample>& train_set, const std::vector<Sample>& val_set,
                                   const TrainOptions& options) {
  std::vector<AblationResult> out;
  for (Ablation mode : modes) {
    ModelConfig c = config;
    c.ablation = mode;
    TrainOptions o = options;
    if (!options.out_dir.empty()) o.out_dir = options.out_dir / std::string(to_string(mode));
    if (options.progress) *options.progress << "== " << to_string(mode) << std::endl;
    AblationResult r{mode, {}, train(c, train_set, val_set, o)};
    r.val = evaluate(*r.run.model, r.run.vocab, val_set);
    out.push_back(std::move(r));
  }
  return out;
}

}  // namespace vqa
