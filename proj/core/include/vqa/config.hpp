#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <string_view>

namespace vqa {

enum class Ablation { kNone, kNoCount, kNoText, kNoAttention, kNoAttnCount };

std::string_view to_string(Ablation ablation);
// Accepts none, no-count, no-text, no-attention, no-attn-count.
Ablation parse_ablation(std::string_view text);

inline bool uses_attention(Ablation a) { return a != Ablation::kNoAttention && a != Ablation::kNoAttnCount; }
inline bool uses_count(Ablation a) { return a != Ablation::kNoCount && a != Ablation::kNoAttnCount; }
inline bool uses_text(Ablation a) { return a != Ablation::kNoText; }

struct ModelConfig {
  std::size_t embedding_dim = 300;
  std::size_t token_size = 3000;
  std::size_t gru_hidden = 128;
  std::size_t glimpses = 2;
  std::size_t projection_width = 256;  // attention space
  std::size_t fused_width = 1024;
  double dropout_rate = 0.0;
  double label_smoothing = 0.0;
  std::size_t max_count = 10;
  std::size_t max_question_length = 12;
  double count_tau = 0.5;
  double count_kappa = 20.0;
  std::uint64_t seed = 1;
  std::size_t epochs = 30;
  std::size_t batch_size = 64;
  double learning_rate = 1e-3;
  // Stop after this many epochs without a better validation all(s); 0 disables.
  std::size_t patience = 0;
  Ablation ablation = Ablation::kNone;

  // Throws ConfigError naming the offending key.
  void validate() const;

  // Flat key=value lines; '#' starts a comment. Unknown keys are rejected.
  static ModelConfig parse(std::istream& in);
  static ModelConfig load(const std::filesystem::path& path);
  void write(std::ostream& out) const;
  void save(const std::filesystem::path& path) const;
  std::string to_text() const;

  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

}  // namespace vqa
