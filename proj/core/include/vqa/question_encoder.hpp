#pragma once

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "vqa/layers.hpp"
#include "vqa/tensor.hpp"

namespace vqa {

inline constexpr std::size_t kPadIndex = 0;
inline constexpr std::size_t kUnknownIndex = 1;
inline constexpr std::string_view kPadToken = "<pad>";
inline constexpr std::string_view kUnknownToken = "<unk>";

/// Lowercases, splits on whitespace and strips punctuation. Digits stay part
/// of their token. Throws UsageError if nothing remains.
std::vector<std::string> tokenize(std::string_view text);

/// Frequency-ranked token index. Index 0 is padding and 1 is unknown.
class Vocabulary {
 public:
  // Keeps the (capacity - 2) most frequent tokens; ties are broken
  // lexicographically.
  static Vocabulary build(const std::vector<std::vector<std::string>>& corpus, std::size_t capacity);

  // From an ordered token list whose first two entries are <pad>, <unk>.
  static Vocabulary from_tokens(std::vector<std::string> tokens);

  std::size_t size() const { return tokens_.size(); }
  std::size_t capacity() const { return capacity_; }
  std::size_t index(std::string_view token) const;
  const std::string& token(std::size_t index) const { return tokens_.at(index); }
  const std::vector<std::string>& tokens() const { return tokens_; }
  std::vector<std::size_t> encode(const std::vector<std::string>& tokens) const;

  // One token per line, line number = index.
  void save(std::ostream& out) const;
  void save(const std::filesystem::path& path) const;
  static Vocabulary load(std::istream& in);
  static Vocabulary load(const std::filesystem::path& path);

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, std::size_t> index_;
  std::size_t capacity_ = 0;
};

// Pads with kPadIndex or truncates from the right to exactly `length` ids.
std::vector<std::size_t> pad_ids(const std::vector<std::size_t>& ids, std::size_t length);

// Number of ids up to and including the last non-pad id, capped at max_length.
std::size_t true_length(const std::vector<std::size_t>& ids, std::size_t max_length);

/// Embedding table plus a bidirectional GRU. The question vector is
/// [forward state after the last real token ; backward state after the
/// first token]; padding positions never update either state.
template <typename T>
struct QuestionEncoder {
  Tensor<T> embedding;  // [vocab x embedding_dim]
  GRUCell<T> forward_cell;
  GRUCell<T> backward_cell;
  std::size_t max_length = 12;

  QuestionEncoder() = default;
  QuestionEncoder(std::size_t vocab_size, std::size_t embedding_dim, std::size_t hidden, std::size_t max_length,
                  Rng& rng);

  std::size_t hidden_size() const { return forward_cell.hidden_size(); }
  std::size_t output_size() const { return 2 * hidden_size(); }

  // One id list per question (trailing pads allowed) -> [N x 2h].
  Tensor<T> encode(const std::vector<std::vector<std::size_t>>& questions) const;

  void collect(NamedTensors<T>& out, const std::string& prefix) const;
};

template <typename T>
struct EncodedQuestion {
  std::vector<std::size_t> token_ids;  // padded/truncated to max_length
  std::size_t true_length = 0;
  Tensor<T> q;  // [2h]
};

template <typename T>
EncodedQuestion<T> encode_question(const std::vector<std::string>& tokens, const Vocabulary& vocab,
                                   const QuestionEncoder<T>& encoder);

}  // namespace vqa
