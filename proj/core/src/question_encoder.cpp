#include "vqa/question_encoder.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <map>

#include "vqa/errors.hpp"
#include "vqa/ops.hpp"

namespace vqa {

std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> tokens;
  std::string current;
  auto flush = [&] {
    if (!current.empty()) tokens.push_back(std::move(current));
    current.clear();
  };
  for (char ch : text) {
    const auto c = static_cast<unsigned char>(ch);
    if (std::isspace(c)) {
      flush();
    } else if (std::isalnum(c)) {
      current.push_back(static_cast<char>(std::tolower(c)));
    }
  }
  flush();
  if (tokens.empty()) throw UsageError("tokenize: question has no tokens");
  return tokens;
}

Vocabulary Vocabulary::build(const std::vector<std::vector<std::string>>& corpus, std::size_t capacity) {
  if (capacity < 3) throw ConfigError("vocabulary capacity must be at least 3, got " + std::to_string(capacity));
  if (corpus.empty()) throw UsageError("vocabulary: empty corpus");
  std::map<std::string, std::size_t> counts;
  for (const auto& question : corpus) {
    for (const auto& tok : question) {
      if (tok != kPadToken && tok != kUnknownToken) ++counts[tok];
    }
  }
  std::vector<std::pair<std::string, std::size_t>> ranked(counts.begin(), counts.end());
  // counts is ordered by token, so a stable sort on frequency keeps the
  // lexicographic tie-break.
  std::stable_sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) { return a.second > b.second; });
  std::vector<std::string> tokens{std::string(kPadToken), std::string(kUnknownToken)};
  for (const auto& [tok, n] : ranked) {
    if (tokens.size() >= capacity) break;
    tokens.push_back(tok);
  }
  Vocabulary v = from_tokens(std::move(tokens));
  v.capacity_ = capacity;
  return v;
}

Vocabulary Vocabulary::from_tokens(std::vector<std::string> tokens) {
  if (tokens.size() < 2 || tokens[0] != kPadToken || tokens[1] != kUnknownToken) {
    throw ConfigError("vocabulary must start with <pad>, <unk>");
  }
  Vocabulary v;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (!v.index_.emplace(tokens[i], i).second) throw ConfigError("vocabulary: duplicate token '" + tokens[i] + "'");
  }
  v.tokens_ = std::move(tokens);
  v.capacity_ = v.tokens_.size();
  return v;
}

std::size_t Vocabulary::index(std::string_view token) const {
  auto it = index_.find(std::string(token));
  return it == index_.end() ? kUnknownIndex : it->second;
}

std::vector<std::size_t> Vocabulary::encode(const std::vector<std::string>& tokens) const {
  std::vector<std::size_t> ids;
  ids.reserve(tokens.size());
  for (const auto& t : tokens) ids.push_back(index(t));
  return ids;
}

void Vocabulary::save(std::ostream& out) const {
  for (const auto& t : tokens_) out << t << '\n';
}

void Vocabulary::save(const std::filesystem::path& path) const {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write vocabulary " + path.string());
  save(out);
}

Vocabulary Vocabulary::load(std::istream& in) {
  std::vector<std::string> tokens;
  std::string line;
  while (std::getline(in, line)) tokens.push_back(line);
  return from_tokens(std::move(tokens));
}

Vocabulary Vocabulary::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read vocabulary " + path.string());
  return load(in);
}

std::vector<std::size_t> pad_ids(const std::vector<std::size_t>& ids, std::size_t length) {
  std::vector<std::size_t> out(length, kPadIndex);
  std::copy_n(ids.begin(), std::min(length, ids.size()), out.begin());
  return out;
}

std::size_t true_length(const std::vector<std::size_t>& ids, std::size_t max_length) {
  std::size_t n = std::min(ids.size(), max_length);
  while (n > 0 && ids[n - 1] == kPadIndex) --n;
  return n;
}

template <typename T>
QuestionEncoder<T>::QuestionEncoder(std::size_t vocab_size, std::size_t embedding_dim, std::size_t hidden,
                                    std::size_t max_len, Rng& rng)
    // An embedding row is a linear map of a one-hot input, so fan-in is 1.
    : embedding(scaled_uniform<T>({vocab_size, embedding_dim}, 1, rng)),
      forward_cell(embedding_dim, hidden, rng),
      backward_cell(embedding_dim, hidden, rng),
      max_length(max_len) {}

template <typename T>
Tensor<T> QuestionEncoder<T>::encode(const std::vector<std::vector<std::size_t>>& questions) const {
  if (questions.empty()) throw UsageError("encode: no questions");
  const std::size_t n = questions.size();
  std::vector<std::size_t> lengths(n);
  std::size_t steps = 0;
  for (std::size_t i = 0; i < n; ++i) {
    lengths[i] = true_length(questions[i], max_length);
    if (lengths[i] == 0) throw UsageError("encode: question " + std::to_string(i) + " has no tokens");
    steps = std::max(steps, lengths[i]);
  }
  // Time-major rows so each step is a contiguous slice.
  std::vector<std::size_t> ids(steps * n, kPadIndex);
  for (std::size_t t = 0; t < steps; ++t) {
    for (std::size_t i = 0; i < n; ++i) {
      if (t < lengths[i]) ids[t * n + i] = questions[i][t];
    }
  }
  const auto embedded = vqa::embedding(embedding, std::span<const std::size_t>(ids));
  const auto fwd_in = forward_cell.project_inputs(embedded);
  const auto bwd_in = backward_cell.project_inputs(embedded);

  const std::size_t h = hidden_size();
  auto rows = [n](const Tensor<T>& x, std::size_t t) { return slice(x, 0, t * n, (t + 1) * n); };
  // keep[t] is 1 where step t is a real token, else 0; blending with it
  // leaves the state bit-identical across padded steps.
  auto masks = [&](std::size_t t) {
    Tensor<T> keep({n, 1}), skip({n, 1});
    for (std::size_t i = 0; i < n; ++i) {
      keep[i] = t < lengths[i] ? T(1) : T(0);
      skip[i] = T(1) - keep[i];
    }
    return std::pair{keep, skip};
  };
  auto blend = [](const Tensor<T>& fresh, const Tensor<T>& old, const std::pair<Tensor<T>, Tensor<T>>& m) {
    return add(mul(fresh, m.first), mul(old, m.second));
  };

  Tensor<T> h_fwd = Tensor<T>::zeros({n, h});
  for (std::size_t t = 0; t < steps; ++t) {
    auto next = forward_cell.step_projected(rows(fwd_in.z, t), rows(fwd_in.r, t), rows(fwd_in.h, t), h_fwd);
    h_fwd = blend(next, h_fwd, masks(t));
  }
  Tensor<T> h_bwd = Tensor<T>::zeros({n, h});
  for (std::size_t t = steps; t-- > 0;) {
    auto next = backward_cell.step_projected(rows(bwd_in.z, t), rows(bwd_in.r, t), rows(bwd_in.h, t), h_bwd);
    h_bwd = blend(next, h_bwd, masks(t));
  }
  const Tensor<T> both[] = {h_fwd, h_bwd};
  return concat(std::span<const Tensor<T>>(both), 1);
}

template <typename T>
void QuestionEncoder<T>::collect(NamedTensors<T>& out, const std::string& prefix) const {
  out.emplace_back(prefix + ".embedding", embedding);
  forward_cell.collect(out, prefix + ".forward");
  backward_cell.collect(out, prefix + ".backward");
}

template <typename T>
EncodedQuestion<T> encode_question(const std::vector<std::string>& tokens, const Vocabulary& vocab,
                                   const QuestionEncoder<T>& encoder) {
  if (tokens.empty()) throw UsageError("encode_question: empty token list");
  if (encoder.embedding.dim(0) != vocab.size()) {
    throw DimensionError("encode_question: embedding has " + std::to_string(encoder.embedding.dim(0)) +
                         " rows but vocabulary has " + std::to_string(vocab.size()));
  }
  EncodedQuestion<T> out;
  const auto ids = vocab.encode(tokens);
  out.token_ids = pad_ids(ids, encoder.max_length);
  out.true_length = true_length(out.token_ids, encoder.max_length);
  auto q = encoder.encode({out.token_ids});
  out.q = reshape(q, {q.numel()});
  return out;
}

template struct QuestionEncoder<float>;
template struct QuestionEncoder<double>;
template EncodedQuestion<float> encode_question(const std::vector<std::string>&, const Vocabulary&,
                                                const QuestionEncoder<float>&);
template EncodedQuestion<double> encode_question(const std::vector<std::string>&, const Vocabulary&,
                                                 const QuestionEncoder<double>&);

}  // namespace vqa
