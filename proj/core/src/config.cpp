#include "vqa/config.hpp"

#include <array>
#include <charconv>
#include <fstream>
#include <functional>
#include <sstream>
#include <utility>
#include <vector>

#include "vqa/errors.hpp"

namespace vqa {

namespace {

constexpr std::array<std::string_view, 5> kAblationNames = {"none", "no-count", "no-text", "no-attention",
                                                            "no-attn-count"};

std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

template <typename N>
N parse_value(std::string_view key, std::string_view text) {
  N value{};
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (text.empty() || ec != std::errc() || ptr != text.data() + text.size()) {
    throw ConfigError("config key '" + std::string(key) + "': cannot parse '" + std::string(text) + "'");
  }
  return value;
}

std::string format_double(double v) {
  std::array<char, 32> buf;
  auto res = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  return std::string(buf.data(), res.ptr);
}

// One entry per key: parse into the config, and print from it.
struct Field {
  std::string_view key;
  std::function<void(ModelConfig&, std::string_view)> set;
  std::function<std::string(const ModelConfig&)> get;
};

template <typename N>
Field numeric(std::string_view key, N ModelConfig::*member) {
  return {key, [key, member](ModelConfig& c, std::string_view v) { c.*member = parse_value<N>(key, v); },
          [member](const ModelConfig& c) {
            if constexpr (std::is_floating_point_v<N>) {
              return format_double(c.*member);
            } else {
              return std::to_string(c.*member);
            }
          }};
}

const std::vector<Field>& fields() {
  static const std::vector<Field> table = {
      numeric("embedding_dim", &ModelConfig::embedding_dim),
      numeric("token_size", &ModelConfig::token_size),
      numeric("gru_hidden", &ModelConfig::gru_hidden),
      numeric("glimpses", &ModelConfig::glimpses),
      numeric("projection_width", &ModelConfig::projection_width),
      numeric("fused_width", &ModelConfig::fused_width),
      numeric("dropout_rate", &ModelConfig::dropout_rate),
      numeric("label_smoothing", &ModelConfig::label_smoothing),
      numeric("max_count", &ModelConfig::max_count),
      numeric("max_question_length", &ModelConfig::max_question_length),
      numeric("count_tau", &ModelConfig::count_tau),
      numeric("count_kappa", &ModelConfig::count_kappa),
      numeric("seed", &ModelConfig::seed),
      numeric("epochs", &ModelConfig::epochs),
      numeric("batch_size", &ModelConfig::batch_size),
      numeric("learning_rate", &ModelConfig::learning_rate),
      numeric("patience", &ModelConfig::patience),
      {"ablation", [](ModelConfig& c, std::string_view v) { c.ablation = parse_ablation(v); },
       [](const ModelConfig& c) { return std::string(to_string(c.ablation)); }},
  };
  return table;
}

}  // namespace

std::string_view to_string(Ablation ablation) { return kAblationNames.at(static_cast<std::size_t>(ablation)); }

Ablation parse_ablation(std::string_view text) {
  for (std::size_t i = 0; i < kAblationNames.size(); ++i) {
    if (kAblationNames[i] == text) return static_cast<Ablation>(i);
  }
  throw ConfigError("unknown ablation mode '" + std::string(text) +
                    "' (expected none, no-count, no-text, no-attention or no-attn-count)");
}

void ModelConfig::validate() const {
  auto positive = [](std::size_t v, const char* key) {
    if (v == 0) throw ConfigError(std::string(key) + " must be positive");
  };
  positive(embedding_dim, "embedding_dim");
  positive(gru_hidden, "gru_hidden");
  positive(projection_width, "projection_width");
  positive(fused_width, "fused_width");
  positive(max_count, "max_count");
  positive(max_question_length, "max_question_length");
  positive(epochs, "epochs");
  if (token_size < 3) throw ConfigError("token_size must be at least 3");
  if (glimpses != 2) throw ConfigError("glimpses is fixed at 2");
  if (batch_size < 2) throw ConfigError("batch_size must be at least 2 (batch normalization)");
  if (!(dropout_rate >= 0 && dropout_rate < 1)) throw ConfigError("dropout_rate must be in [0, 1)");
  if (!(label_smoothing >= 0 && label_smoothing < 1)) throw ConfigError("label_smoothing must be in [0, 1)");
  if (!(learning_rate > 0)) throw ConfigError("learning_rate must be positive");
  if (!(count_kappa > 0)) throw ConfigError("count_kappa must be positive");
  if (!(count_tau > 0 && count_tau < 1)) throw ConfigError("count_tau must be in (0, 1)");
}

ModelConfig ModelConfig::parse(std::istream& in) {
  ModelConfig config;
  std::string raw;
  std::size_t line = 0;
  while (std::getline(in, raw)) {
    ++line;
    std::string_view text = raw;
    if (auto hash = text.find('#'); hash != std::string_view::npos) text = text.substr(0, hash);
    text = trim(text);
    if (text.empty()) continue;
    const auto eq = text.find('=');
    if (eq == std::string_view::npos) {
      throw ConfigError("config line " + std::to_string(line) + ": expected key=value");
    }
    const auto key = trim(text.substr(0, eq));
    const auto value = trim(text.substr(eq + 1));
    bool known = false;
    for (const auto& f : fields()) {
      if (f.key == key) {
        f.set(config, value);
        known = true;
        break;
      }
    }
    if (!known) throw ConfigError("config line " + std::to_string(line) + ": unknown key '" + std::string(key) + "'");
  }
  config.validate();
  return config;
}

ModelConfig ModelConfig::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config " + path.string());
  return parse(in);
}

void ModelConfig::write(std::ostream& out) const {
  for (const auto& f : fields()) out << f.key << '=' << f.get(*this) << '\n';
}

void ModelConfig::save(const std::filesystem::path& path) const {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write config " + path.string());
  write(out);
}

std::string ModelConfig::to_text() const {
  std::ostringstream os;
  write(os);
  return os.str();
}

}  // namespace vqa
