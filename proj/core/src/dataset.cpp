#include "vqa/dataset.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include "vqa/errors.hpp"
#include "vqa/image_encoder.hpp"

namespace vqa {

namespace {

constexpr std::array<std::string_view, 3> kShapeNames = {"square", "circle", "triangle"};
constexpr std::array<std::string_view, 3> kColorNames = {"red", "green", "blue"};
constexpr std::array<std::string_view, 3> kCategoryNames = {"number", "count", "other"};

template <typename E, std::size_t N>
E parse_name(std::string_view text, const std::array<std::string_view, N>& names, const char* what) {
  for (std::size_t i = 0; i < N; ++i) {
    if (names[i] == text) return static_cast<E>(i);
  }
  throw std::invalid_argument(std::string("unknown ") + what + " '" + std::string(text) + "'");
}

std::string plural(ShapeKind shape) { return std::string(to_string(shape)) + "s"; }

ShapeKind random_shape(Rng& rng) { return static_cast<ShapeKind>(rng.uniform_int(0, 2)); }
Color random_color(Rng& rng) { return static_cast<Color>(rng.uniform_int(0, 2)); }

std::size_t pick(Rng& rng, std::size_t lo, std::size_t hi) {
  return static_cast<std::size_t>(rng.uniform_int(static_cast<std::int64_t>(lo), static_cast<std::int64_t>(hi)));
}

bool separated(const Box& a, const Box& b) {
  return a.x_max + kObjectGap <= b.x_min || b.x_max + kObjectGap <= a.x_min || a.y_max + kObjectGap <= b.y_min ||
         b.y_max + kObjectGap <= a.y_min;
}

// Appends up to `count` objects whose shape differs from `excluded`.
void add_other_shapes(Rng& rng, std::vector<std::pair<ShapeKind, Color>>& kinds, ShapeKind excluded,
                      std::size_t count) {
  for (std::size_t i = 0; i < count; ++i) {
    ShapeKind s = excluded;
    while (s == excluded) s = random_shape(rng);
    kinds.emplace_back(s, random_color(rng));
  }
}

SceneSpec seeded_scene(Rng& rng, std::vector<std::pair<ShapeKind, Color>> kinds) {
  const std::uint64_t seed = rng.next();
  Rng scene_rng(seed);
  scene_rng.shuffle(std::span(kinds));
  SceneSpec scene = place_objects(scene_rng, kinds);
  scene.seed = seed;
  return scene;
}

}  // namespace

std::string_view to_string(ShapeKind shape) { return kShapeNames.at(static_cast<std::size_t>(shape)); }
std::string_view to_string(Color color) { return kColorNames.at(static_cast<std::size_t>(color)); }
std::string_view to_string(Category category) { return kCategoryNames.at(static_cast<std::size_t>(category)); }
ShapeKind parse_shape(std::string_view text) { return parse_name<ShapeKind>(text, kShapeNames, "shape"); }
Color parse_color(std::string_view text) { return parse_name<Color>(text, kColorNames, "color"); }
Category parse_category(std::string_view text) { return parse_name<Category>(text, kCategoryNames, "category"); }

std::string answer_name(std::size_t answer_class) {
  if (answer_class <= kMaxAnswerCount) return std::to_string(answer_class);
  if (answer_class == kAnswerYes) return "yes";
  if (answer_class == kAnswerNo) return "no";
  if (answer_class < kNumAnswers) return std::string(kColorNames[answer_class - kAnswerRed]);
  throw std::out_of_range("answer class " + std::to_string(answer_class));
}

std::size_t color_answer(Color color) { return kAnswerRed + static_cast<std::size_t>(color); }

std::vector<Box> SceneSpec::boxes() const {
  std::vector<Box> out;
  out.reserve(objects.size());
  for (const auto& o : objects) out.push_back(o.box());
  return out;
}

void validate_scene(const SceneSpec& scene) {
  if (scene.objects.size() > kMaxObjects) {
    throw GenerationError("scene has " + std::to_string(scene.objects.size()) + " objects");
  }
  for (std::size_t i = 0; i < scene.objects.size(); ++i) {
    const auto& o = scene.objects[i];
    const Box b = o.box();
    if (!(o.size >= kMinObjectSize && o.size <= kMaxObjectSize)) {
      throw GenerationError("object " + std::to_string(i) + " size out of range");
    }
    if (b.x_min < 0 || b.y_min < 0 || b.x_max > 1 || b.y_max > 1) {
      throw GenerationError("object " + std::to_string(i) + " leaves the image");
    }
    for (std::size_t j = 0; j < i; ++j) {
      if (!separated(b, scene.objects[j].box())) {
        throw GenerationError("objects " + std::to_string(j) + " and " + std::to_string(i) + " are too close");
      }
    }
  }
}

SceneSpec place_objects(Rng& rng, const std::vector<std::pair<ShapeKind, Color>>& kinds) {
  if (kinds.size() > kMaxObjects) {
    throw GenerationError("at most " + std::to_string(kMaxObjects) + " objects per scene");
  }
  constexpr int kTriesPerObject = 50;
  SceneSpec scene;
  for (int attempt = 0; attempt < kPlacementAttempts; ++attempt) {
    scene.objects.clear();
    bool ok = true;
    for (const auto& [shape, color] : kinds) {
      bool placed = false;
      for (int t = 0; t < kTriesPerObject && !placed; ++t) {
        SceneObject o{shape, color, 0, 0, rng.uniform(kMinObjectSize, kMaxObjectSize)};
        o.cx = rng.uniform(o.size / 2, 1 - o.size / 2);
        o.cy = rng.uniform(o.size / 2, 1 - o.size / 2);
        const Box b = o.box();
        placed = std::all_of(scene.objects.begin(), scene.objects.end(),
                             [&](const SceneObject& other) { return separated(b, other.box()); });
        if (placed) scene.objects.push_back(o);
      }
      if (!placed) {
        ok = false;
        break;
      }
    }
    if (ok) return scene;
  }
  throw GenerationError("could not place " + std::to_string(kinds.size()) + " objects in " +
                        std::to_string(kPlacementAttempts) + " attempts");
}

SceneSpec gen_scene(Rng& rng, std::size_t object_count) {
  if (object_count > kMaxObjects) throw GenerationError("object_count must be at most 8");
  std::vector<std::pair<ShapeKind, Color>> kinds;
  for (std::size_t i = 0; i < object_count; ++i) kinds.emplace_back(random_shape(rng), random_color(rng));
  return place_objects(rng, kinds);
}

template <typename T>
Tensor<T> render_scene(const SceneSpec& scene) {
  constexpr std::size_t n = kImageSize;
  constexpr std::size_t plane = n * n;
  Tensor<T> image({3, n, n}, T(1));
  auto px = image.data();
  for (const auto& o : scene.objects) {
    const double half = o.size / 2;
    const double top = o.cy - half;
    const auto channel = static_cast<std::size_t>(o.color);
    for (std::size_t y = 0; y < n; ++y) {
      const double v = (static_cast<double>(y) + 0.5) / n;
      if (v < o.cy - half || v > o.cy + half) continue;
      for (std::size_t x = 0; x < n; ++x) {
        const double u = (static_cast<double>(x) + 0.5) / n;
        const double du = u - o.cx, dv = v - o.cy;
        bool inside = false;
        switch (o.shape) {
          case ShapeKind::kSquare: inside = std::abs(du) <= half; break;
          case ShapeKind::kCircle: inside = du * du + dv * dv <= half * half; break;
          case ShapeKind::kTriangle: inside = std::abs(du) <= (v - top) / 2; break;  // apex up
        }
        if (!inside) continue;
        for (std::size_t c = 0; c < 3; ++c) px[c * plane + y * n + x] = c == channel ? T(1) : T(0);
      }
    }
  }
  return image;
}

template Tensor<float> render_scene(const SceneSpec&);
template Tensor<double> render_scene(const SceneSpec&);

std::pair<Sample, Sample> gen_question_pair(Rng& rng, Category category, std::uint64_t pair_id) {
  Sample a, b;
  a.pair_id = b.pair_id = pair_id;
  a.id = 2 * pair_id;
  b.id = 2 * pair_id + 1;
  b.member = 1;
  a.category = b.category = category;
  std::array<Sample*, 2> members = {&a, &b};

  switch (category) {
    case Category::kCount: {
      const ShapeKind shape = random_shape(rng);
      const Color color = random_color(rng);
      const std::size_t na = pick(rng, 0, 5);
      std::size_t nb = pick(rng, 0, 4);
      if (nb >= na) ++nb;
      a.question = {"how", "many", std::string(to_string(color)), plural(shape)};
      const std::array<std::size_t, 2> counts = {na, nb};
      for (int m = 0; m < 2; ++m) {
        std::vector<std::pair<ShapeKind, Color>> kinds(counts[m], {shape, color});
        const std::size_t distractors = pick(rng, 0, std::min<std::size_t>(3, kMaxObjects - counts[m]));
        for (std::size_t i = 0; i < distractors; ++i) {
          std::pair<ShapeKind, Color> k{shape, color};
          while (k == std::pair{shape, color}) k = {random_shape(rng), random_color(rng)};
          kinds.push_back(k);
        }
        members[m]->answer = counts[m];
        members[m]->scene = seeded_scene(rng, std::move(kinds));
      }
      break;
    }
    case Category::kNumber: {
      const ShapeKind shape = random_shape(rng);
      const std::size_t k = pick(rng, 1, 4);
      const std::size_t low = pick(rng, k >= 2 ? k - 2 : 0, k);
      const std::size_t high = pick(rng, k + 1, k + 2);
      const bool a_high = rng.bernoulli(0.5);
      a.question = {"are", "there", "more", "than", std::to_string(k), plural(shape)};
      for (int m = 0; m < 2; ++m) {
        const bool is_high = (m == 0) == a_high;
        const std::size_t count = is_high ? high : low;
        std::vector<std::pair<ShapeKind, Color>> kinds;
        for (std::size_t i = 0; i < count; ++i) kinds.emplace_back(shape, random_color(rng));
        add_other_shapes(rng, kinds, shape, pick(rng, 0, std::min<std::size_t>(2, kMaxObjects - count)));
        members[m]->answer = is_high ? kAnswerYes : kAnswerNo;
        members[m]->scene = seeded_scene(rng, std::move(kinds));
      }
      break;
    }
    case Category::kOther: {
      const ShapeKind shape = random_shape(rng);
      const Color ca = random_color(rng);
      Color cb = static_cast<Color>(pick(rng, 0, 1));
      if (cb >= ca) cb = static_cast<Color>(static_cast<int>(cb) + 1);
      a.question = {"what", "color", "is", "the", std::string(to_string(shape))};
      const std::array<Color, 2> colors = {ca, cb};
      for (int m = 0; m < 2; ++m) {
        std::vector<std::pair<ShapeKind, Color>> kinds = {{shape, colors[m]}};
        add_other_shapes(rng, kinds, shape, pick(rng, 0, 3));
        members[m]->answer = color_answer(colors[m]);
        members[m]->scene = seeded_scene(rng, std::move(kinds));
      }
      break;
    }
  }
  b.question = a.question;
  return {std::move(a), std::move(b)};
}

Dataset generate_dataset(std::uint64_t seed, std::size_t train_pairs_per_category,
                         std::size_t val_pairs_per_category) {
  Dataset out;
  const std::size_t total = train_pairs_per_category + val_pairs_per_category;
  for (std::size_t i = 0; i < total; ++i) {
    auto& split = i < train_pairs_per_category ? out.train : out.val;
    for (std::size_t c = 0; c < 3; ++c) {
      const std::uint64_t pair_id = i * 3 + c;
      Rng rng(derive_seed(seed, pair_id));
      auto [a, b] = gen_question_pair(rng, static_cast<Category>(c), pair_id);
      split.push_back(std::move(a));
      split.push_back(std::move(b));
    }
  }
  return out;
}

namespace {

void put_double(std::ostream& out, double v) {
  std::array<char, 32> buf;
  auto res = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  out.write(buf.data(), res.ptr - buf.data());
}

std::vector<std::string_view> split(std::string_view text, char sep) {
  std::vector<std::string_view> parts;
  std::size_t start = 0;
  while (true) {
    const auto pos = text.find(sep, start);
    parts.push_back(text.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
    if (pos == std::string_view::npos) return parts;
    start = pos + 1;
  }
}

template <typename N>
N parse_number(std::string_view text, std::size_t line, const char* field) {
  N value{};
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc() || ptr != text.data() + text.size() || text.empty()) {
    throw ParseError(line, std::string("bad ") + field + " '" + std::string(text) + "'");
  }
  return value;
}

Sample parse_line(std::string_view text, std::size_t line) {
  const auto fields = split(text, '\t');
  if (fields.size() != 8) {
    throw ParseError(line, "expected 8 tab-separated fields, got " + std::to_string(fields.size()));
  }
  Sample s;
  s.id = parse_number<std::uint64_t>(fields[0], line, "id");
  s.pair_id = parse_number<std::uint64_t>(fields[1], line, "pair_id");
  if (fields[2] == "A") {
    s.member = 0;
  } else if (fields[2] == "B") {
    s.member = 1;
  } else {
    throw ParseError(line, "bad member '" + std::string(fields[2]) + "'");
  }
  try {
    s.category = parse_category(fields[3]);
  } catch (const std::invalid_argument& e) {
    throw ParseError(line, e.what());
  }
  if (fields[4].empty()) throw ParseError(line, "empty question");
  for (auto tok : split(fields[4], ' ')) {
    if (tok.empty()) throw ParseError(line, "empty question token");
    s.question.emplace_back(tok);
  }
  s.answer = parse_number<std::size_t>(fields[5], line, "answer");
  if (s.answer >= kNumAnswers) throw ParseError(line, "answer class out of range");
  if (fields[6] != "-") {
    for (auto obj : split(fields[6], ';')) {
      const auto parts = split(obj, ',');
      if (parts.size() != 5) throw ParseError(line, "object needs 5 comma-separated fields");
      SceneObject o;
      try {
        o.shape = parse_shape(parts[0]);
        o.color = parse_color(parts[1]);
      } catch (const std::invalid_argument& e) {
        throw ParseError(line, e.what());
      }
      o.cx = parse_number<double>(parts[2], line, "cx");
      o.cy = parse_number<double>(parts[3], line, "cy");
      o.size = parse_number<double>(parts[4], line, "size");
      s.scene.objects.push_back(o);
    }
  }
  s.scene.seed = parse_number<std::uint64_t>(fields[7], line, "seed");
  return s;
}

}  // namespace

void write_dataset(std::ostream& out, const std::vector<Sample>& samples) {
  for (const auto& s : samples) {
    out << s.id << '\t' << s.pair_id << '\t' << (s.member == 0 ? 'A' : 'B') << '\t' << to_string(s.category) << '\t';
    for (std::size_t i = 0; i < s.question.size(); ++i) out << (i ? " " : "") << s.question[i];
    out << '\t' << s.answer << '\t';
    if (s.scene.objects.empty()) out << '-';
    for (std::size_t i = 0; i < s.scene.objects.size(); ++i) {
      const auto& o = s.scene.objects[i];
      if (i) out << ';';
      out << to_string(o.shape) << ',' << to_string(o.color) << ',';
      put_double(out, o.cx);
      out << ',';
      put_double(out, o.cy);
      out << ',';
      put_double(out, o.size);
    }
    out << '\t' << s.scene.seed << '\n';
  }
}

void write_dataset(const std::filesystem::path& path, const std::vector<Sample>& samples) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  write_dataset(out, samples);
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

std::vector<Sample> read_dataset(std::istream& in) {
  std::vector<Sample> samples;
  std::string text;
  std::size_t line = 0;
  while (std::getline(in, text)) {
    ++line;
    if (!text.empty() && text.back() == '\r') text.pop_back();
    if (text.empty()) continue;
    samples.push_back(parse_line(text, line));
  }
  return samples;
}

std::vector<Sample> read_dataset(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  return read_dataset(in);
}

}  // namespace vqa
