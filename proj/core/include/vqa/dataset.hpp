#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "vqa/counting.hpp"
#include "vqa/rng.hpp"
#include "vqa/tensor.hpp"

namespace vqa {

enum class ShapeKind { kSquare, kCircle, kTriangle };
enum class Color { kRed, kGreen, kBlue };
enum class Category { kNumber, kCount, kOther };

inline constexpr std::size_t kMaxObjects = 8;
inline constexpr double kMinObjectSize = 0.08;
inline constexpr double kMaxObjectSize = 0.2;
// Minimum gap between the boxes of two objects.
inline constexpr double kObjectGap = 0.02;
inline constexpr int kPlacementAttempts = 1000;

// Flat answer set: counts 0..10, yes, no, red, green, blue.
inline constexpr std::size_t kMaxAnswerCount = 10;
inline constexpr std::size_t kAnswerYes = 11;
inline constexpr std::size_t kAnswerNo = 12;
inline constexpr std::size_t kAnswerRed = 13;
inline constexpr std::size_t kNumAnswers = 16;

std::string_view to_string(ShapeKind shape);
std::string_view to_string(Color color);
std::string_view to_string(Category category);
ShapeKind parse_shape(std::string_view text);
Color parse_color(std::string_view text);
Category parse_category(std::string_view text);

std::string answer_name(std::size_t answer_class);
std::size_t color_answer(Color color);

struct SceneObject {
  ShapeKind shape = ShapeKind::kSquare;
  Color color = Color::kRed;
  double cx = 0.5, cy = 0.5;  // center, normalized
  double size = 0.1;          // side / diameter / triangle height and base

  Box box() const { return {cx - size / 2, cy - size / 2, cx + size / 2, cy + size / 2}; }
  friend bool operator==(const SceneObject&, const SceneObject&) = default;
};

struct SceneSpec {
  std::vector<SceneObject> objects;
  std::uint64_t seed = 0;

  std::vector<Box> boxes() const;
  friend bool operator==(const SceneSpec&, const SceneSpec&) = default;
};

// Throws GenerationError if a scene breaks the size, bounds, count or spacing rules.
void validate_scene(const SceneSpec& scene);

/// Places the requested (shape, color) objects at random sizes and positions
/// so that every box lies inside the image and boxes are at least kObjectGap
/// apart. Throws GenerationError after kPlacementAttempts failed layouts.
SceneSpec place_objects(Rng& rng, const std::vector<std::pair<ShapeKind, Color>>& kinds);

// Random shapes and colors.
SceneSpec gen_scene(Rng& rng, std::size_t object_count);

/// White background, filled primaries. A pixel is painted when its center
/// lies in the shape; later objects paint over earlier ones.
template <typename T>
Tensor<T> render_scene(const SceneSpec& scene);

struct Sample {
  std::uint64_t id = 0;
  std::uint64_t pair_id = 0;
  int member = 0;  // 0 = A, 1 = B
  Category category = Category::kCount;
  std::vector<std::string> question;
  std::size_t answer = 0;
  SceneSpec scene;

  friend bool operator==(const Sample&, const Sample&) = default;
};

/// Two samples sharing a question and pair id but with different answers.
/// Sample ids are 2 * pair_id + member.
std::pair<Sample, Sample> gen_question_pair(Rng& rng, Category category, std::uint64_t pair_id);

struct Dataset {
  std::vector<Sample> train;
  std::vector<Sample> val;
};

// Pair ids interleave categories; validation pairs follow the training ones.
// Each pair draws from its own stream derived from (seed, pair_id).
Dataset generate_dataset(std::uint64_t seed, std::size_t train_pairs_per_category,
                         std::size_t val_pairs_per_category);

// Tab-separated, one sample per line:
// id pair_id member category question answer objects seed
void write_dataset(std::ostream& out, const std::vector<Sample>& samples);
void write_dataset(const std::filesystem::path& path, const std::vector<Sample>& samples);
std::vector<Sample> read_dataset(std::istream& in);
std::vector<Sample> read_dataset(const std::filesystem::path& path);

}  // namespace vqa
