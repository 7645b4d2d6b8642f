#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "vqa/dataset.hpp"

namespace vqa {

struct Accuracy {
  std::size_t correct = 0;
  std::size_t total = 0;

  // 0 when there is nothing to score.
  double value() const { return total ? static_cast<double>(correct) / static_cast<double>(total) : 0.0; }
  friend bool operator==(const Accuracy&, const Accuracy&) = default;
};

/// Single accuracy counts samples; pair accuracy counts pairs whose two
/// members are both answered correctly.
struct MetricReport {
  Accuracy number_single, number_pair;
  Accuracy count_single, count_pair;
  Accuracy other_single, other_pair;
  Accuracy all_single, all_pair;

  static constexpr std::array<std::string_view, 7> kColumns = {"number(s)", "number(p)", "count(s)", "count(p)",
                                                               "Other",     "all(s)",    "all(p)"};
  // Fractions in kColumns order.
  std::array<double, 7> columns() const;

  friend bool operator==(const MetricReport&, const MetricReport&) = default;
};

// Throws ValidationError unless every pair id has exactly one A and one B
// member of the same category, and DimensionError on a length mismatch.
MetricReport compute_metrics(std::span<const Sample> samples, std::span<const std::size_t> predictions);

void validate_pairs(std::span<const Sample> samples);

using ReportRows = std::vector<std::pair<std::string, MetricReport>>;

// Percentages with two decimals; the table and CSV carry identical strings.
std::string format_percent(double fraction);
std::string format_table(const ReportRows& rows);
std::string format_csv(const ReportRows& rows);

}  // namespace vqa
