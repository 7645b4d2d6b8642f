#include "vqa/metrics.hpp"

#include <algorithm>
#include <cstdio>
#include <map>
#include <sstream>

#include "vqa/errors.hpp"

namespace vqa {

std::array<double, 7> MetricReport::columns() const {
  return {number_single.value(), number_pair.value(), count_single.value(), count_pair.value(),
          other_single.value(),  all_single.value(),  all_pair.value()};
}

void validate_pairs(std::span<const Sample> samples) {
  struct Seen {
    const Sample* member[2] = {nullptr, nullptr};
  };
  std::map<std::uint64_t, Seen> pairs;
  for (const auto& s : samples) {
    if (s.member != 0 && s.member != 1) throw ValidationError("sample " + std::to_string(s.id) + " has bad member");
    auto& slot = pairs[s.pair_id].member[s.member];
    if (slot) {
      throw ValidationError("pair " + std::to_string(s.pair_id) + " has two " + (s.member ? "B" : "A") + " members");
    }
    slot = &s;
  }
  for (const auto& [id, seen] : pairs) {
    if (!seen.member[0] || !seen.member[1]) {
      throw ValidationError("pair " + std::to_string(id) + " is missing member " + (seen.member[0] ? "B" : "A"));
    }
    if (seen.member[0]->category != seen.member[1]->category) {
      throw ValidationError("pair " + std::to_string(id) + " mixes categories");
    }
  }
}

MetricReport compute_metrics(std::span<const Sample> samples, std::span<const std::size_t> predictions) {
  if (samples.size() != predictions.size()) {
    throw DimensionError("compute_metrics: " + std::to_string(predictions.size()) + " predictions for " +
                         std::to_string(samples.size()) + " samples");
  }
  validate_pairs(samples);
  MetricReport r;
  auto cells = [&r](Category c) -> std::pair<Accuracy&, Accuracy&> {
    switch (c) {
      case Category::kNumber: return {r.number_single, r.number_pair};
      case Category::kCount: return {r.count_single, r.count_pair};
      case Category::kOther: break;
    }
    return {r.other_single, r.other_pair};
  };
  std::map<std::uint64_t, int> pair_correct;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const bool ok = predictions[i] == samples[i].answer;
    auto [single, pair] = cells(samples[i].category);
    single.total++;
    r.all_single.total++;
    if (ok) {
      single.correct++;
      r.all_single.correct++;
    }
    int& both = pair_correct[samples[i].pair_id];
    both += ok ? 1 : 0;
  }
  for (const auto& s : samples) {
    if (s.member != 0) continue;
    auto [single, pair] = cells(s.category);
    const bool ok = pair_correct[s.pair_id] == 2;
    pair.total++;
    r.all_pair.total++;
    if (ok) {
      pair.correct++;
      r.all_pair.correct++;
    }
  }
  return r;
}

std::string format_percent(double fraction) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", 100.0 * fraction);
  return buf;
}

std::string format_table(const ReportRows& rows) {
  std::size_t name_width = 3;
  for (const auto& [name, report] : rows) name_width = std::max(name_width, name.size());
  std::ostringstream os;
  auto pad = [&os](std::string_view text, std::size_t width, bool left) {
    if (left) os << text;
    for (std::size_t i = text.size(); i < width; ++i) os << ' ';
    if (!left) os << text;
  };
  pad("run", name_width, true);
  for (auto col : MetricReport::kColumns) {
    os << "  ";
    pad(col, 9, false);
  }
  os << '\n';
  for (const auto& [name, report] : rows) {
    pad(name, name_width, true);
    for (double v : report.columns()) {
      os << "  ";
      pad(format_percent(v), 9, false);
    }
    os << '\n';
  }
  return os.str();
}

std::string format_csv(const ReportRows& rows) {
  std::ostringstream os;
  os << "run";
  for (auto col : MetricReport::kColumns) os << ',' << col;
  os << '\n';
  for (const auto& [name, report] : rows) {
    os << name;
    for (double v : report.columns()) os << ',' << format_percent(v);
    os << '\n';
  }
  return os.str();
}

}  // namespace vqa
