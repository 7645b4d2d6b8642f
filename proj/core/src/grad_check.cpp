#include "vqa/grad_check.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "vqa/rng.hpp"

namespace vqa {

std::vector<std::string> GradCheckReport::failed_tensors() const {
  std::vector<std::string> names;
  for (const auto& e : entries) {
    if (!e.ok && std::find(names.begin(), names.end(), e.tensor) == names.end()) names.push_back(e.tensor);
  }
  return names;
}

double relative_error(double analytic, double numeric, double floor) {
  const double scale = std::max({std::abs(analytic), std::abs(numeric), floor});
  return std::abs(analytic - numeric) / scale;
}

GradCheckReport grad_check(const std::function<Tensor<double>()>& f, const NamedTensors<double>& params,
                           const GradCheckOptions& options) {
  for (const auto& [name, t] : params) {
    auto p = t;
    p.zero_grad();
  }
  backward(f());

  GradCheckReport report;
  Rng rng(options.seed);
  NoGradGuard no_grad;
  for (const auto& [name, t] : params) {
    auto p = t;
    std::vector<std::size_t> coords(p.numel());
    std::iota(coords.begin(), coords.end(), std::size_t{0});
    if (coords.size() > options.max_coords) {
      rng.shuffle(std::span<std::size_t>(coords));
      coords.resize(options.max_coords);
      std::sort(coords.begin(), coords.end());
    }
    for (std::size_t i : coords) {
      const double original = p[i];
      GradCheckEntry e;
      e.tensor = name;
      e.index = i;
      e.analytic = p.grad()[i];
      double step = options.step;
      for (int attempt = 0; attempt <= options.refinements; ++attempt, step /= 10) {
        p[i] = original + step;
        const double plus = f().item();
        p[i] = original - step;
        const double minus = f().item();
        p[i] = original;
        e.step = step;
        e.numeric = (plus - minus) / (2.0 * step);
        e.rel_error = relative_error(e.analytic, e.numeric, options.floor);
        e.ok = e.rel_error <= options.tolerance;
        if (e.ok) break;
      }
      report.max_rel_error = std::max(report.max_rel_error, e.rel_error);
      report.passed = report.passed && e.ok;
      report.entries.push_back(std::move(e));
    }
  }
  return report;
}

}  // namespace vqa
