#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

#include "vqa/config.hpp"
#include "vqa/grad_check.hpp"

namespace vqa {

inline constexpr double kSmoothTolerance = 1e-6;
inline constexpr double kKinkedTolerance = 1e-4;

struct SuiteCheck {
  std::string name;
  bool smooth = false;  // no relu/max/min on the path: tighter tolerance
  GradCheckReport report;
  double seconds = 0;
};

struct SuiteResult {
  std::vector<SuiteCheck> checks;
  double seconds = 0;
  bool passed() const;
};

/// Finite-difference checks of every layer and of the end-to-end loss of a
/// freshly initialized model (dimensions from `config`, batch of 4) at
/// 64-bit. Progress lines go to `log` when given.
SuiteResult run_gradcheck_suite(const ModelConfig& config, std::ostream* log = nullptr);

}  // namespace vqa
