#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "vqa/tensor.hpp"

namespace vqa {

struct GradCheckOptions {
  double step = 1e-5;
  double tolerance = 1e-4;
  // Tensors larger than this are checked on a seeded random subset.
  std::size_t max_coords = 64;
  std::uint64_t seed = 0;
  // Denominator floor for the relative error, so that gradients which are
  // both ~0 compare by absolute difference instead of amplifying noise.
  double floor = 1e-8;
  // A coordinate that fails is measured again with step/10, up to this many
  // times. Meant for piecewise-linear functions, where the interval
  // [x-h, x+h] can straddle a kink; a wrong gradient fails at every step.
  int refinements = 0;
};

struct GradCheckEntry {
  std::string tensor;
  std::size_t index = 0;
  double analytic = 0.0;
  double numeric = 0.0;
  double rel_error = 0.0;
  double step = 0.0;  // finite-difference step of the reported measurement
  bool ok = true;
};

struct GradCheckReport {
  std::vector<GradCheckEntry> entries;
  double max_rel_error = 0.0;
  bool passed = true;

  std::vector<std::string> failed_tensors() const;
};

double relative_error(double analytic, double numeric, double floor);

/// Compares backward() gradients of a scalar computation against central
/// differences (f(x+h) - f(x-h)) / 2h. Runs in 64-bit only.
///
/// `f` must rebuild the graph from the current parameter values on each call.
GradCheckReport grad_check(const std::function<Tensor<double>()>& f, const NamedTensors<double>& params,
                           const GradCheckOptions& options = {});

}  // namespace vqa
