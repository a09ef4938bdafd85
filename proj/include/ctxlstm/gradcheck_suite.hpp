// SPDX-License-Identifier: Apache-2.0
//
// Finite-difference verification of every differentiable operation, layer
// and end-to-end model at toy sizes.
#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

namespace ctxlstm {

struct GradCase {
  std::string name;
  // Returns the worst relative error over the case's sampled shapes.
  std::function<double()> run;
};

struct GradReport {
  std::string name;
  double max_error = 0.0;
  bool passed = false;
};

inline constexpr double kGradTolerance = 1e-4;

std::vector<GradCase> standard_grad_cases(std::uint64_t seed = 20240601);

std::vector<GradReport> run_grad_cases(const std::vector<GradCase>& cases, double tolerance = kGradTolerance);

bool all_passed(const std::vector<GradReport>& reports);

}  // namespace ctxlstm
