#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

namespace sbre {

struct OpCheck {
  std::string name;
  std::size_t cases = 0;
  std::size_t coords = 0;
  double max_rel_error = 0.0;
  std::string worst;  // case and coordinate of the largest error
};

struct GradSuiteOptions {
  std::size_t cases_per_op = 20;
  std::size_t model_cases = 5;
  double tolerance = 1e-4;
  std::uint64_t seed = 7;
};

struct GradSuiteReport {
  std::vector<OpCheck> checks;
  double tolerance = 1e-4;
  double seconds = 0.0;

  bool passed() const;
};

/// Central-difference checks of every differentiable op on random shapes and
/// of the whole model at a miniature configuration (d_w=4, F=3, widths {2,3},
/// H=5, K=3).
GradSuiteReport run_grad_suite(const GradSuiteOptions& options = {});

std::string format_grad_suite(const GradSuiteReport& report);

}  // namespace sbre
