#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "aligngan/autodiff.hpp"

namespace aligngan {

/// Scalar function of one tensor, expressed on a graph so it can be both
/// differentiated and evaluated.
using ScalarFn = std::function<Var(Graph& graph, Var x)>;

struct GradCheckResult {
  double max_rel_error = 0.0;  // max |autodiff - numeric| / max(1, |numeric|)
  std::size_t worst_index = 0;
  double autodiff = 0.0;  // at worst_index
  double numeric = 0.0;
  std::size_t checked = 0;
};

/// Compares autodiff against central differences with step `eps`. When
/// `indices` is non-empty only those elements of x are perturbed. Throws
/// NumericError naming the element if any evaluation is non-finite.
GradCheckResult grad_check(const ScalarFn& f, const Tensor& x, double eps = 1e-3,
                           std::span<const std::size_t> indices = {});

/// True when perturbing element `index` by +-eps leaves the sign of every
/// leaky_relu / clamp_min input in f's graph unchanged, i.e. the central
/// difference does not straddle a kink.
bool kink_free(const ScalarFn& f, const Tensor& x, std::size_t index, double eps = 1e-3);

struct GradCase {
  std::string name;
  ScalarFn f;
  Tensor x;
  std::vector<std::size_t> indices;  // empty: every element
};

struct GradCaseOutcome {
  std::string name;
  GradCheckResult result;
  bool passed = false;
  std::string error;  // set when the check itself threw
};

struct GradSuiteReport {
  std::vector<GradCaseOutcome> cases;
  bool passed() const;
  std::size_t failures() const;
};

GradSuiteReport run_grad_suite(std::span<const GradCase> cases, double eps = 1e-3,
                               double tolerance = 1e-4);

/// Random cases covering every op of the catalogue (inputs in [-1,1], kinks
/// avoided) plus both default networks on sampled parameter coordinates.
std::vector<GradCase> standard_grad_cases(std::uint64_t seed);

}  // namespace aligngan
