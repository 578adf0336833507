#include "aligngan/gradcheck.hpp"

#include <algorithm>
#include <cmath>

#include "aligngan/error.hpp"

namespace aligngan {

namespace {

double eval_at(const ScalarFn& f, const Tensor& x, std::size_t index) {
  Graph g;
  Var out;
  try {
    out = f(g, g.constant(x));
  } catch (const NumericError& e) {
    throw NumericError("grad_check: perturbing element " + std::to_string(index) + ": " + e.what());
  }
  if (out.value().size() != 1) throw ShapeError("grad_check: function is not scalar-valued");
  const double v = out.value()[0];
  if (!std::isfinite(v))
    throw NumericError("grad_check: non-finite value when perturbing element " +
                       std::to_string(index));
  return v;
}

// Sign pattern of every kinked op's input, in graph order.
std::vector<bool> kink_signs(const ScalarFn& f, const Tensor& x) {
  Graph g;
  f(g, g.constant(x));
  std::vector<bool> signs;
  for (NodeId id = 0; id < g.size(); ++id) {
    const OpKind k = g.kind(id);
    if (k != OpKind::leaky_relu && k != OpKind::clamp_min) continue;
    for (double v : g.value(g.inputs(id)[0]).values()) signs.push_back(v > 0);
  }
  return signs;
}

}  // namespace

bool kink_free(const ScalarFn& f, const Tensor& x, std::size_t index, double eps) {
  Tensor probe = x;
  const auto base = kink_signs(f, probe);
  probe[index] = x[index] + eps;
  if (kink_signs(f, probe) != base) return false;
  probe[index] = x[index] - eps;
  return kink_signs(f, probe) == base;
}

GradCheckResult grad_check(const ScalarFn& f, const Tensor& x, double eps,
                           std::span<const std::size_t> indices) {
  if (!(eps > 0)) throw NumericError("grad_check: eps must be positive");
  Tensor analytic;
  {
    Graph g;
    const Var xv = g.leaf(x, "x");
    const Var out = f(g, xv);
    if (out.value().size() != 1) throw ShapeError("grad_check: function is not scalar-valued");
    if (!out.value().all_finite()) throw NumericError("grad_check: non-finite function value");
    analytic = backward(g, out).get_or_zero(xv);
  }
  std::vector<std::size_t> all;
  if (indices.empty()) {
    all.resize(x.size());
    for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
    indices = all;
  }
  GradCheckResult r;
  Tensor probe = x;
  for (std::size_t i : indices) {
    if (i >= x.size()) throw ShapeError("grad_check: index " + std::to_string(i) + " out of range");
    const double a = analytic[i];
    if (!std::isfinite(a))
      throw NumericError("grad_check: non-finite autodiff gradient at element " + std::to_string(i));
    probe[i] = x[i] + eps;
    const double up = eval_at(f, probe, i);
    probe[i] = x[i] - eps;
    const double down = eval_at(f, probe, i);
    probe[i] = x[i];
    const double n = (up - down) / (2 * eps);
    const double err = std::abs(a - n) / std::max(1.0, std::abs(n));
    if (r.checked == 0 || err > r.max_rel_error) {
      r.max_rel_error = err;
      r.worst_index = i;
      r.autodiff = a;
      r.numeric = n;
    }
    ++r.checked;
  }
  return r;
}

bool GradSuiteReport::passed() const { return failures() == 0 && !cases.empty(); }

std::size_t GradSuiteReport::failures() const {
  return static_cast<std::size_t>(
      std::count_if(cases.begin(), cases.end(), [](const auto& c) { return !c.passed; }));
}

GradSuiteReport run_grad_suite(std::span<const GradCase> cases, double eps, double tolerance) {
  GradSuiteReport report;
  for (const auto& c : cases) {
    GradCaseOutcome o;
    o.name = c.name;
    try {
      o.result = grad_check(c.f, c.x, eps, c.indices);
      o.passed = o.result.max_rel_error <= tolerance;
    } catch (const Error& e) {
      o.error = e.what();
    }
    report.cases.push_back(std::move(o));
  }
  return report;
}

}  // namespace aligngan
