#pragma once

#include <filesystem>
#include <string>

#include "aligngan/rng.hpp"
#include "aligngan/tensor.hpp"

namespace testing {

inline aligngan::Tensor random_tensor(aligngan::Shape shape, aligngan::Rng& rng, double lo = -1.0,
                                      double hi = 1.0) {
  aligngan::Tensor t(std::move(shape));
  for (auto& v : t.values()) v = rng.uniform(lo, hi);
  return t;
}

// Fresh empty directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("aligngan_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace testing

#include "aligngan/autodiff.hpp"
#include "aligngan/gradcheck.hpp"
#include "aligngan/ops.hpp"

namespace testing {

// y = 2x whose backward rule wrongly reports dy/dx = 3.
inline aligngan::Var broken_double(aligngan::Var x) {
  using namespace aligngan;
  Tensor y = x.value();
  for (auto& v : y.values()) v *= 2.0;
  return x.graph->record(
      OpKind::custom, {x.id}, std::move(y),
      [](const Graph&, NodeId, const Tensor& gy, std::span<Tensor* const> in) {
        if (!in[0]) return;
        for (std::size_t i = 0; i < gy.size(); ++i) (*in[0])[i] += 3.0 * gy[i];
      });
}

inline aligngan::GradCase broken_case() {
  using namespace aligngan;
  return {"broken_double",
          [](Graph&, Var x) { return ops::sum(ops::square(broken_double(x))); },
          Tensor::from({0.25, -0.5, 0.75}),
          {}};
}

}  // namespace testing
