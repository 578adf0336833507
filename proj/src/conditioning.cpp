#include "aligngan/conditioning.hpp"

#include <algorithm>
#include <array>

#include "aligngan/error.hpp"
#include "aligngan/ops.hpp"

namespace aligngan {

const char* condition_kind_name(ConditionKind kind) {
  return kind == ConditionKind::domain ? "domain" : "label";
}

namespace {

void validate_code(ConditionKind kind, std::span<const double> values) {
  if (values.empty()) throw SpecError(std::string(condition_kind_name(kind)) + " vector is empty");
  std::size_t ones = 0;
  for (double v : values) {
    if (v == 1.0)
      ++ones;
    else if (v != 0.0)
      throw SpecError(std::string(condition_kind_name(kind)) +
                      " vector must be one-hot or all-zero, found value " + std::to_string(v));
  }
  if (ones > 1)
    throw SpecError(std::string(condition_kind_name(kind)) + " vector has more than one hot entry");
}

}  // namespace

ConditionVector::ConditionVector(ConditionKind kind, std::vector<double> values)
    : kind_(kind), values_(std::move(values)) {
  validate_code(kind_, values_);
}

ConditionVector ConditionVector::one_hot(ConditionKind kind, std::size_t length,
                                         std::size_t index) {
  if (index >= length)
    throw SpecError(std::string(condition_kind_name(kind)) + " index " + std::to_string(index) +
                    " out of range for length " + std::to_string(length));
  std::vector<double> v(length, 0.0);
  v[index] = 1.0;
  return ConditionVector(kind, std::move(v));
}

ConditionVector ConditionVector::zeros(ConditionKind kind, std::size_t length) {
  return ConditionVector(kind, std::vector<double>(length, 0.0));
}

bool ConditionVector::is_zero() const {
  return std::all_of(values_.begin(), values_.end(), [](double v) { return v == 0.0; });
}

ConditionBatch::ConditionBatch(ConditionKind kind, std::span<const ConditionVector> rows)
    : kind_(kind) {
  if (rows.empty()) throw SpecError("condition batch has no rows");
  const std::size_t k = rows[0].length();
  Tensor m({rows.size(), k});
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].kind() != kind) throw SpecError("condition batch mixes domain and label codes");
    if (rows[i].length() != k) throw SpecError("condition batch rows differ in length");
    std::copy(rows[i].values().begin(), rows[i].values().end(), m.data() + i * k);
  }
  matrix_ = std::move(m);
}

ConditionBatch ConditionBatch::repeat(const ConditionVector& v, std::size_t n) {
  if (n == 0) throw SpecError("condition batch has no rows");
  Tensor m({n, v.length()});
  for (std::size_t i = 0; i < n; ++i) std::copy(v.values().begin(), v.values().end(), m.data() + i * v.length());
  return ConditionBatch(v.kind(), std::move(m));
}

ConditionBatch ConditionBatch::one_hot(ConditionKind kind, std::size_t length,
                                       std::span<const std::size_t> indices) {
  if (indices.empty()) throw SpecError("condition batch has no rows");
  Tensor m({indices.size(), length}, 0.0);
  for (std::size_t i = 0; i < indices.size(); ++i) {
    if (indices[i] >= length)
      throw SpecError(std::string(condition_kind_name(kind)) + " index " +
                      std::to_string(indices[i]) + " out of range for length " +
                      std::to_string(length));
    m[i * length + indices[i]] = 1.0;
  }
  return ConditionBatch(kind, std::move(m));
}

ConditionBatch ConditionBatch::zeros(ConditionKind kind, std::size_t length, std::size_t n) {
  if (n == 0) throw SpecError("condition batch has no rows");
  return ConditionBatch(kind, Tensor({n, length}, 0.0));
}

bool ConditionBatch::all_zero() const {
  return std::all_of(matrix_.values().begin(), matrix_.values().end(),
                     [](double v) { return v == 0.0; });
}

Var condition_inject(Var activation, const ConditionBatch& codes) {
  const Shape& s = activation.shape();
  if (s.empty() || s[0] != codes.rows())
    throw ShapeError("condition_inject: activation " + shape_str(s) + " vs " +
                     std::to_string(codes.rows()) + " condition rows");
  Graph& g = *activation.graph;
  const std::size_t k = codes.width();
  Var extra;
  if (s.size() == 2) {
    extra = g.constant(codes.matrix());
  } else if (s.size() == 4) {
    const std::size_t plane = s[2] * s[3];
    Tensor maps({s[0], k, s[2], s[3]});
    for (std::size_t n = 0; n < s[0]; ++n)
      for (std::size_t j = 0; j < k; ++j)
        std::fill_n(maps.data() + (n * k + j) * plane, plane, codes.matrix()[n * k + j]);
    extra = g.constant(std::move(maps));
  } else {
    throw ShapeError("condition_inject: activation " + shape_str(s) +
                     " is neither flat [N,F] nor a feature map [N,C,H,W]");
  }
  const std::array<Var, 2> parts{activation, extra};
  return ops::concat(parts, 1);
}

}  // namespace aligngan
