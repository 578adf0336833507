#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "aligngan/autodiff.hpp"

namespace aligngan {

enum class ConditionKind { domain, label };

const char* condition_kind_name(ConditionKind kind);

/// One-hot code (or the all-zero mask) identifying a domain or a class.
/// Values are exactly 0.0/1.0 with at most one 1.0; fractional codes are
/// rejected at construction.
class ConditionVector {
 public:
  static ConditionVector one_hot(ConditionKind kind, std::size_t length, std::size_t index);
  static ConditionVector zeros(ConditionKind kind, std::size_t length);
  /// Validates `values`; throws SpecError unless one-hot or all-zero.
  ConditionVector(ConditionKind kind, std::vector<double> values);

  ConditionKind kind() const { return kind_; }
  std::size_t length() const { return values_.size(); }
  std::span<const double> values() const { return values_; }
  bool is_zero() const;

 private:
  ConditionKind kind_;
  std::vector<double> values_;
};

/// Per-sample condition codes for a batch, stored as an [N,K] matrix.
class ConditionBatch {
 public:
  ConditionBatch(ConditionKind kind, std::span<const ConditionVector> rows);
  static ConditionBatch repeat(const ConditionVector& v, std::size_t n);
  /// Row i is one-hot at `indices[i]`.
  static ConditionBatch one_hot(ConditionKind kind, std::size_t length,
                                std::span<const std::size_t> indices);
  static ConditionBatch zeros(ConditionKind kind, std::size_t length, std::size_t n);

  ConditionKind kind() const { return kind_; }
  std::size_t rows() const { return matrix_.dim(0); }
  std::size_t width() const { return matrix_.dim(1); }
  const Tensor& matrix() const { return matrix_; }
  bool all_zero() const;

 private:
  ConditionBatch(ConditionKind kind, Tensor matrix) : kind_(kind), matrix_(std::move(matrix)) {}
  ConditionKind kind_;
  Tensor matrix_;
};

/// Appends the condition codes to an activation. A flat [N,F] activation
/// becomes [N,F+K]; a feature map [N,C,H,W] gains K constant channels, channel
/// C+j filled with code j of that sample. The appended values are graph
/// constants, so an all-zero code contributes exactly 0 to the next layer and
/// the weights it meets receive exactly-zero gradient.
Var condition_inject(Var activation, const ConditionBatch& codes);

}  // namespace aligngan
