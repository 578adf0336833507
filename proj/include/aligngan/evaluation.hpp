#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "aligngan/data.hpp"
#include "aligngan/network.hpp"

namespace aligngan {

/// Generations from shared noise: row i of `a` is G(z_i | domain a), row i of
/// `b` is G(z_i | domain b).
struct AlignedPairs {
  Tensor a;
  Tensor b;
  std::size_t count() const { return a.dim(0); }
};

/// `label`, when given, is applied to both sides.
AlignedPairs aligned_pairs(const Network& generator, const Tensor& z, std::size_t domain_a,
                           std::size_t domain_b, const ConditionBatch* label = nullptr);

/// Mean over pairs and elements of |a + b|; 0 for exact negatives.
double negation_consistency(const AlignedPairs& pairs);

inline constexpr std::size_t kMinEvalSamples = 100;

/// Pearson r between flattened transform(a) and b. Needs at least 100
/// pairs (Error otherwise); nullopt when either side has zero variance.
std::optional<double> alignment_correlation(const AlignedPairs& pairs, PairTransform transform);

/// Mean image per class; assigns the class of the nearest mean (Euclidean,
/// lowest class index on ties).
class NearestCentroid {
 public:
  /// Throws Error if any class in [0, class_count) has no sample.
  static NearestCentroid fit(const Tensor& samples, std::span<const std::size_t> labels,
                             std::size_t class_count);
  std::size_t predict(std::span<const double> sample) const;
  std::vector<std::size_t> predict_all(const Tensor& samples) const;
  const Tensor& centroids() const { return centroids_; }

 private:
  explicit NearestCentroid(Tensor centroids) : centroids_(std::move(centroids)) {}
  Tensor centroids_;  // [classes, features]
};

/// For each class c, generates per_class_count samples G(z | target domain,
/// label c) with z drawn from `seed`, classifies them with a nearest-centroid
/// model fit on `eval_target` (real, labeled target data held out of
/// training), and returns the fraction assigned to c.
double label_propagation_accuracy(const Network& generator, const LabeledImages& eval_target,
                                  std::size_t target_domain, std::size_t per_class_count,
                                  std::uint64_t seed);

struct EvalReport {
  std::string metric;
  std::optional<double> value;  // nullopt: undefined (zero variance)
  std::size_t samples = 0;
  std::uint64_t seed = 0;
  std::string checkpoint;

  /// Throws ConfigError when samples < 100.
  static EvalReport make(std::string metric, std::optional<double> value, std::size_t samples,
                         std::uint64_t seed, std::string checkpoint);
};

/// {"eval":{"metric":..,"value":..|null,"samples":..,"seed":..,"checkpoint":..}}
std::string eval_report_json(const EvalReport& report);

/// Names accepted by evaluate_metric / the eval command.
std::span<const std::string_view> metric_names();
bool is_metric_name(std::string_view name);

}  // namespace aligngan
