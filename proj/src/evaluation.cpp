#include "aligngan/evaluation.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>

#include "json.hpp"

#include "aligngan/error.hpp"
#include "aligngan/rng.hpp"
#include "aligngan/training.hpp"

namespace aligngan {

AlignedPairs aligned_pairs(const Network& generator, const Tensor& z, std::size_t domain_a,
                           std::size_t domain_b, const ConditionBatch* label) {
  const std::size_t n = z.dim(0), k = generator.spec().domain_count;
  const auto code = [&](std::size_t d) {
    return ConditionBatch::repeat(ConditionVector::one_hot(ConditionKind::domain, k, d), n);
  };
  return {evaluate(generator, z, code(domain_a), label), evaluate(generator, z, code(domain_b), label)};
}

double negation_consistency(const AlignedPairs& pairs) {
  if (pairs.a.shape() != pairs.b.shape()) throw ShapeError("negation_consistency: unequal pair shapes");
  double total = 0.0;
  for (std::size_t i = 0; i < pairs.a.size(); ++i) total += std::abs(pairs.a[i] + pairs.b[i]);
  return total / static_cast<double>(pairs.a.size());
}

std::optional<double> alignment_correlation(const AlignedPairs& pairs, PairTransform transform) {
  if (pairs.a.shape() != pairs.b.shape()) throw ShapeError("alignment_correlation: unequal pair shapes");
  if (pairs.count() < kMinEvalSamples)
    throw Error("alignment_correlation: needs at least " + std::to_string(kMinEvalSamples) +
                " pairs, got " + std::to_string(pairs.count()));
  (void)transform;  // negation
  const std::size_t n = pairs.a.size();
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    mx += -pairs.a[i];
    my += pairs.b[i];
  }
  mx /= static_cast<double>(n);
  my /= static_cast<double>(n);
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double dx = -pairs.a[i] - mx, dy = pairs.b[i] - my;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  if (sxx == 0.0 || syy == 0.0) return std::nullopt;
  return sxy / std::sqrt(sxx * syy);
}

NearestCentroid NearestCentroid::fit(const Tensor& samples, std::span<const std::size_t> labels,
                                     std::size_t class_count) {
  const std::size_t n = samples.dim(0), f = samples.size() / n;
  if (labels.size() != n) throw Error("nearest centroid: label count does not match samples");
  Tensor c({class_count, f}, 0.0);
  std::vector<std::size_t> counts(class_count, 0);
  for (std::size_t i = 0; i < n; ++i) {
    if (labels[i] >= class_count) throw Error("nearest centroid: label out of range");
    ++counts[labels[i]];
    for (std::size_t j = 0; j < f; ++j) c[labels[i] * f + j] += samples[i * f + j];
  }
  for (std::size_t k = 0; k < class_count; ++k) {
    if (counts[k] == 0) throw Error("nearest centroid: class " + std::to_string(k) + " has no samples");
    for (std::size_t j = 0; j < f; ++j) c[k * f + j] /= static_cast<double>(counts[k]);
  }
  return NearestCentroid(std::move(c));
}

std::size_t NearestCentroid::predict(std::span<const double> sample) const {
  const std::size_t classes = centroids_.dim(0), f = centroids_.dim(1);
  if (sample.size() != f) throw ShapeError("nearest centroid: sample has wrong feature count");
  std::size_t best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < classes; ++k) {
    double d = 0.0;
    for (std::size_t j = 0; j < f; ++j) {
      const double e = sample[j] - centroids_[k * f + j];
      d += e * e;
    }
    if (d < best_d) {
      best_d = d;
      best = k;
    }
  }
  return best;
}

std::vector<std::size_t> NearestCentroid::predict_all(const Tensor& samples) const {
  const std::size_t n = samples.dim(0), f = samples.size() / n;
  std::vector<std::size_t> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = predict(samples.values().subspan(i * f, f));
  return out;
}

double label_propagation_accuracy(const Network& generator, const LabeledImages& eval_target,
                                  std::size_t target_domain, std::size_t per_class_count,
                                  std::uint64_t seed) {
  const NetworkSpec& spec = generator.spec();
  const std::size_t classes = spec.label_count;
  if (classes == 0) throw SpecError("label propagation needs a generator with label sites");
  if (per_class_count == 0) throw ConfigError("per_class_count must be positive");
  const auto clf = NearestCentroid::fit(eval_target.images, eval_target.labels, classes);
  Rng rng(seed);
  const auto domain = ConditionBatch::repeat(
      ConditionVector::one_hot(ConditionKind::domain, spec.domain_count, target_domain),
      per_class_count);
  std::size_t hits = 0;
  for (std::size_t c = 0; c < classes; ++c) {
    const Tensor z = sample_noise(per_class_count, spec.noise_dim, rng);
    const auto label = ConditionBatch::repeat(
        ConditionVector::one_hot(ConditionKind::label, classes, c), per_class_count);
    for (std::size_t p : clf.predict_all(evaluate(generator, z, domain, &label))) hits += p == c;
  }
  return static_cast<double>(hits) / static_cast<double>(classes * per_class_count);
}

EvalReport EvalReport::make(std::string metric, std::optional<double> value, std::size_t samples,
                            std::uint64_t seed, std::string checkpoint) {
  if (samples < kMinEvalSamples)
    throw ConfigError("evaluation needs at least " + std::to_string(kMinEvalSamples) +
                      " samples, got " + std::to_string(samples));
  return {std::move(metric), value, samples, seed, std::move(checkpoint)};
}

std::string eval_report_json(const EvalReport& r) {
  nlohmann::ordered_json j;
  auto& e = j["eval"];
  e["metric"] = r.metric;
  e["value"] = r.value ? nlohmann::ordered_json(*r.value) : nlohmann::ordered_json(nullptr);
  e["samples"] = r.samples;
  e["seed"] = r.seed;
  e["checkpoint"] = r.checkpoint;
  return j.dump();
}

namespace {
constexpr std::array<std::string_view, 3> kMetrics{"negation_consistency", "alignment_correlation",
                                                   "label_propagation_accuracy"};
}

std::span<const std::string_view> metric_names() { return kMetrics; }

bool is_metric_name(std::string_view name) {
  return std::find(kMetrics.begin(), kMetrics.end(), name) != kMetrics.end();
}

}  // namespace aligngan
