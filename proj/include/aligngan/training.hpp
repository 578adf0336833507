#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "aligngan/data.hpp"
#include "aligngan/network.hpp"
#include "aligngan/objectives.hpp"
#include "aligngan/rng.hpp"

namespace aligngan {

struct AdamOptions {
  double learning_rate = 0.0005;
  double beta1 = 0.5;
  double beta2 = 0.999;
  double eps = 1e-8;

  friend bool operator==(const AdamOptions&, const AdamOptions&) = default;
};

struct AdamState {
  std::vector<Tensor> m, v;
  std::uint64_t t = 0;

  /// Zero moments shaped like `params`.
  static AdamState zeros_like(std::span<const Parameter> params);
};

/// One bias-corrected Adam update. All gradients are checked first; a
/// non-finite one throws NumericError naming `step` and the parameter and
/// leaves params and state untouched.
void adam_step(std::span<Parameter> params, std::span<const Tensor> grads, AdamState& state,
               const AdamOptions& options, std::uint64_t step = 0);

enum class StepKind { label_step, domain_step };

/// label_step iff step mod tau == 0. tau < 2 throws ConfigError.
StepKind schedule_kind(std::uint64_t step, std::uint64_t tau);
const char* step_kind_name(StepKind kind);

struct TrainConfig {
  ObjectiveKind objective = ObjectiveKind::lsgan;
  AdamOptions adam{};
  bool saturating_generator_loss = false;
  std::size_t batch_size = 64;  // per domain
  std::size_t total_steps = 0;
  std::size_t tau = 4;  // multi-info alternation period
  std::uint64_t seed = 0;
  std::size_t metric_every = 0;      // 0: only after the final step
  std::size_t checkpoint_every = 0;  // 0: only after the final step

  /// Learning rate set from the objective's default.
  static TrainConfig for_objective(ObjectiveKind kind);
  /// Throws ConfigError on a non-positive learning rate, zero batch size, or
  /// (multi-info) tau < 2.
  void validate(bool multi_info) const;

  friend bool operator==(const TrainConfig&, const TrainConfig&) = default;
};

using MetricValues = std::vector<std::pair<std::string, double>>;

struct MetricsRow {
  std::size_t step = 0;  // completed steps
  double d_loss = 0.0;
  double g_loss = 0.0;
  MetricValues metrics;

  std::optional<double> metric(std::string_view name) const;
  friend bool operator==(const MetricsRow&, const MetricsRow&) = default;
};

/// One JSON object per row: {"step":..,"d_loss":..,"g_loss":..,"metrics":{..}}.
std::string metrics_row_json(const MetricsRow& row);
MetricsRow parse_metrics_row(std::string_view line);

enum class UpdateKind { discriminator, generator };

/// Emitted once per network update, after its gradients are computed and
/// before they are applied.
struct TraceEvent {
  std::size_t step = 0;
  UpdateKind update = UpdateKind::discriminator;
  StepKind schedule = StepKind::domain_step;  // always domain_step for plain AlignGAN
  std::size_t discriminator_version = 0;      // D updates applied so far
  std::size_t generator_version = 0;          // G updates applied so far
  double loss = 0.0;
  const Network* network = nullptr;   // the network being updated
  const Network* opponent = nullptr;  // the network held fixed in this graph
  std::span<const Tensor> grads;     // aligned with network->params()
  const ConditionBatch* domain = nullptr;
  const ConditionBatch* label = nullptr;  // null without label sites
};

struct TrainHooks {
  /// Metric values for the current generator; called on the metric cadence.
  std::function<MetricValues(const Network& generator, std::size_t step)> metrics;
  std::function<void(const MetricsRow&)> on_row;
  std::function<void(std::size_t step, const Network& generator, const Network& discriminator)>
      on_checkpoint;
  std::function<void(const TraceEvent&)> trace;
};

struct TrainResult {
  Network generator;
  Network discriminator;
  std::vector<MetricsRow> rows;
};

/// Standard AlignGAN loop over K_d >= 2 unpaired domains. Each step draws
/// batch_size samples per domain with replacement and fresh z ~ U[-1,1],
/// then makes one discriminator update on real vs generated samples (both
/// domain-conditioned) followed by one generator update against the updated
/// discriminator, on the same minibatch.
TrainResult train_aligngan(const TrainConfig& config, const DomainDataset& dataset,
                           const NetworkSpec& gen_spec, const NetworkSpec& disc_spec,
                           const TrainHooks& hooks = {});

/// Two-step alternating loop. `dataset` holds exactly one labeled domain
/// (the source) and unlabeled others. On label steps (step mod tau == 0)
/// the batch comes from the source only, with its labels and zero domain
/// codes; on domain steps every domain contributes a batch with its domain
/// code and zero label codes.
TrainResult train_multi_info(const TrainConfig& config, const DomainDataset& dataset,
                             const NetworkSpec& gen_spec, const NetworkSpec& disc_spec,
                             const TrainHooks& hooks = {});

enum class Direction { minimize, maximize };

/// Index of the row with the best value of `metric`; ties go to the
/// earliest row. Throws Error on an empty log or a row lacking the metric.
std::size_t select_checkpoint(std::span<const MetricsRow> rows, std::string_view metric,
                              Direction direction);

/// Uniform noise in [-1,1].
Tensor sample_noise(std::size_t n, std::size_t noise_dim, Rng& rng);

}  // namespace aligngan
