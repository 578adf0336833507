#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <string_view>
#include <vector>

#include "aligngan/checkpoint.hpp"
#include "aligngan/data.hpp"
#include "aligngan/evaluation.hpp"
#include "aligngan/training.hpp"

namespace aligngan {

enum class Task { negation_2d, glyph_negative, glyph_edge, idx_pair, multi_info_glyph };

const char* task_name(Task task);
Task parse_task(std::string_view name);

/// Everything needed to reproduce a run. Text form is key=value lines; keys
/// left out take task-dependent defaults, resolved at parse time, so
/// serialize_config always writes every key.
struct ExperimentConfig {
  Task task = Task::glyph_negative;
  TrainConfig train;
  std::size_t noise_dim = 64;
  double leaky_slope = 0.2;
  std::vector<LayerSpec> generator_layers;      // empty: task default
  std::vector<LayerSpec> discriminator_layers;  // empty: task default
  std::size_t dataset_size = 2000;              // samples per domain
  std::size_t class_count = 10;
  double jitter = 0.0;
  std::size_t max_shift = 1;
  double edge_threshold = 0.5;
  std::string idx_a, idx_b;  // idx_pair sources
  std::size_t eval_samples = 1000;
  std::uint64_t eval_seed = 1;
  std::size_t eval_holdout = 600;  // labeled target samples for the classifier
  std::string output_dir = "run";

  friend bool operator==(const ExperimentConfig&, const ExperimentConfig&) = default;
};

/// Throws ConfigError naming the first unknown key or bad value.
ExperimentConfig parse_config(std::string_view text);
std::string serialize_config(const ExperimentConfig& config);

bool multi_info(Task task);
/// Generator and discriminator specs after applying layer overrides. Throws
/// SpecError if they break a placement rule.
NetworkSpec generator_spec(const ExperimentConfig& config);
NetworkSpec discriminator_spec(const ExperimentConfig& config);
/// Training domains for the task (source first).
DomainDataset make_dataset(const ExperimentConfig& config);
/// Held-out real labeled target-domain images for label propagation.
LabeledImages make_eval_target(const ExperimentConfig& config);

/// Metrics reported during training and the one used for selection.
MetricValues compute_metrics(const ExperimentConfig& config, const Network& generator,
                             const LabeledImages* eval_target);
std::string_view selection_metric(Task task);
Direction selection_direction(Task task);

Checkpoint make_checkpoint(const ExperimentConfig& config, std::size_t step,
                           const Network& generator, const Network& discriminator);
/// Config stored in a checkpoint's metadata.
ExperimentConfig checkpoint_config(const Checkpoint& ckpt);

struct ExperimentResult {
  TrainResult train;
  MetricValues initial_metrics;  // before step 0
  std::size_t selected_row = 0;  // index into train.rows, or 0 when empty
};

/// Builds data and networks, trains, and reports metrics on the configured
/// cadence. When `write_outputs` is set, writes config.txt, metrics.jsonl and
/// checkpoints/ under output_dir plus best.agck (selected) and final.agck.
ExperimentResult run_experiment(const ExperimentConfig& config, bool write_outputs,
                                const std::function<void(const MetricsRow&)>& on_row = {});

std::string checkpoint_name(std::size_t step);

/// Binary graymap ("P5\n{W} {H}\n255\n" + bytes). Pixel p in [-1,1] maps to
/// round((p+1)*127.5).
struct Graymap {
  std::size_t width = 0, height = 0;
  std::vector<std::uint8_t> pixels;
};
std::string encode_p5(const Graymap& image);
std::uint8_t pixel_byte(double p);

/// rows x cols cells; each cell is G(z|A) beside G(z|B) for one z drawn from
/// `seed`. Multi-info generators use label (cell index mod class count).
Graymap sample_grid(const Network& generator, std::size_t rows, std::size_t cols,
                    std::uint64_t seed);

}  // namespace aligngan
