#include "aligngan/experiment.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "aligngan/error.hpp"
#include "aligngan/rng.hpp"
#include "aligngan/text.hpp"

namespace aligngan {

namespace {

constexpr std::array<std::pair<Task, std::string_view>, 5> kTasks{{
    {Task::negation_2d, "negation_2d"},
    {Task::glyph_negative, "glyph_negative"},
    {Task::glyph_edge, "glyph_edge"},
    {Task::idx_pair, "idx_pair"},
    {Task::multi_info_glyph, "multi_info_glyph"},
}};

LayerSpec dense(std::size_t width, Activation act, bool domain = false) {
  LayerSpec l;
  l.kind = LayerKind::dense;
  l.width = width;
  l.activation = act;
  l.inject_domain = domain;
  return l;
}

ExperimentConfig defaults_for(Task task, std::optional<ObjectiveKind> objective) {
  ExperimentConfig c;
  c.task = task;
  const ObjectiveKind kind =
      objective.value_or(task == Task::negation_2d ? ObjectiveKind::lsgan : ObjectiveKind::regular_gan);
  c.train = TrainConfig::for_objective(kind);
  if (task == Task::negation_2d) c.noise_dim = 8;
  if (task == Task::multi_info_glyph) c.class_count = 3;
  return c;
}

// Seeds for the two domains and the held-out set, all derived from the run seed.
struct DataSeeds {
  std::uint64_t a, b, holdout;
};

DataSeeds data_seeds(const ExperimentConfig& c) {
  Rng r(c.train.seed ^ 0x9e3779b97f4a7c15ull);
  const std::uint64_t a = r.next(), b = r.next(), h = r.next();
  return {a, b, h};
}

LabeledImages glyphs(const ExperimentConfig& c, std::size_t n, std::uint64_t seed) {
  GlyphOptions o;
  o.n = n;
  o.class_count = c.class_count;
  o.jitter = c.jitter;
  o.max_shift = c.max_shift;
  o.seed = seed;
  return glyph_dataset(o);
}

Tensor load_idx_images(const std::string& path) {
  if (path.empty()) throw ConfigError("idx_pair needs idx_a and idx_b paths");
  Tensor t = parse_idx(read_file(path));
  if (t.rank() == 3) return t.reshaped({t.dim(0), 1, t.dim(1), t.dim(2)});
  return t;
}

}  // namespace

const char* task_name(Task task) {
  for (const auto& [t, name] : kTasks)
    if (t == task) return name.data();
  return "?";
}

Task parse_task(std::string_view name) {
  for (const auto& [t, n] : kTasks)
    if (n == name) return t;
  throw ConfigError("unknown task '" + std::string(name) + "'");
}

bool multi_info(Task task) { return task == Task::multi_info_glyph; }

ExperimentConfig parse_config(std::string_view body) {
  const auto entries = text::parse_key_values(body);
  std::optional<Task> task;
  std::optional<ObjectiveKind> objective;
  for (const auto& [k, v] : entries) {
    if (k == "task") task = parse_task(v);
    if (k == "objective") objective = parse_objective(v);
  }
  if (!task) throw ConfigError("config is missing the 'task' key");
  ExperimentConfig c = defaults_for(*task, objective);
  TrainConfig& t = c.train;
  for (const auto& [k, v] : entries) {
    if (k == "task" || k == "objective") continue;
    else if (k == "learning_rate") t.adam.learning_rate = text::parse_double(v, k);
    else if (k == "beta1") t.adam.beta1 = text::parse_double(v, k);
    else if (k == "beta2") t.adam.beta2 = text::parse_double(v, k);
    else if (k == "adam_eps") t.adam.eps = text::parse_double(v, k);
    else if (k == "saturating_generator_loss") t.saturating_generator_loss = text::parse_bool(v, k);
    else if (k == "batch_size") t.batch_size = text::parse_size(v, k);
    else if (k == "total_steps") t.total_steps = text::parse_size(v, k);
    else if (k == "tau") t.tau = text::parse_size(v, k);
    else if (k == "seed") t.seed = text::parse_u64(v, k);
    else if (k == "metric_every") t.metric_every = text::parse_size(v, k);
    else if (k == "noise_dim") c.noise_dim = text::parse_size(v, k);
    else if (k == "leaky_slope") c.leaky_slope = text::parse_double(v, k);
    else if (k == "generator_layers") c.generator_layers = parse_layers(v);
    else if (k == "discriminator_layers") c.discriminator_layers = parse_layers(v);
    else if (k == "dataset_size") c.dataset_size = text::parse_size(v, k);
    else if (k == "class_count") c.class_count = text::parse_size(v, k);
    else if (k == "jitter") c.jitter = text::parse_double(v, k);
    else if (k == "max_shift") c.max_shift = text::parse_size(v, k);
    else if (k == "edge_threshold") c.edge_threshold = text::parse_double(v, k);
    else if (k == "idx_a") c.idx_a = v;
    else if (k == "idx_b") c.idx_b = v;
    else if (k == "eval_samples") c.eval_samples = text::parse_size(v, k);
    else if (k == "eval_seed") c.eval_seed = text::parse_u64(v, k);
    else if (k == "eval_holdout") c.eval_holdout = text::parse_size(v, k);
    else if (k == "output_dir") c.output_dir = v;
    else throw ConfigError("unknown config key '" + k + "'");
  }
  t.checkpoint_every = t.metric_every;
  t.validate(multi_info(c.task));
  if (c.noise_dim == 0) throw ConfigError("noise_dim must be positive");
  if (c.dataset_size == 0) throw ConfigError("dataset_size must be positive");
  if (c.eval_samples < kMinEvalSamples)
    throw ConfigError("eval_samples must be at least " + std::to_string(kMinEvalSamples));
  if (c.class_count < 1 || c.class_count > 10) throw ConfigError("class_count must be in 1..10");
  return c;
}

std::string serialize_config(const ExperimentConfig& c) {
  const TrainConfig& t = c.train;
  std::ostringstream os;
  os << "task=" << task_name(c.task) << '\n'
     << "objective=" << objective_name(t.objective) << '\n'
     << "learning_rate=" << text::format_double(t.adam.learning_rate) << '\n'
     << "beta1=" << text::format_double(t.adam.beta1) << '\n'
     << "beta2=" << text::format_double(t.adam.beta2) << '\n'
     << "adam_eps=" << text::format_double(t.adam.eps) << '\n'
     << "saturating_generator_loss=" << (t.saturating_generator_loss ? "true" : "false") << '\n'
     << "batch_size=" << t.batch_size << '\n'
     << "total_steps=" << t.total_steps << '\n'
     << "tau=" << t.tau << '\n'
     << "seed=" << t.seed << '\n'
     << "metric_every=" << t.metric_every << '\n'
     << "noise_dim=" << c.noise_dim << '\n'
     << "leaky_slope=" << text::format_double(c.leaky_slope) << '\n'
     << "generator_layers=" << format_layers(c.generator_layers) << '\n'
     << "discriminator_layers=" << format_layers(c.discriminator_layers) << '\n'
     << "dataset_size=" << c.dataset_size << '\n'
     << "class_count=" << c.class_count << '\n'
     << "jitter=" << text::format_double(c.jitter) << '\n'
     << "max_shift=" << c.max_shift << '\n'
     << "edge_threshold=" << text::format_double(c.edge_threshold) << '\n'
     << "idx_a=" << c.idx_a << '\n'
     << "idx_b=" << c.idx_b << '\n'
     << "eval_samples=" << c.eval_samples << '\n'
     << "eval_seed=" << c.eval_seed << '\n'
     << "eval_holdout=" << c.eval_holdout << '\n'
     << "output_dir=" << c.output_dir << '\n';
  return os.str();
}

NetworkSpec generator_spec(const ExperimentConfig& c) {
  NetworkSpec s;
  if (c.task == Task::negation_2d) {
    s.role = NetworkRole::generator;
    s.noise_dim = c.noise_dim;
    s.sample_shape = {2};
    s.layers = {dense(32, Activation::leaky_relu), dense(32, Activation::leaky_relu, true),
                dense(2, Activation::tanh, true)};
  } else if (multi_info(c.task)) {
    s = multi_info_generator_spec(c.noise_dim, 2, c.class_count);
  } else {
    s = default_generator_spec(c.noise_dim, 2);
  }
  if (c.task == Task::idx_pair) {
    const Tensor a = load_idx_images(c.idx_a);
    s.sample_shape = Shape(a.shape().begin() + 1, a.shape().end());
  }
  if (!c.generator_layers.empty()) s.layers = c.generator_layers;
  s.leaky_slope = c.leaky_slope;
  plan_network(s);
  return s;
}

NetworkSpec discriminator_spec(const ExperimentConfig& c) {
  NetworkSpec s;
  if (c.task == Task::negation_2d) {
    s.role = NetworkRole::discriminator;
    s.sample_shape = {2};
    s.layers = {dense(32, Activation::leaky_relu, true), dense(32, Activation::leaky_relu),
                dense(1, Activation::none)};
  } else if (multi_info(c.task)) {
    s = multi_info_discriminator_spec(2, c.class_count);
  } else {
    s = default_discriminator_spec(2);
  }
  if (c.task == Task::idx_pair) {
    const Tensor a = load_idx_images(c.idx_a);
    s.sample_shape = Shape(a.shape().begin() + 1, a.shape().end());
  }
  if (!c.discriminator_layers.empty()) s.layers = c.discriminator_layers;
  s.leaky_slope = c.leaky_slope;
  plan_network(s);
  return s;
}

DomainDataset make_dataset(const ExperimentConfig& c) {
  const DataSeeds seeds = data_seeds(c);
  DomainDataset ds;
  switch (c.task) {
    case Task::negation_2d:
      return gaussian_pair_domains(c.dataset_size, PairTransform::negation, seeds.a);
    case Task::glyph_negative:
      ds.domains.push_back({"glyph", glyphs(c, c.dataset_size, seeds.a).images, {}, 0});
      ds.domains.push_back({"negative", make_negative(glyphs(c, c.dataset_size, seeds.b).images), {}, 0});
      ds.provenance = "built-in glyph font, negated second domain";
      break;
    case Task::glyph_edge:
      ds.domains.push_back({"glyph", glyphs(c, c.dataset_size, seeds.a).images, {}, 0});
      ds.domains.push_back(
          {"edge", make_edge(glyphs(c, c.dataset_size, seeds.b).images, c.edge_threshold), {}, 0});
      ds.provenance = "built-in glyph font, edge-map second domain";
      break;
    case Task::idx_pair:
      ds.domains.push_back({"idx_a", load_idx_images(c.idx_a), {}, 0});
      ds.domains.push_back({"idx_b", load_idx_images(c.idx_b), {}, 0});
      ds.provenance = "IDX files " + c.idx_a + " and " + c.idx_b;
      break;
    case Task::multi_info_glyph: {
      LabeledImages src = glyphs(c, c.dataset_size, seeds.a);
      ds.domains.push_back({"glyph", std::move(src.images), std::move(src.labels), c.class_count});
      ds.domains.push_back({"negative", make_negative(glyphs(c, c.dataset_size, seeds.b).images), {}, 0});
      ds.provenance = "built-in glyph font; labeled source, unlabeled negated target";
      break;
    }
  }
  ds.validate();
  return ds;
}

LabeledImages make_eval_target(const ExperimentConfig& c) {
  if (!multi_info(c.task)) throw ConfigError("held-out target labels exist only for multi-info tasks");
  LabeledImages held = glyphs(c, c.eval_holdout, data_seeds(c).holdout);
  held.images = make_negative(held.images);
  return held;
}

MetricValues compute_metrics(const ExperimentConfig& c, const Network& generator,
                             const LabeledImages* eval_target) {
  if (multi_info(c.task)) {
    if (!eval_target) throw ConfigError("label propagation needs held-out target data");
    const std::size_t classes = generator.spec().label_count;
    const std::size_t per_class = (c.eval_samples + classes - 1) / classes;
    return {{"label_propagation_accuracy",
             label_propagation_accuracy(generator, *eval_target, 1, per_class, c.eval_seed)}};
  }
  Rng rng(c.eval_seed);
  const Tensor z = sample_noise(c.eval_samples, generator.spec().noise_dim, rng);
  const AlignedPairs pairs = aligned_pairs(generator, z, 0, 1);
  const auto r = alignment_correlation(pairs, PairTransform::negation);
  return {{"negation_consistency", negation_consistency(pairs)},
          {"alignment_correlation", r.value_or(std::nan(""))}};
}

std::string_view selection_metric(Task task) {
  if (task == Task::multi_info_glyph) return "label_propagation_accuracy";
  if (task == Task::negation_2d) return "alignment_correlation";
  return "negation_consistency";
}

Direction selection_direction(Task task) {
  return task == Task::glyph_negative || task == Task::glyph_edge || task == Task::idx_pair
             ? Direction::minimize
             : Direction::maximize;
}

Checkpoint make_checkpoint(const ExperimentConfig& c, std::size_t step, const Network& generator,
                           const Network& discriminator) {
  Checkpoint ck;
  ck.metadata = {{"task", task_name(c.task)}, {"step", std::to_string(step)},
                 {"config", serialize_config(c)}};
  ck.networks = {generator, discriminator};
  return ck;
}

ExperimentConfig checkpoint_config(const Checkpoint& ckpt) {
  const std::string text = ckpt.meta("config");
  if (text.empty()) throw FormatError("checkpoint carries no experiment config");
  return parse_config(text);
}

std::string checkpoint_name(std::size_t step) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "step_%08zu.agck", step);
  return buf;
}

ExperimentResult run_experiment(const ExperimentConfig& c, bool write_outputs,
                                const std::function<void(const MetricsRow&)>& on_row) {
  const NetworkSpec gs = generator_spec(c);
  const NetworkSpec ds_spec = discriminator_spec(c);
  const DomainDataset data = make_dataset(c);
  std::optional<LabeledImages> eval_target;
  if (multi_info(c.task)) eval_target = make_eval_target(c);
  const LabeledImages* target = eval_target ? &*eval_target : nullptr;

  const std::filesystem::path out = c.output_dir;
  std::ofstream log;
  if (write_outputs) {
    std::filesystem::create_directories(out / "checkpoints");
    write_file(out / "config.txt", serialize_config(c));
    log.open(out / "metrics.jsonl", std::ios::trunc);
    if (!log) throw Error("cannot write " + (out / "metrics.jsonl").string());
  }

  TrainHooks hooks;
  hooks.metrics = [&](const Network& g, std::size_t) { return compute_metrics(c, g, target); };
  hooks.on_row = [&](const MetricsRow& row) {
    if (write_outputs) log << metrics_row_json(row) << '\n' << std::flush;
    if (on_row) on_row(row);
  };
  if (write_outputs)
    hooks.on_checkpoint = [&](std::size_t step, const Network& g, const Network& d) {
      save_checkpoint(out / "checkpoints" / checkpoint_name(step), make_checkpoint(c, step, g, d));
    };

  ExperimentResult result{
      TrainResult{build_generator(gs, 0), build_discriminator(ds_spec, 0), {}}, {}, 0};
  {
    // Same seed derivation as the trainer, so this is exactly the step-0 generator.
    Rng master(c.train.seed);
    result.initial_metrics = compute_metrics(c, build_generator(gs, master.next()), target);
  }
  result.train = multi_info(c.task) ? train_multi_info(c.train, data, gs, ds_spec, hooks)
                                    : train_aligngan(c.train, data, gs, ds_spec, hooks);
  if (!result.train.rows.empty())
    result.selected_row =
        select_checkpoint(result.train.rows, selection_metric(c.task), selection_direction(c.task));

  if (write_outputs) {
    const std::size_t final_step = c.train.total_steps;
    save_checkpoint(out / "final.agck",
                    make_checkpoint(c, final_step, result.train.generator, result.train.discriminator));
    if (!result.train.rows.empty()) {
      const std::size_t best = result.train.rows[result.selected_row].step;
      std::filesystem::copy_file(out / "checkpoints" / checkpoint_name(best), out / "best.agck",
                                 std::filesystem::copy_options::overwrite_existing);
    }
  }
  return result;
}

std::uint8_t pixel_byte(double p) {
  const double b = std::round((std::clamp(p, -1.0, 1.0) + 1.0) * 127.5);
  return static_cast<std::uint8_t>(b);
}

std::string encode_p5(const Graymap& image) {
  if (image.pixels.size() != image.width * image.height)
    throw ShapeError("graymap: pixel count does not match dimensions");
  std::string out = "P5\n" + std::to_string(image.width) + " " + std::to_string(image.height) + "\n255\n";
  out.append(reinterpret_cast<const char*>(image.pixels.data()), image.pixels.size());
  return out;
}

Graymap sample_grid(const Network& generator, std::size_t rows, std::size_t cols,
                    std::uint64_t seed) {
  const NetworkSpec& spec = generator.spec();
  if (spec.sample_shape.size() != 3 || spec.sample_shape[0] != 1)
    throw SpecError("sample grids need a single-channel image generator, got sample shape " +
                    shape_str(spec.sample_shape));
  if (rows == 0 || cols == 0) throw ConfigError("grid needs at least one row and column");
  const std::size_t h = spec.sample_shape[1], w = spec.sample_shape[2], n = rows * cols;
  Rng rng(seed);
  const Tensor z = sample_noise(n, spec.noise_dim, rng);
  std::optional<ConditionBatch> label;
  if (spec.label_count > 0) {
    std::vector<std::size_t> ids(n);
    for (std::size_t i = 0; i < n; ++i) ids[i] = i % spec.label_count;
    label = ConditionBatch::one_hot(ConditionKind::label, spec.label_count, ids);
  }
  const AlignedPairs pairs = aligned_pairs(generator, z, 0, 1, label ? &*label : nullptr);
  Graymap g{cols * 2 * w, rows * h, {}};
  g.pixels.resize(g.width * g.height);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t r0 = (i / cols) * h, c0 = (i % cols) * 2 * w;
    for (std::size_t y = 0; y < h; ++y)
      for (std::size_t x = 0; x < w; ++x) {
        g.pixels[(r0 + y) * g.width + c0 + x] = pixel_byte(pairs.a[i * h * w + y * w + x]);
        g.pixels[(r0 + y) * g.width + c0 + w + x] = pixel_byte(pairs.b[i * h * w + y * w + x]);
      }
  }
  return g;
}

}  // namespace aligngan
