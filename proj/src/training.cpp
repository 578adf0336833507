#include "aligngan/training.hpp"

#include <algorithm>
#include <cmath>

#include "json.hpp"

#include "aligngan/error.hpp"
#include "aligngan/ops.hpp"

namespace aligngan {

AdamState AdamState::zeros_like(std::span<const Parameter> params) {
  AdamState s;
  for (const auto& p : params) {
    s.m.emplace_back(p.value.shape(), 0.0);
    s.v.emplace_back(p.value.shape(), 0.0);
  }
  return s;
}

void adam_step(std::span<Parameter> params, std::span<const Tensor> grads, AdamState& state,
               const AdamOptions& o, std::uint64_t step) {
  if (grads.size() != params.size() || state.m.size() != params.size() ||
      state.v.size() != params.size())
    throw ShapeError("adam_step: " + std::to_string(params.size()) + " parameters, " +
                     std::to_string(grads.size()) + " gradients, " +
                     std::to_string(state.m.size()) + " moments");
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (grads[i].shape() != params[i].value.shape() || state.m[i].shape() != grads[i].shape())
      throw ShapeError("adam_step: gradient for " + params[i].name + " has shape " +
                       shape_str(grads[i].shape()) + ", parameter is " +
                       shape_str(params[i].value.shape()));
    if (!grads[i].all_finite())
      throw NumericError("adam_step: non-finite gradient at step " + std::to_string(step) +
                         " in parameter " + params[i].name);
  }
  state.t += 1;
  const double c1 = 1.0 - std::pow(o.beta1, static_cast<double>(state.t));
  const double c2 = 1.0 - std::pow(o.beta2, static_cast<double>(state.t));
  for (std::size_t i = 0; i < params.size(); ++i) {
    double* w = params[i].value.data();
    double* m = state.m[i].data();
    double* v = state.v[i].data();
    const double* g = grads[i].data();
    for (std::size_t j = 0; j < grads[i].size(); ++j) {
      m[j] = o.beta1 * m[j] + (1.0 - o.beta1) * g[j];
      v[j] = o.beta2 * v[j] + (1.0 - o.beta2) * g[j] * g[j];
      const double mhat = m[j] / c1;
      const double vhat = v[j] / c2;
      w[j] -= o.learning_rate * mhat / (std::sqrt(vhat) + o.eps);
    }
  }
}

StepKind schedule_kind(std::uint64_t step, std::uint64_t tau) {
  if (tau < 2) throw ConfigError("tau must be at least 2, got " + std::to_string(tau));
  return step % tau == 0 ? StepKind::label_step : StepKind::domain_step;
}

const char* step_kind_name(StepKind kind) {
  return kind == StepKind::label_step ? "label_step" : "domain_step";
}

TrainConfig TrainConfig::for_objective(ObjectiveKind kind) {
  TrainConfig c;
  c.objective = kind;
  c.adam.learning_rate = default_learning_rate(kind);
  return c;
}

void TrainConfig::validate(bool multi_info) const {
  if (!(adam.learning_rate > 0) || !std::isfinite(adam.learning_rate))
    throw ConfigError("learning_rate must be positive");
  if (!(adam.beta1 >= 0 && adam.beta1 < 1) || !(adam.beta2 >= 0 && adam.beta2 < 1))
    throw ConfigError("adam betas must lie in [0,1)");
  if (!(adam.eps > 0)) throw ConfigError("adam eps must be positive");
  if (batch_size == 0) throw ConfigError("batch_size must be at least 1");
  if (multi_info && tau < 2) throw ConfigError("tau must be at least 2");
}

std::optional<double> MetricsRow::metric(std::string_view name) const {
  for (const auto& [k, v] : metrics)
    if (k == name) return v;
  return std::nullopt;
}

std::string metrics_row_json(const MetricsRow& row) {
  nlohmann::ordered_json j;
  j["step"] = row.step;
  j["d_loss"] = row.d_loss;
  j["g_loss"] = row.g_loss;
  j["metrics"] = nlohmann::ordered_json::object();
  for (const auto& [k, v] : row.metrics) j["metrics"][k] = v;
  return j.dump();
}

MetricsRow parse_metrics_row(std::string_view line) {
  try {
    const auto j = nlohmann::ordered_json::parse(line);
    MetricsRow row;
    row.step = j.at("step").get<std::size_t>();
    row.d_loss = j.at("d_loss").get<double>();
    row.g_loss = j.at("g_loss").get<double>();
    for (const auto& [k, v] : j.at("metrics").items()) row.metrics.emplace_back(k, v.get<double>());
    return row;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("metrics row: ") + e.what());
  }
}

Tensor sample_noise(std::size_t n, std::size_t noise_dim, Rng& rng) {
  Tensor z({n, noise_dim});
  for (double& v : z.values()) v = rng.uniform(-1.0, 1.0);
  return z;
}

namespace {

struct Batch {
  Tensor real;
  ConditionBatch domain;
  std::optional<ConditionBatch> label;
};

// Appends `count` samples of `d`, drawn with replacement, to `out` at row `row`.
void draw_rows(const Domain& d, std::size_t count, Rng& rng, Tensor& out, std::size_t row,
               std::vector<std::size_t>* labels) {
  const std::size_t width = d.samples.size() / d.size();
  for (std::size_t i = 0; i < count; ++i) {
    const std::size_t pick = rng.below(d.size());
    std::copy_n(d.samples.data() + pick * width, width, out.data() + (row + i) * width);
    if (labels) labels->push_back(d.labels[pick]);
  }
}

Shape batch_shape(std::size_t n, const Shape& sample) {
  Shape s{n};
  s.insert(s.end(), sample.begin(), sample.end());
  return s;
}

std::vector<Tensor> collect(const Gradients& grads, const BoundNetwork& bound) {
  std::vector<Tensor> out;
  out.reserve(bound.params.size());
  for (const Var& p : bound.params) out.push_back(grads.get_or_zero(p));
  return out;
}

class Trainer {
 public:
  Trainer(const TrainConfig& config, const NetworkSpec& gen_spec, const NetworkSpec& disc_spec,
          const TrainHooks& hooks)
      : config_(config), hooks_(hooks), master_(config.seed),
        gen_(build_generator(gen_spec, master_.next())),
        disc_(build_discriminator(disc_spec, master_.next())),
        data_rng_(master_.next()), noise_rng_(master_.next()),
        gen_adam_(AdamState::zeros_like(gen_.params())),
        disc_adam_(AdamState::zeros_like(disc_.params())) {}

  Rng& data_rng() { return data_rng_; }

  template <class MakeBatch>
  TrainResult run(MakeBatch make_batch) {
    TrainResult result{gen_, disc_, {}};
    for (std::size_t step = 0; step < config_.total_steps; ++step) {
      Batch batch = make_batch(step);
      const StepKind kind = batch.label && batch.domain.all_zero() ? StepKind::label_step
                                                                   : StepKind::domain_step;
      this->step(step, kind, batch);
      const std::size_t done = step + 1;
      const bool last = done == config_.total_steps;
      if (last || (config_.metric_every && done % config_.metric_every == 0)) {
        MetricsRow row{done, d_loss_, g_loss_, {}};
        if (hooks_.metrics) row.metrics = hooks_.metrics(gen_, done);
        if (hooks_.on_row) hooks_.on_row(row);
        result.rows.push_back(std::move(row));
      }
      if (hooks_.on_checkpoint &&
          (last || (config_.checkpoint_every && done % config_.checkpoint_every == 0)))
        hooks_.on_checkpoint(done, gen_, disc_);
    }
    if (config_.total_steps == 0 && hooks_.on_checkpoint) hooks_.on_checkpoint(0, gen_, disc_);
    result.generator = gen_;
    result.discriminator = disc_;
    return result;
  }

 private:
  void step(std::size_t step, StepKind kind, const Batch& batch) {
    const std::size_t n = batch.real.dim(0);
    const ConditionBatch* label = batch.label ? &*batch.label : nullptr;
    const Tensor z = sample_noise(n, gen_.spec().noise_dim, noise_rng_);

    {
      Graph g;
      const BoundNetwork d = bind(g, disc_, true);
      const Tensor fake = evaluate(gen_, z, batch.domain, label);
      const Var real_scores = forward(d, g.constant(batch.real), batch.domain, label);
      const Var fake_scores = forward(d, g.constant(fake), batch.domain, label);
      const Var loss = discriminator_loss(config_.objective, real_scores, fake_scores);
      d_loss_ = loss.value()[0];
      const auto grads = collect(backward(g, loss), d);
      emit(step, UpdateKind::discriminator, kind, d_loss_, disc_, gen_, grads, batch);
      adam_step(disc_.params(), grads, disc_adam_, config_.adam, step);
      ++disc_updates_;
    }
    {
      Graph g;
      const BoundNetwork gb = bind(g, gen_, true);
      const BoundNetwork d = bind(g, disc_, false);
      const Var fake = forward(gb, g.constant(z), batch.domain, label);
      const Var loss = generator_loss(config_.objective, forward(d, fake, batch.domain, label),
                                      config_.saturating_generator_loss);
      g_loss_ = loss.value()[0];
      const auto grads = collect(backward(g, loss), gb);
      emit(step, UpdateKind::generator, kind, g_loss_, gen_, disc_, grads, batch);
      adam_step(gen_.params(), grads, gen_adam_, config_.adam, step);
      ++gen_updates_;
    }
  }

  void emit(std::size_t step, UpdateKind update, StepKind kind, double loss, const Network& net,
            const Network& opponent, const std::vector<Tensor>& grads, const Batch& batch) {
    if (!hooks_.trace) return;
    TraceEvent e;
    e.step = step;
    e.update = update;
    e.schedule = kind;
    e.discriminator_version = disc_updates_;
    e.generator_version = gen_updates_;
    e.loss = loss;
    e.network = &net;
    e.opponent = &opponent;
    e.grads = grads;
    e.domain = &batch.domain;
    e.label = batch.label ? &*batch.label : nullptr;
    hooks_.trace(e);
  }

  const TrainConfig& config_;
  const TrainHooks& hooks_;
  Rng master_;
  Network gen_, disc_;
  Rng data_rng_, noise_rng_;
  AdamState gen_adam_, disc_adam_;
  std::size_t disc_updates_ = 0, gen_updates_ = 0;
  double d_loss_ = 0.0, g_loss_ = 0.0;
};

void check_specs(const DomainDataset& dataset, const NetworkSpec& gen_spec,
                 const NetworkSpec& disc_spec) {
  dataset.validate();
  if (dataset.domain_count() < 2)
    throw ConfigError("training needs at least 2 domains, got " +
                      std::to_string(dataset.domain_count()));
  for (const NetworkSpec* s : {&gen_spec, &disc_spec}) {
    if (s->domain_count != dataset.domain_count())
      throw ConfigError(std::string(role_name(s->role)) + " expects " +
                        std::to_string(s->domain_count) + " domains, dataset has " +
                        std::to_string(dataset.domain_count()));
    if (s->sample_shape != dataset.sample_shape())
      throw ConfigError(std::string(role_name(s->role)) + " sample_shape " +
                        shape_str(s->sample_shape) + " does not match the data " +
                        shape_str(dataset.sample_shape()));
  }
  if (gen_spec.label_count != disc_spec.label_count)
    throw ConfigError("generator and discriminator disagree on label_count");
}

}  // namespace

TrainResult train_aligngan(const TrainConfig& config, const DomainDataset& dataset,
                           const NetworkSpec& gen_spec, const NetworkSpec& disc_spec,
                           const TrainHooks& hooks) {
  config.validate(false);
  check_specs(dataset, gen_spec, disc_spec);
  for (const NetworkSpec* s : {&gen_spec, &disc_spec})
    for (const auto& l : s->layers)
      if (l.inject_label)
        throw ConfigError("network has label sites; use multi-info training");

  const std::size_t k = dataset.domain_count(), b = config.batch_size;
  std::vector<std::size_t> domain_ids;
  for (std::size_t d = 0; d < k; ++d) domain_ids.insert(domain_ids.end(), b, d);
  const auto codes = ConditionBatch::one_hot(ConditionKind::domain, k, domain_ids);
  const Shape shape = batch_shape(k * b, dataset.sample_shape());

  Trainer trainer(config, gen_spec, disc_spec, hooks);
  return trainer.run([&](std::size_t) {
    Tensor real(shape);
    for (std::size_t d = 0; d < k; ++d)
      draw_rows(dataset.domains[d], b, trainer.data_rng(), real, d * b, nullptr);
    return Batch{std::move(real), codes, std::nullopt};
  });
}

TrainResult train_multi_info(const TrainConfig& config, const DomainDataset& dataset,
                             const NetworkSpec& gen_spec, const NetworkSpec& disc_spec,
                             const TrainHooks& hooks) {
  config.validate(true);
  check_specs(dataset, gen_spec, disc_spec);
  std::optional<std::size_t> source;
  for (std::size_t d = 0; d < dataset.domain_count(); ++d) {
    if (!dataset.domains[d].labeled()) continue;
    if (source)
      throw ConfigError("labels supplied for target domain '" + dataset.domains[d].name +
                        "'; only the source domain may be labeled");
    source = d;
  }
  if (!source) throw ConfigError("multi-info training needs a labeled source domain");
  const Domain& src = dataset.domains[*source];
  if (gen_spec.label_count == 0 || src.class_count != gen_spec.label_count)
    throw ConfigError("source domain has " + std::to_string(src.class_count) +
                      " classes, networks expect " + std::to_string(gen_spec.label_count));

  const std::size_t k = dataset.domain_count(), kl = gen_spec.label_count, b = config.batch_size;
  std::vector<std::size_t> domain_ids;
  for (std::size_t d = 0; d < k; ++d) domain_ids.insert(domain_ids.end(), b, d);
  const auto domain_codes = ConditionBatch::one_hot(ConditionKind::domain, k, domain_ids);
  const auto zero_labels = ConditionBatch::zeros(ConditionKind::label, kl, k * b);
  const auto zero_domains = ConditionBatch::zeros(ConditionKind::domain, k, b);
  const Shape label_shape = batch_shape(b, dataset.sample_shape());
  const Shape domain_shape = batch_shape(k * b, dataset.sample_shape());

  Trainer trainer(config, gen_spec, disc_spec, hooks);
  return trainer.run([&](std::size_t step) {
    if (schedule_kind(step, config.tau) == StepKind::label_step) {
      Tensor real(label_shape);
      std::vector<std::size_t> labels;
      draw_rows(src, b, trainer.data_rng(), real, 0, &labels);
      return Batch{std::move(real), zero_domains,
                   ConditionBatch::one_hot(ConditionKind::label, kl, labels)};
    }
    Tensor real(domain_shape);
    for (std::size_t d = 0; d < k; ++d)
      draw_rows(dataset.domains[d], b, trainer.data_rng(), real, d * b, nullptr);
    return Batch{std::move(real), domain_codes, zero_labels};
  });
}

std::size_t select_checkpoint(std::span<const MetricsRow> rows, std::string_view metric,
                              Direction direction) {
  if (rows.empty()) throw Error("select_checkpoint: metrics log is empty");
  std::size_t best = 0;
  double best_value = 0.0;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto v = rows[i].metric(metric);
    if (!v)
      throw Error("select_checkpoint: row at step " + std::to_string(rows[i].step) + " lacks " +
                  std::string(metric));
    const bool better = direction == Direction::minimize ? *v < best_value : *v > best_value;
    if (i == 0 || better) {
      best = i;
      best_value = *v;
    }
  }
  return best;
}

}  // namespace aligngan
