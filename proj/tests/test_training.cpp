#include <cmath>
#include <optional>
#include <vector>

#include "doctest.h"
#include "helpers.hpp"

#include "aligngan/error.hpp"
#include "aligngan/experiment.hpp"
#include "aligngan/training.hpp"

using namespace aligngan;

namespace {

ExperimentConfig toy_config(std::size_t steps) {
  return parse_config("task=negation_2d\nbatch_size=8\ndataset_size=64\nmetric_every=2\ntotal_steps=" +
                      std::to_string(steps) + "\n");
}

ExperimentConfig tiny_multi_config(std::size_t steps) {
  return parse_config(
      "task=multi_info_glyph\nclass_count=3\nbatch_size=4\ndataset_size=60\nnoise_dim=6\n"
      "eval_samples=120\neval_holdout=90\n"
      "generator_layers=dense:16:leaky_relu:label;dense:64:tanh:domain:reshape=1x8x8\n"
      "discriminator_layers=conv:4:k4:s2:p1:leaky_relu:domain;dense:8:leaky_relu:label;dense:1:none\n"
      "total_steps=" + std::to_string(steps) + "\n");
}

TrainResult train(const ExperimentConfig& c, const TrainHooks& hooks = {}) {
  const DomainDataset data = make_dataset(c);
  return multi_info(c.task)
             ? train_multi_info(c.train, data, generator_spec(c), discriminator_spec(c), hooks)
             : train_aligngan(c.train, data, generator_spec(c), discriminator_spec(c), hooks);
}

std::vector<Parameter> single(double w) { return {{"w", Tensor::from({w})}}; }

bool all_zero(const Tensor& t, std::size_t begin, std::size_t end, std::size_t stride,
              std::size_t count) {
  for (std::size_t b = begin; b < end; ++b)
    for (std::size_t i = 0; i < count; ++i)
      if (t[b * stride + i] != 0.0) return false;
  return true;
}

}  // namespace

TEST_CASE("adam first step from zero") {
  auto params = single(0.0);
  AdamState state = AdamState::zeros_like(params);
  const std::vector<Tensor> grads{Tensor::from({1.0})};
  AdamOptions opts;
  opts.learning_rate = 0.001;
  adam_step(params, grads, state, opts);
  CHECK(params[0].value[0] == doctest::Approx(-0.000999999990).epsilon(1e-12));
  CHECK(state.t == 1);
}

TEST_CASE("adam with zero gradients leaves parameters unchanged") {
  auto params = single(0.3);
  AdamState state = AdamState::zeros_like(params);
  const std::vector<Tensor> grads{Tensor::from({0.0})};
  adam_step(params, grads, state, AdamOptions{});
  CHECK(params[0].value[0] == 0.3);
}

TEST_CASE("adam matches the scalar moment recurrence") {
  auto params = single(0.0);
  AdamState state = AdamState::zeros_like(params);
  const AdamOptions o{0.01, 0.5, 0.999, 1e-8};
  const std::vector<Tensor> grads{Tensor::from({1.0})};
  double w = 0.0, m = 0.0, v = 0.0;
  for (int t = 1; t <= 2; ++t) {
    adam_step(params, grads, state, o);
    m = o.beta1 * m + (1 - o.beta1) * 1.0;
    v = o.beta2 * v + (1 - o.beta2) * 1.0;
    const double mh = m / (1 - std::pow(o.beta1, t)), vh = v / (1 - std::pow(o.beta2, t));
    w -= o.learning_rate * mh / (std::sqrt(vh) + o.eps);
    CHECK(params[0].value[0] == doctest::Approx(w).epsilon(1e-14));
  }
}

TEST_CASE("adam rejects a non-finite gradient without side effects") {
  auto params = single(0.5);
  AdamState state = AdamState::zeros_like(params);
  const std::vector<Tensor> grads{Tensor::from({std::nan("")})};
  try {
    adam_step(params, grads, state, AdamOptions{}, 17);
    FAIL("expected NumericError");
  } catch (const NumericError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("17") != std::string::npos);
    CHECK(msg.find("parameter w") != std::string::npos);
  }
  CHECK(params[0].value[0] == 0.5);
  CHECK(state.t == 0);
}

TEST_CASE("alternation schedule") {
  CHECK(schedule_kind(0, 4) == StepKind::label_step);
  CHECK(schedule_kind(1, 4) == StepKind::domain_step);
  CHECK(schedule_kind(8, 4) == StepKind::label_step);
  std::size_t labels = 0;
  for (std::uint64_t s = 0; s < 1000; ++s)
    if (schedule_kind(s, 4) == StepKind::label_step) {
      ++labels;
      CHECK(s % 4 == 0);
    }
  CHECK(labels == 250);
  CHECK_THROWS_AS(schedule_kind(0, 1), ConfigError);
}

TEST_CASE("zero steps returns the initial networks and no rows") {
  const ExperimentConfig c = toy_config(0);
  const TrainResult r = train(c);
  CHECK(r.rows.empty());
  const TrainResult again = train(c);
  CHECK(r.generator == again.generator);
  CHECK(r.discriminator == again.discriminator);
}

TEST_CASE("same seed gives bitwise-identical runs") {
  const ExperimentConfig c = toy_config(6);
  const TrainResult a = train(c), b = train(c);
  CHECK(a.generator == b.generator);
  CHECK(a.discriminator == b.discriminator);
  REQUIRE(a.rows.size() == 3);
  CHECK(a.rows == b.rows);
  CHECK(a.rows.back().step == 6);

  ExperimentConfig other = c;
  other.train.seed = 1;
  CHECK_FALSE(train(other).generator == a.generator);
}

TEST_CASE("discriminator updates first and the generator sees the updated discriminator") {
  const ExperimentConfig c = toy_config(3);
  std::vector<TraceEvent> events;
  std::optional<std::vector<Parameter>> d_before;
  std::optional<std::vector<Tensor>> d_grads;
  bool opponent_checked = false;
  TrainHooks hooks;
  hooks.trace = [&](const TraceEvent& e) {
    events.push_back(e);
    if (e.step != 0) return;
    if (e.update == UpdateKind::discriminator) {
      d_before = e.network->params();
      d_grads.emplace(e.grads.begin(), e.grads.end());
      return;
    }
    // The first Adam step moves each weight by lr * g / (|g| + eps).
    const double lr = c.train.adam.learning_rate;
    const auto& now = e.opponent->params();
    REQUIRE(now.size() == d_before->size());
    for (std::size_t p = 0; p < now.size(); ++p)
      for (std::size_t i = 0; i < now[p].value.size(); ++i) {
        const double g = (*d_grads)[p][i];
        const double expect = (*d_before)[p].value[i] - lr * g / (std::abs(g) + c.train.adam.eps);
        CHECK(now[p].value[i] == doctest::Approx(expect).epsilon(1e-12));
      }
    opponent_checked = true;
  };
  train(c, hooks);
  CHECK(opponent_checked);
  REQUIRE(events.size() == 6);
  for (std::size_t s = 0; s < 3; ++s) {
    const TraceEvent& d = events[2 * s];
    const TraceEvent& g = events[2 * s + 1];
    CHECK(d.update == UpdateKind::discriminator);
    CHECK(g.update == UpdateKind::generator);
    CHECK(d.step == s);
    CHECK(g.step == s);
    CHECK(d.discriminator_version == s);
    CHECK(d.generator_version == s);
    CHECK(g.discriminator_version == s + 1);
    CHECK(g.generator_version == s);
    CHECK(d.schedule == StepKind::domain_step);
  }
}

TEST_CASE("multi-info steps mask the unused code and its weights get zero gradient") {
  const ExperimentConfig c = tiny_multi_config(9);
  std::vector<StepKind> schedule;
  std::size_t checked = 0;
  TrainHooks hooks;
  hooks.trace = [&](const TraceEvent& e) {
    REQUIRE(e.label != nullptr);
    const bool label_step = e.schedule == StepKind::label_step;
    CHECK(e.domain->all_zero() == label_step);
    CHECK(e.label->all_zero() == !label_step);
    if (e.update == UpdateKind::discriminator) {
      schedule.push_back(e.schedule);
      // layer0.weight [4, 1+2, 4, 4]: channels 1..2 take the domain code.
      // layer1.weight [64+3, 8]: rows 64..66 take the label.
      const Tensor& w0 = e.grads[0];
      bool dom_zero = true;
      for (std::size_t o = 0; o < 4; ++o)
        for (std::size_t ch = 1; ch < 3; ++ch)
          for (std::size_t i = 0; i < 16; ++i) dom_zero &= w0[(o * 3 + ch) * 16 + i] == 0.0;
      CHECK(dom_zero == label_step);
      CHECK(all_zero(e.grads[2], 64, 67, 8, 8) == !label_step);
    } else {
      // layer0.weight [6+3, 16]: rows 6..8 label. layer1.weight [16+2, 64]: rows 16..17 domain.
      CHECK(all_zero(e.grads[0], 6, 9, 16, 16) == !label_step);
      CHECK(all_zero(e.grads[2], 16, 18, 64, 64) == label_step);
    }
    ++checked;
  };
  train(c, hooks);
  CHECK(checked == 18);
  const std::vector<StepKind> expect{StepKind::label_step,  StepKind::domain_step,
                                     StepKind::domain_step, StepKind::domain_step,
                                     StepKind::label_step,  StepKind::domain_step,
                                     StepKind::domain_step, StepKind::domain_step,
                                     StepKind::label_step};
  CHECK(schedule == expect);
}

TEST_CASE("multi-info training rejects a labeled target domain") {
  const ExperimentConfig c = tiny_multi_config(1);
  DomainDataset data = make_dataset(c);
  data.domains[1].labels = data.domains[0].labels;
  data.domains[1].class_count = data.domains[0].class_count;
  try {
    train_multi_info(c.train, data, generator_spec(c), discriminator_spec(c));
    FAIL("labeled target accepted");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("labels supplied for target domain") != std::string::npos);
  }
}

TEST_CASE("training validates the dataset before step 0") {
  const ExperimentConfig c = toy_config(2);
  DomainDataset data = make_dataset(c);
  bool traced = false;
  TrainHooks hooks;
  hooks.trace = [&](const TraceEvent&) { traced = true; };
  data.domains[1].samples = Tensor();
  CHECK_THROWS_AS(train_aligngan(c.train, data, generator_spec(c), discriminator_spec(c), hooks),
                  ConfigError);
  CHECK_FALSE(traced);

  // Label sites need the multi-info loop.
  const ExperimentConfig m = tiny_multi_config(1);
  CHECK_THROWS_AS(train_aligngan(m.train, make_dataset(m), generator_spec(m), discriminator_spec(m)),
                  ConfigError);
}

TEST_CASE("checkpoint selection") {
  auto row = [](std::size_t step, double v) { return MetricsRow{step, 0, 0, {{"m", v}}}; };
  const std::vector<MetricsRow> one{row(1, 0.4)};
  CHECK(select_checkpoint(one, "m", Direction::minimize) == 0);
  const std::vector<MetricsRow> rows{row(1, 0.9), row(2, 0.2), row(3, 0.5)};
  CHECK(select_checkpoint(rows, "m", Direction::minimize) == 1);
  CHECK(select_checkpoint(rows, "m", Direction::maximize) == 0);
  const std::vector<MetricsRow> tie{row(1, 0.5), row(2, 0.2), row(3, 0.2)};
  CHECK(select_checkpoint(tie, "m", Direction::minimize) == 1);
  CHECK_THROWS_AS(select_checkpoint(std::vector<MetricsRow>{}, "m", Direction::minimize), Error);
  CHECK_THROWS_AS(select_checkpoint(rows, "other", Direction::minimize), Error);
}

TEST_CASE("metrics rows round trip through JSON") {
  const MetricsRow r{40, 0.125, -1.5e-7, {{"negation_consistency", 0.1}, {"alignment_correlation", -0.3}}};
  const std::string line = metrics_row_json(r);
  CHECK(line.find('\n') == std::string::npos);
  CHECK(parse_metrics_row(line) == r);
  CHECK_THROWS_AS(parse_metrics_row("{\"step\":"), FormatError);
}

TEST_CASE("noise is uniform in [-1,1]") {
  Rng rng(0);
  const Tensor z = sample_noise(500, 4, rng);
  CHECK(z.shape() == Shape{500, 4});
  double lo = 1, hi = -1;
  for (double v : z.values()) lo = std::min(lo, v), hi = std::max(hi, v);
  CHECK(lo >= -1.0);
  CHECK(hi <= 1.0);
  CHECK(lo < -0.95);
  CHECK(hi > 0.95);
}
