#include "aligngan/cli.hpp"

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <ostream>

#include "CLI11.hpp"

#include "aligngan/error.hpp"
#include "aligngan/experiment.hpp"

namespace aligngan {

namespace {

enum class LogLevel { quiet, info, debug };

LogLevel parse_log_level(const std::string& s) {
  if (s.empty() || s == "info") return LogLevel::info;
  if (s == "quiet") return LogLevel::quiet;
  if (s == "debug") return LogLevel::debug;
  throw ConfigError("ALIGNGAN_LOG must be quiet, info or debug, got '" + s + "'");
}

std::string format_row(const MetricsRow& row) {
  std::ostringstream os;
  os << "step " << row.step << " d_loss " << row.d_loss << " g_loss " << row.g_loss;
  for (const auto& [k, v] : row.metrics) os << ' ' << k << ' ' << v;
  return os.str();
}

struct Context {
  std::ostream& out;
  std::ostream& err;
  LogLevel level;

  void info(const std::string& msg) const {
    if (level != LogLevel::quiet) err << msg << '\n';
  }
  void debug(const std::string& msg) const {
    if (level == LogLevel::debug) err << msg << '\n';
  }
};

int cmd_train(const Context& ctx, const std::string& config_path, std::optional<std::uint64_t> seed,
              const std::string& out_dir) {
  if (!std::filesystem::is_regular_file(config_path))
    throw ConfigError("cannot read config file " + config_path);
  ExperimentConfig config = parse_config(read_file(config_path));
  if (seed) config.train.seed = *seed;
  if (!out_dir.empty()) config.output_dir = out_dir;
  // Fail on a rule-breaking spec before any output is written.
  generator_spec(config);
  discriminator_spec(config);
  ctx.debug("config:\n" + serialize_config(config));
  const ExperimentResult r =
      run_experiment(config, true, [&](const MetricsRow& row) { ctx.info(format_row(row)); });
  ctx.out << "wrote " << config.output_dir << "/final.agck";
  if (!r.train.rows.empty())
    ctx.out << ", best.agck (step " << r.train.rows[r.selected_row].step << " by "
            << selection_metric(config.task) << ")";
  ctx.out << '\n';
  return kExitOk;
}

int cmd_sample(const Context& ctx, const std::string& checkpoint, std::size_t rows,
               std::size_t cols, std::uint64_t seed, const std::string& out_path) {
  const Checkpoint ck = load_checkpoint(checkpoint);
  const Graymap grid = sample_grid(ck.network(NetworkRole::generator), rows, cols, seed);
  write_file(out_path, encode_p5(grid));
  ctx.out << "wrote " << out_path << " (" << grid.width << "x" << grid.height << ")\n";
  return kExitOk;
}

int cmd_eval(const Context& ctx, const std::string& checkpoint, const std::string& metric,
             std::size_t n, std::uint64_t seed, const std::string& log_path) {
  if (!is_metric_name(metric)) {
    ctx.err << "unknown metric '" << metric << "'; choose from";
    for (auto m : metric_names()) ctx.err << ' ' << m;
    ctx.err << '\n';
    return kExitUsage;
  }
  if (n < kMinEvalSamples)
    throw ConfigError("n must be at least " + std::to_string(kMinEvalSamples) + ", got " +
                      std::to_string(n));
  const Checkpoint ck = load_checkpoint(checkpoint);
  const Network& gen = ck.network(NetworkRole::generator);
  std::optional<double> value;
  std::size_t samples = n;
  if (metric == "label_propagation_accuracy") {
    const ExperimentConfig config = checkpoint_config(ck);
    const LabeledImages held = make_eval_target(config);
    const std::size_t classes = gen.spec().label_count;
    if (classes == 0) throw ConfigError("checkpoint generator has no label sites");
    const std::size_t per_class = (n + classes - 1) / classes;
    samples = per_class * classes;
    value = label_propagation_accuracy(gen, held, 1, per_class, seed);
  } else {
    if (gen.spec().label_count > 0)
      throw ConfigError(metric + " is defined for generators without label sites");
    Rng rng(seed);
    const AlignedPairs pairs = aligned_pairs(gen, sample_noise(n, gen.spec().noise_dim, rng), 0, 1);
    value = metric == "negation_consistency" ? std::optional(negation_consistency(pairs))
                                             : alignment_correlation(pairs, PairTransform::negation);
  }
  const EvalReport report = EvalReport::make(metric, value, samples, seed, checkpoint);
  const std::string line = eval_report_json(report);
  ctx.out << line << '\n';
  const std::string path = log_path.empty() ? checkpoint + ".eval.jsonl" : log_path;
  std::ofstream log(path, std::ios::app);
  if (!log) throw Error("cannot append to " + path);
  log << line << '\n';
  return kExitOk;
}

int cmd_gradcheck(const Context& ctx, const CliOptions& options, std::uint64_t seed) {
  const auto cases = options.grad_cases ? options.grad_cases(seed) : standard_grad_cases(seed);
  const GradSuiteReport report = run_grad_suite(cases);
  double worst = 0.0;
  for (const auto& c : report.cases) {
    worst = std::max(worst, c.result.max_rel_error);
    if (!c.passed) {
      ctx.out << "FAIL " << c.name;
      if (!c.error.empty())
        ctx.out << ": " << c.error;
      else
        ctx.out << std::setprecision(17) << " element " << c.result.worst_index << " autodiff "
                << c.result.autodiff << " numeric " << c.result.numeric << " rel_error "
                << c.result.max_rel_error;
      ctx.out << '\n';
    } else {
      ctx.debug("ok " + c.name + " " + std::to_string(c.result.max_rel_error));
    }
  }
  ctx.out << std::setprecision(6) << report.cases.size() << " cases, " << report.failures()
          << " failed, worst relative error " << worst << '\n';
  return report.passed() ? kExitOk : kExitFailure;
}

int cmd_show_font(const Context& ctx) {
  const auto& font = glyph_font();
  for (std::size_t c = 0; c < font.size(); ++c) {
    ctx.out << "glyph " << c << '\n';
    for (auto row : font[c]) ctx.out << row << '\n';
  }
  return kExitOk;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err,
            const CliOptions& options) {
  CLI::App app{"Domain-aligned GAN training at desk scale"};
  app.require_subcommand(1);

  std::string config_path, checkpoint, out_path, metric;
  std::uint64_t seed = 0;
  std::optional<std::uint64_t> train_seed;
  std::size_t rows = 4, cols = 4, n = 1000;

  auto* train = app.add_subcommand("train", "Train from a config file");
  train->add_option("--config", config_path, "Experiment config (key=value lines)")->required();
  train->add_option("--seed", train_seed, "Override the config seed");
  train->add_option("--out", out_path, "Override the output directory");

  auto* sample = app.add_subcommand("sample", "Write a P5 grid of aligned pairs");
  sample->add_option("--checkpoint", checkpoint)->required();
  sample->add_option("--rows", rows)->check(CLI::PositiveNumber);
  sample->add_option("--cols", cols)->check(CLI::PositiveNumber);
  sample->add_option("--seed", seed);
  sample->add_option("--out", out_path, "Output .pgm path")->required();

  auto* eval = app.add_subcommand("eval", "Evaluate one metric on a checkpoint");
  eval->add_option("--checkpoint", checkpoint)->required();
  eval->add_option("--metric", metric)->required();
  eval->add_option("--n", n, "Sample count (at least 100)");
  eval->add_option("--seed", seed);
  eval->add_option("--out", out_path, "Metrics log to append to");

  auto* gradcheck = app.add_subcommand("gradcheck", "Check every op and both default networks");
  gradcheck->add_option("--seed", seed);

  auto* show_font = app.add_subcommand("show-font", "Print the built-in glyph font");

  std::vector<std::string> rev(args.rbegin(), args.rend());
  if (!rev.empty()) rev.pop_back();
  try {
    app.parse(rev);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "usage error: " << e.what() << '\n' << app.help();
    return kExitUsage;
  }

  try {
    std::string level = options.log_level;
    if (level.empty())
      if (const char* env = std::getenv("ALIGNGAN_LOG")) level = env;
    const Context ctx{out, err, parse_log_level(level)};
    if (*train) return cmd_train(ctx, config_path, train_seed, out_path);
    if (*sample) return cmd_sample(ctx, checkpoint, rows, cols, seed, out_path);
    if (*eval) return cmd_eval(ctx, checkpoint, metric, n, seed, out_path);
    if (*gradcheck) return cmd_gradcheck(ctx, options, seed);
    if (*show_font) return cmd_show_font(ctx);
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const SpecError& e) {
    err << "invalid network spec: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitFailure;
  }
  return kExitUsage;
}

}  // namespace aligngan
