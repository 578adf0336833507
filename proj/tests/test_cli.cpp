#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "doctest.h"
#include "helpers.hpp"
#include "p5_reader.hpp"

#include "aligngan/checkpoint.hpp"
#include "aligngan/cli.hpp"
#include "aligngan/experiment.hpp"

using namespace aligngan;
namespace fs = std::filesystem;

namespace {

struct Run {
  int code;
  std::string out, err;
};

CliOptions with_log(std::string level) {
  CliOptions o;
  o.log_level = std::move(level);
  return o;
}

Run cli(std::vector<std::string> args, const CliOptions& options = with_log("quiet")) {
  args.insert(args.begin(), "aligngan");
  std::ostringstream out, err;
  const int code = run_cli(args, out, err, options);
  return {code, out.str(), err.str()};
}

fs::path write_text(const fs::path& path, const std::string& body) {
  std::ofstream(path) << body;
  return path;
}

const char* kToyConfig = "task=negation_2d\nbatch_size=8\ndataset_size=64\ntotal_steps=4\nmetric_every=2\n";

// Trained toy run shared by the sample/eval cases.
fs::path toy_run() {
  static const fs::path dir = [] {
    const fs::path d = testing::scratch_dir("cli_toy");
    const auto cfg = write_text(d / "toy.cfg", kToyConfig);
    REQUIRE(cli({"train", "--config", cfg.string(), "--out", (d / "run").string()}).code == 0);
    return d / "run";
  }();
  return dir;
}

}  // namespace

TEST_CASE("usage errors exit 1") {
  CHECK(cli({}).code == kExitUsage);
  CHECK(cli({"frobnicate"}).code == kExitUsage);
  CHECK(cli({"train"}).code == kExitUsage);
  CHECK(cli({"sample", "--checkpoint", "x.agck"}).code == kExitUsage);
  CHECK(cli({"sample", "--checkpoint", "x", "--out", "y", "--rows", "0"}).code == kExitUsage);
  CHECK(cli({"eval", "--checkpoint", "x", "--metric", "m", "--n", "abc"}).code == kExitUsage);
  const Run help = cli({"--help"});
  CHECK(help.code == kExitOk);
  CHECK(help.out.find("gradcheck") != std::string::npos);
}

TEST_CASE("train with zero steps writes the initial checkpoint") {
  const fs::path d = testing::scratch_dir("cli_zero");
  const auto cfg = write_text(d / "zero.cfg", "task=negation_2d\ntotal_steps=0\n");
  const Run r = cli({"train", "--config", cfg.string(), "--out", (d / "run").string()});
  CHECK(r.code == kExitOk);
  CHECK(fs::exists(d / "run" / "final.agck"));
  CHECK(fs::exists(d / "run" / "config.txt"));
  const ExperimentConfig c = checkpoint_config(load_checkpoint(d / "run" / "final.agck"));
  CHECK(c.train.total_steps == 0);
}

TEST_CASE("train reports bad configs with exit 1") {
  const fs::path d = testing::scratch_dir("cli_badcfg");
  const Run typo = cli({"train", "--config", write_text(d / "a.cfg", "task=negation_2d\nbatch_sise=4\n").string()});
  CHECK(typo.code == kExitUsage);
  CHECK(typo.err.find("batch_sise") != std::string::npos);

  const Run rule = cli({"train", "--config",
                        write_text(d / "b.cfg",
                                   "task=negation_2d\ndiscriminator_layers=dense:8:leaky_relu;dense:1:none\n")
                            .string(),
                        "--out", (d / "never").string()});
  CHECK(rule.code == kExitUsage);
  CHECK(rule.err.find("rule 2") != std::string::npos);
  CHECK_FALSE(fs::exists(d / "never"));

  CHECK(cli({"train", "--config", (d / "missing.cfg").string()}).code == kExitUsage);
}

TEST_CASE("train writes metrics, checkpoints and the selected checkpoint") {
  const fs::path run = toy_run();
  std::ifstream log(run / "metrics.jsonl");
  std::vector<MetricsRow> rows;
  for (std::string line; std::getline(log, line);) rows.push_back(parse_metrics_row(line));
  REQUIRE(rows.size() == 2);
  CHECK(rows[1].step == 4);
  CHECK(rows[1].metric("alignment_correlation").has_value());
  CHECK(fs::exists(run / "checkpoints" / checkpoint_name(2)));
  CHECK(fs::exists(run / "checkpoints" / checkpoint_name(4)));
  CHECK(fs::exists(run / "best.agck"));
}

TEST_CASE("sample writes a readable graymap") {
  const fs::path run = toy_run();
  const fs::path d = testing::scratch_dir("cli_sample");
  // 2-D samples have no image form.
  CHECK(cli({"sample", "--checkpoint", (run / "final.agck").string(), "--out", (d / "x.pgm").string()})
            .code == kExitUsage);

  const ExperimentConfig c = parse_config("task=glyph_negative\nnoise_dim=8\n");
  save_checkpoint(d / "g.agck", make_checkpoint(c, 0, build_generator(generator_spec(c), 0),
                                                build_discriminator(discriminator_spec(c), 0)));
  const Run r = cli({"sample", "--checkpoint", (d / "g.agck").string(), "--rows", "2", "--cols", "3",
                     "--seed", "5", "--out", (d / "g.pgm").string()});
  CHECK(r.code == kExitOk);
  const auto first = read_file(d / "g.pgm");
  const auto img = testing::read_p5(first);
  CHECK(img.width == 48);
  CHECK(img.height == 16);
  CHECK(cli({"sample", "--checkpoint", (d / "g.agck").string(), "--rows", "2", "--cols", "3", "--seed",
             "5", "--out", (d / "g2.pgm").string()})
            .code == kExitOk);
  CHECK(read_file(d / "g2.pgm") == first);
}

TEST_CASE("runtime failures exit 2") {
  const fs::path d = testing::scratch_dir("cli_corrupt");
  std::string bytes = read_file(toy_run() / "final.agck");
  bytes[bytes.size() / 3] ^= 0x10;
  write_file(d / "bad.agck", bytes);
  const Run r = cli({"sample", "--checkpoint", (d / "bad.agck").string(), "--out", (d / "x.pgm").string()});
  CHECK(r.code == kExitFailure);
  CHECK(cli({"eval", "--checkpoint", (d / "bad.agck").string(), "--metric", "negation_consistency"}).code ==
        kExitFailure);
  CHECK(cli({"eval", "--checkpoint", (d / "none.agck").string(), "--metric", "negation_consistency"}).code ==
        kExitFailure);
}

TEST_CASE("eval") {
  const fs::path d = testing::scratch_dir("cli_eval");
  const ExperimentConfig c = parse_config("task=negation_2d\n");
  Network gen = build_generator(generator_spec(c), 0);
  for (auto& p : gen.params()) p.value.fill(0.0);
  const auto ck = d / "zero.agck";
  save_checkpoint(ck, make_checkpoint(c, 0, gen, build_discriminator(discriminator_spec(c), 0)));

  const Run r = cli({"eval", "--checkpoint", ck.string(), "--metric", "negation_consistency", "--n", "100"});
  CHECK(r.code == kExitOk);
  CHECK(r.out.find("\"value\":0.0") != std::string::npos);
  const std::string log = read_file(ck.string() + ".eval.jsonl");
  CHECK(log == r.out);

  // Zero variance: reported, value null.
  const Run corr = cli({"eval", "--checkpoint", ck.string(), "--metric", "alignment_correlation", "--out",
                        (d / "log.jsonl").string()});
  CHECK(corr.code == kExitOk);
  CHECK(corr.out.find("null") != std::string::npos);
  CHECK(read_file(d / "log.jsonl") == corr.out);

  const Run unknown = cli({"eval", "--checkpoint", ck.string(), "--metric", "inception_score"});
  CHECK(unknown.code == kExitUsage);
  CHECK(unknown.err.find("inception_score") != std::string::npos);
  CHECK(cli({"eval", "--checkpoint", ck.string(), "--metric", "negation_consistency", "--n", "99"}).code ==
        kExitUsage);
  CHECK(cli({"eval", "--checkpoint", ck.string(), "--metric", "label_propagation_accuracy"}).code ==
        kExitUsage);

  // Same checkpoint and seed, same report.
  const Run again = cli({"eval", "--checkpoint", (toy_run() / "final.agck").string(), "--metric",
                         "alignment_correlation", "--seed", "3"});
  const Run again2 = cli({"eval", "--checkpoint", (toy_run() / "final.agck").string(), "--metric",
                          "alignment_correlation", "--seed", "3"});
  CHECK(again.code == kExitOk);
  CHECK(again.out == again2.out);
}

TEST_CASE("gradcheck") {
  const Run ok = cli({"gradcheck"});
  CHECK(ok.code == kExitOk);
  CHECK(ok.out.find(" 0 failed") != std::string::npos);
  CHECK(cli({"gradcheck"}).out == ok.out);

  CliOptions broken = with_log("quiet");
  broken.grad_cases = [](std::uint64_t) { return std::vector<GradCase>{testing::broken_case()}; };
  const Run bad = cli({"gradcheck"}, broken);
  CHECK(bad.code == kExitFailure);
  CHECK(bad.out.find("FAIL broken_double element") != std::string::npos);
  CHECK(bad.out.find("autodiff") != std::string::npos);
  CHECK(bad.out.find("numeric") != std::string::npos);
}

TEST_CASE("show-font and log levels") {
  const Run r = cli({"show-font"});
  CHECK(r.code == kExitOk);
  CHECK(r.out.find("glyph 9") != std::string::npos);
  CHECK(cli({"show-font"}, with_log("verbose")).code == kExitUsage);

  const fs::path d = testing::scratch_dir("cli_log");
  const auto cfg = write_text(d / "toy.cfg", kToyConfig);
  const Run quiet = cli({"train", "--config", cfg.string(), "--out", (d / "q").string()}, with_log("quiet"));
  const Run info = cli({"train", "--config", cfg.string(), "--out", (d / "i").string()}, with_log("info"));
  CHECK(quiet.err.empty());
  CHECK(info.err.find("step 4") != std::string::npos);
  CHECK(read_file(d / "q" / "metrics.jsonl") == read_file(d / "i" / "metrics.jsonl"));
  const Checkpoint q = load_checkpoint(d / "q" / "final.agck"), i = load_checkpoint(d / "i" / "final.agck");
  CHECK(q.network(NetworkRole::generator) == i.network(NetworkRole::generator));
  CHECK(q.network(NetworkRole::discriminator) == i.network(NetworkRole::discriminator));
}
