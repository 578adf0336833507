#include <filesystem>
#include <string>

#include "doctest.h"
#include "helpers.hpp"
#include "p5_reader.hpp"

#include "aligngan/checkpoint.hpp"
#include "aligngan/error.hpp"
#include "aligngan/experiment.hpp"
#include "aligngan/text.hpp"

using namespace aligngan;

namespace {

Checkpoint sample_checkpoint() {
  const ExperimentConfig c = parse_config("task=glyph_negative\nnoise_dim=12\n");
  return make_checkpoint(c, 42, build_generator(generator_spec(c), 1),
                         build_discriminator(discriminator_spec(c), 2));
}

}  // namespace

TEST_CASE("checkpoint encode/decode is exact") {
  const Checkpoint ck = sample_checkpoint();
  const std::string bytes = encode_checkpoint(ck);
  const Checkpoint back = decode_checkpoint(bytes);
  CHECK(back.metadata == ck.metadata);
  REQUIRE(back.networks.size() == 2);
  CHECK(back.networks[0] == ck.networks[0]);
  CHECK(back.networks[1] == ck.networks[1]);
  CHECK(encode_checkpoint(back) == bytes);
  CHECK(back.meta("step") == "42");
  CHECK(checkpoint_config(back) == parse_config("task=glyph_negative\nnoise_dim=12\n"));
}

TEST_CASE("checkpoint file round trip") {
  const auto dir = testing::scratch_dir("ckpt");
  const Checkpoint ck = sample_checkpoint();
  save_checkpoint(dir / "nested" / "a.agck", ck);
  const Checkpoint back = load_checkpoint(dir / "nested" / "a.agck");
  CHECK(back.network(NetworkRole::generator) == ck.network(NetworkRole::generator));
  CHECK(back.network(NetworkRole::discriminator) == ck.network(NetworkRole::discriminator));
  CHECK_THROWS_AS(load_checkpoint(dir / "missing.agck"), Error);
}

TEST_CASE("corrupt checkpoints are rejected") {
  const std::string bytes = encode_checkpoint(sample_checkpoint());
  std::string flipped = bytes;
  flipped[bytes.size() / 2] ^= 0x01;
  CHECK_THROWS_AS(decode_checkpoint(flipped), FormatError);
  CHECK_THROWS_AS(decode_checkpoint(bytes.substr(0, bytes.size() - 9)), FormatError);
  CHECK_THROWS_AS(decode_checkpoint("AGCK0" + bytes.substr(5)), FormatError);
  CHECK_THROWS_AS(decode_checkpoint(""), FormatError);
  CHECK_THROWS_AS(decode_checkpoint(bytes + "!"), FormatError);
}

TEST_CASE("config parse/serialize/parse is the identity") {
  const char* texts[] = {
      "task=negation_2d\n",
      "task=glyph_negative\n# comment\n\nobjective=lsgan\nlearning_rate=0.001\nseed=9\n",
      "task=multi_info_glyph\nclass_count=3\ntau=5\ngenerator_layers=dense:16:leaky_relu:label;"
      "dense:64:tanh:domain:reshape=1x8x8\n",
      "task=glyph_edge\nedge_threshold=0.75\njitter=0.25\nmax_shift=2\n",
      "task=idx_pair\nidx_a=/data/a.idx\nidx_b=/data/b.idx\n",
  };
  for (const char* t : texts) {
    const ExperimentConfig c = parse_config(t);
    const std::string s = serialize_config(c);
    CHECK(parse_config(s) == c);
    CHECK(serialize_config(parse_config(s)) == s);
  }
}

TEST_CASE("config defaults follow the task") {
  const ExperimentConfig toy = parse_config("task=negation_2d\n");
  CHECK(toy.train.objective == ObjectiveKind::lsgan);
  CHECK(toy.train.adam.learning_rate == 0.0005);
  CHECK(toy.train.adam.beta1 == 0.5);
  const ExperimentConfig glyph = parse_config("task=glyph_negative\n");
  CHECK(glyph.train.objective == ObjectiveKind::regular_gan);
  CHECK(glyph.train.adam.learning_rate == 0.0002);
  CHECK(glyph.train.batch_size == 64);
  CHECK(parse_config("task=multi_info_glyph\n").train.tau == 4);
}

TEST_CASE("config errors name the problem") {
  try {
    parse_config("task=negation_2d\nlearnig_rate=0.1\n");
    FAIL("misspelled key accepted");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("learnig_rate") != std::string::npos);
  }
  CHECK_THROWS_AS(parse_config("seed=1\n"), ConfigError);
  CHECK_THROWS_AS(parse_config("task=negation_2d\nseed=x\n"), ConfigError);
  CHECK_THROWS_AS(parse_config("task=negation_2d\nseed=1\nseed=2\n"), ConfigError);
  CHECK_THROWS_AS(parse_config("task=negation_2d\nno equals sign\n"), ConfigError);
  CHECK_THROWS_AS(parse_config("task=multi_info_glyph\ntau=1\n"), ConfigError);
  CHECK_THROWS_AS(parse_config("task=negation_2d\neval_samples=50\n"), ConfigError);
  CHECK_THROWS_AS(
      generator_spec(parse_config("task=negation_2d\ngenerator_layers=dense:8:leaky_relu:domain;dense:2:tanh\n")),
      SpecError);
}

TEST_CASE("shipped configs parse and build") {
  for (const char* name : {"negation_2d", "glyph_negative", "multi_info_glyph"}) {
    const auto path = std::filesystem::path(ALIGNGAN_CONFIG_DIR) / (std::string(name) + ".cfg");
    const ExperimentConfig c = parse_config(read_file(path));
    CHECK(std::string(task_name(c.task)) == name);
    CHECK_NOTHROW(build_generator(generator_spec(c), 0));
    CHECK_NOTHROW(build_discriminator(discriminator_spec(c), 0));
  }
}

TEST_CASE("graymap encoding") {
  CHECK(pixel_byte(-1.0) == 0);
  CHECK(pixel_byte(1.0) == 255);
  CHECK(pixel_byte(0.0) == 128);
  CHECK(pixel_byte(-3.0) == 0);
  Graymap g{3, 2, {0, 1, 2, 3, 4, 5}};
  const std::string bytes = encode_p5(g);
  CHECK(bytes.substr(0, 11) == "P5\n3 2\n255\n");
  const auto img = testing::read_p5(bytes);
  CHECK(img.width == 3);
  CHECK(img.height == 2);
  CHECK(img.pixels == g.pixels);
}

TEST_CASE("sample grid layout") {
  const Network gen = build_generator(default_generator_spec(8, 2), 3);
  const Graymap one = sample_grid(gen, 1, 1, 0);
  CHECK(one.width == 16);
  CHECK(one.height == 8);
  const std::string bytes = encode_p5(one);
  CHECK(bytes.size() == std::string("P5\n16 8\n255\n").size() + 128);

  const Graymap grid = sample_grid(gen, 2, 3, 7);
  const auto img = testing::read_p5(encode_p5(grid));
  CHECK(img.width == 3 * 16);
  CHECK(img.height == 2 * 8);
  CHECK(encode_p5(sample_grid(gen, 2, 3, 7)) == encode_p5(grid));

  // The first cell is G(z|A) beside G(z|B) for the first z.
  Rng rng(7);
  const Tensor z = sample_noise(6, 8, rng);
  const AlignedPairs p = aligned_pairs(gen, z, 0, 1);
  for (std::size_t r = 0; r < 8; ++r)
    for (std::size_t c = 0; c < 8; ++c) {
      CHECK(img.pixels[r * 48 + c] == pixel_byte(p.a[r * 8 + c]));
      CHECK(img.pixels[r * 48 + 8 + c] == pixel_byte(p.b[r * 8 + c]));
    }
}

TEST_CASE("text helpers") {
  CHECK(text::trim("  a b \t") == "a b");
  CHECK(text::format_double(0.1) == "0.1");
  CHECK(text::parse_double(text::format_double(1.0 / 3.0), "x") == 1.0 / 3.0);
  CHECK_THROWS_AS(text::parse_size("-1", "n"), ConfigError);
  CHECK(text::fnv1a64("") == 0xcbf29ce484222325ull);
}
