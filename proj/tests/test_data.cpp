#include <cmath>
#include <cstdint>
#include <string>

#include "doctest.h"
#include "helpers.hpp"

#include "aligngan/data.hpp"
#include "aligngan/error.hpp"

using namespace aligngan;

namespace {

// 8x8 image, -1 left of `col` and +1 from `col` on (vertical step), or the
// same along rows when `horizontal`.
Tensor step_image(std::size_t at, bool horizontal) {
  Tensor t({1, 8, 8}, -1.0);
  for (std::size_t i = 0; i < 8; ++i)
    for (std::size_t j = 0; j < 8; ++j)
      if ((horizontal ? i : j) >= at) t[i * 8 + j] = 1.0;
  return t;
}

std::string header(std::initializer_list<std::uint8_t> magic, std::initializer_list<std::uint32_t> dims) {
  std::string out(magic.begin(), magic.end());
  for (std::uint32_t d : dims)
    for (int s = 24; s >= 0; s -= 8) out += static_cast<char>((d >> s) & 0xff);
  return out;
}

}  // namespace

TEST_CASE("glyph dataset is a pure function of its options") {
  GlyphOptions o;
  o.n = 100;
  o.jitter = 0.3;
  o.seed = 4;
  const LabeledImages a = glyph_dataset(o), b = glyph_dataset(o);
  CHECK(a.images == b.images);
  CHECK(a.labels == b.labels);
  CHECK(a.images.shape() == Shape{100, 1, 8, 8});
  for (auto l : a.labels) CHECK(l < 10);
  for (double v : a.images.values()) CHECK(std::abs(v) <= 1.0);
  o.seed = 5;
  CHECK_FALSE(glyph_dataset(o).images == a.images);
}

TEST_CASE("without jitter or shift every image is its class bitmap") {
  GlyphOptions o;
  o.n = 50;
  o.max_shift = 0;
  o.class_count = 4;
  const LabeledImages d = glyph_dataset(o);
  for (std::size_t i = 0; i < o.n; ++i) {
    const Tensor bitmap = glyph_bitmap(d.labels[i]);
    for (std::size_t p = 0; p < 64; ++p) CHECK(d.images[i * 64 + p] == bitmap[p]);
  }
}

TEST_CASE("glyph dataset rejects bad options") {
  GlyphOptions o;
  o.class_count = 0;
  CHECK_THROWS_AS(glyph_dataset(o), ConfigError);
  o.class_count = 11;
  CHECK_THROWS_AS(glyph_dataset(o), ConfigError);
  o.class_count = 3;
  o.jitter = 1.5;
  CHECK_THROWS_AS(glyph_dataset(o), ConfigError);
}

TEST_CASE("the font has ten distinct 8x8 glyphs") {
  const auto& font = glyph_font();
  for (std::size_t a = 0; a < 10; ++a) {
    for (auto row : font[a]) CHECK(row.size() == 8);
    for (std::size_t b = a + 1; b < 10; ++b) CHECK_FALSE(glyph_bitmap(a) == glyph_bitmap(b));
  }
}

TEST_CASE("negation") {
  CHECK(make_negative(Tensor({2, 2}, 0.0)) == Tensor({2, 2}, 0.0));
  CHECK(make_negative(Tensor::from({0.75}))[0] == -0.75);
  Rng rng(1);
  const Tensor x = testing::random_tensor({3, 1, 8, 8}, rng);
  CHECK(make_negative(make_negative(x)) == x);
}

TEST_CASE("edge map of simple images") {
  CHECK(make_edge(Tensor({1, 8, 8}, 0.3), 0.5) == Tensor({1, 8, 8}, -1.0));
  const Tensor e = make_edge(step_image(4, false), 0.5);
  for (std::size_t i = 0; i < 8; ++i)
    for (std::size_t j = 0; j < 8; ++j) CHECK(e[i * 8 + j] == (j == 3 ? 1.0 : -1.0));
  const Tensor glyph_edges = make_edge(glyph_dataset({20, 10, 0.4, 1, 2}).images, 0.5);
  for (double v : glyph_edges.values())
    CHECK((v == 1.0 || v == -1.0));
}

TEST_CASE("edge map applied to its own output, enumerated over step patterns") {
  // Constant images are fixed points. A single-line edge map is not: the
  // forward difference fires on both sides of the line, so a second pass
  // widens it to two lines.
  for (double c : {-1.0, 1.0}) {
    const Tensor flat({1, 8, 8}, c);
    CHECK(make_edge(make_edge(flat, 0.5), 0.5) == make_edge(flat, 0.5));
  }
  for (bool horizontal : {false, true})
    for (std::size_t at = 1; at < 8; ++at) {
      const Tensor once = make_edge(step_image(at, horizontal), 0.5);
      const Tensor twice = make_edge(once, 0.5);
      for (std::size_t i = 0; i < 8; ++i)
        for (std::size_t j = 0; j < 8; ++j) {
          const std::size_t pos = horizontal ? i : j;
          CHECK(once[i * 8 + j] == (pos == at - 1 ? 1.0 : -1.0));
          const bool expect = pos == at - 1 || (at >= 2 && pos == at - 2);
          CHECK(twice[i * 8 + j] == (expect ? 1.0 : -1.0));
        }
    }
}

TEST_CASE("gaussian pair domains") {
  const std::size_t n = 10000;
  const DomainDataset ds = gaussian_pair_domains(n, PairTransform::negation, 3);
  REQUIRE(ds.domain_count() == 2);
  ds.validate();
  const Tensor& a = ds.domains[0].samples;
  const Tensor& b = ds.domains[1].samples;
  CHECK(a.shape() == Shape{n, 2});
  const double bound = 3 * 0.1 / std::sqrt(double(n));
  for (std::size_t k = 0; k < 2; ++k) {
    double ma = 0, mb = 0;
    for (std::size_t i = 0; i < n; ++i) ma += a[i * 2 + k], mb += b[i * 2 + k];
    CHECK(std::abs(ma / n - 0.5) < bound);
    CHECK(std::abs(mb / n + 0.5) < bound);
  }
  // Index-aligned samples are independent draws.
  double sa = 0, sb = 0, saa = 0, sbb = 0, sab = 0;
  for (std::size_t i = 0; i < 2 * n; ++i) {
    sa += a[i], sb += b[i], saa += a[i] * a[i], sbb += b[i] * b[i], sab += a[i] * b[i];
  }
  const double m = 2.0 * n;
  const double r = (sab / m - sa / m * sb / m) /
                   std::sqrt((saa / m - sa * sa / (m * m)) * (sbb / m - sb * sb / (m * m)));
  // The two coordinates share a mean, so pooling them adds no correlation.
  CHECK(std::abs(r) < 0.05);
  CHECK(gaussian_pair_domains(n, PairTransform::negation, 3).domains[1].samples == b);
}

TEST_CASE("dataset validation") {
  DomainDataset ds = gaussian_pair_domains(10, PairTransform::negation, 0);
  ds.domains[0].samples[3] = 1.5;
  CHECK_THROWS_AS(ds.validate(), ConfigError);
  ds = gaussian_pair_domains(10, PairTransform::negation, 0);
  ds.domains[1].labels = {0, 1};
  CHECK_THROWS_AS(ds.validate(), ConfigError);
  CHECK_THROWS_AS(DomainDataset{}.validate(), ConfigError);
}

TEST_CASE("IDX parsing") {
  std::string bytes = header({0, 0, 8, 3}, {2, 3, 4});
  for (int i = 0; i < 24; ++i) bytes += static_cast<char>(i == 0 ? 0 : (i == 1 ? 255 : i));
  const Tensor t = parse_idx(bytes);
  CHECK(t.shape() == Shape{2, 3, 4});
  CHECK(t[0] == -1.0);
  CHECK(t[1] == 1.0);
  CHECK(write_idx(t, IdxType::u8) == bytes);

  try {
    parse_idx("\x12\x34\x08\x01" + std::string(4, '\0'));
    FAIL("bad magic accepted");
  } catch (const FormatError& e) {
    CHECK(std::string(e.what()).find("12 34 08 01") != std::string::npos);
  }
  CHECK_THROWS_AS(parse_idx(bytes.substr(0, bytes.size() - 1)), FormatError);
  CHECK_THROWS_AS(parse_idx(bytes + "x"), FormatError);
  CHECK_THROWS_AS(parse_idx(header({0, 0, 9, 1}, {1}) + "a"), FormatError);
}

TEST_CASE("IDX round trips over random shapes and payloads") {
  Rng rng(21);
  for (int trial = 0; trial < 40; ++trial) {
    Shape shape(1 + rng.below(4));
    for (auto& d : shape) d = 1 + rng.below(5);
    Tensor u8(shape), f32(shape);
    for (std::size_t i = 0; i < u8.size(); ++i) {
      u8[i] = double(rng.below(256)) / 127.5 - 1.0;
      f32[i] = double(static_cast<float>(rng.uniform(-1.0, 1.0)));
    }
    CHECK(parse_idx(write_idx(u8, IdxType::u8)) == u8);
    CHECK(parse_idx(write_idx(f32, IdxType::f32)) == f32);
    const std::string bytes = write_idx(f32, IdxType::f32);
    CHECK(write_idx(parse_idx(bytes), IdxType::f32) == bytes);
  }
  CHECK_THROWS_AS(write_idx(Tensor::from({0.1}), IdxType::u8), FormatError);
  CHECK_THROWS_AS(write_idx(Tensor::from({0.1}), IdxType::f32), FormatError);
}

TEST_CASE("IDX label files") {
  const std::vector<std::uint8_t> labels{3, 0, 9, 9, 1};
  CHECK(parse_idx_labels(write_idx_labels(labels)) == labels);
  CHECK_THROWS_AS(parse_idx_labels(write_idx(Tensor({2, 2}, -1.0), IdxType::u8)), FormatError);
}
