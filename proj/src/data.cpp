#include "aligngan/data.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdio>

#include "aligngan/error.hpp"
#include "aligngan/rng.hpp"

namespace aligngan {

namespace {

constexpr std::array<std::array<std::string_view, 8>, 10> kFont{{
    {"........", "..###...", ".#...#..", ".#...#..", ".#...#..", ".#...#..", "..###...", "........"},
    {"........", "...#....", "..##....", "...#....", "...#....", "...#....", "..###...", "........"},
    {"........", "..###...", ".#...#..", "....#...", "...#....", "..#.....", ".#####..", "........"},
    {"........", ".####...", ".....#..", "..###...", ".....#..", ".....#..", ".####...", "........"},
    {"........", "....#...", "...##...", "..#.#...", ".#####..", "....#...", "....#...", "........"},
    {"........", ".#####..", ".#......", ".####...", ".....#..", ".....#..", ".####...", "........"},
    {"........", "..###...", ".#......", ".####...", ".#...#..", ".#...#..", "..###...", "........"},
    {"........", ".#####..", ".....#..", "....#...", "...#....", "..#.....", "..#.....", "........"},
    {"........", "..###...", ".#...#..", "..###...", ".#...#..", ".#...#..", "..###...", "........"},
    {"........", "..###...", ".#...#..", ".#...#..", "..####..", ".....#..", "..###...", "........"},
}};

constexpr std::size_t kGlyph = 8;

}  // namespace

Shape DomainDataset::sample_shape() const {
  if (domains.empty()) throw ConfigError("dataset has no domains");
  return domains[0].sample_shape();
}

ConditionVector DomainDataset::domain_vector(std::size_t d) const {
  return ConditionVector::one_hot(ConditionKind::domain, domains.size(), d);
}

void DomainDataset::validate() const {
  if (domains.empty()) throw ConfigError("dataset has no domains");
  const Shape shape = domains[0].samples.rank() >= 2 ? domains[0].sample_shape() : Shape{};
  for (const auto& d : domains) {
    if (d.samples.rank() < 2 || d.size() == 0)
      throw ConfigError("domain '" + d.name + "' is empty");
    if (d.sample_shape() != shape)
      throw ConfigError("domain '" + d.name + "' has sample shape " + shape_str(d.sample_shape()) +
                        ", expected " + shape_str(shape));
    for (double v : d.samples.values())
      if (!(v >= -1.0 && v <= 1.0))
        throw ConfigError("domain '" + d.name + "' has a value outside [-1,1]");
    if (d.labeled()) {
      if (d.labels.size() != d.size())
        throw ConfigError("domain '" + d.name + "' has " + std::to_string(d.labels.size()) +
                          " labels for " + std::to_string(d.size()) + " samples");
      for (auto l : d.labels)
        if (l >= d.class_count)
          throw ConfigError("domain '" + d.name + "' has label " + std::to_string(l) +
                            " outside its " + std::to_string(d.class_count) + " classes");
    }
  }
}

const std::array<std::array<std::string_view, 8>, 10>& glyph_font() { return kFont; }

Tensor glyph_bitmap(std::size_t c) {
  if (c >= kFont.size()) throw ConfigError("no glyph for class " + std::to_string(c));
  Tensor t({1, kGlyph, kGlyph});
  for (std::size_t r = 0; r < kGlyph; ++r)
    for (std::size_t col = 0; col < kGlyph; ++col)
      t[r * kGlyph + col] = kFont[c][r][col] == '#' ? 1.0 : -1.0;
  return t;
}

LabeledImages glyph_dataset(const GlyphOptions& o) {
  if (o.n == 0) throw ConfigError("glyph_dataset: n must be at least 1");
  if (o.class_count < 1 || o.class_count > 10)
    throw ConfigError("glyph_dataset: class_count must be in 1..10, got " +
                      std::to_string(o.class_count));
  if (!(o.jitter >= 0.0 && o.jitter <= 1.0))
    throw ConfigError("glyph_dataset: jitter must be in [0,1]");
  if (o.max_shift >= kGlyph) throw ConfigError("glyph_dataset: max_shift must be below 8");
  Rng rng(o.seed);
  LabeledImages out{Tensor({o.n, 1, kGlyph, kGlyph}, -1.0), std::vector<std::size_t>(o.n)};
  const auto span = static_cast<std::int64_t>(o.max_shift);
  for (std::size_t i = 0; i < o.n; ++i) {
    const std::size_t c = rng.below(o.class_count);
    out.labels[i] = c;
    const auto dy = static_cast<std::int64_t>(rng.below(2 * o.max_shift + 1)) - span;
    const auto dx = static_cast<std::int64_t>(rng.below(2 * o.max_shift + 1)) - span;
    double* img = out.images.data() + i * kGlyph * kGlyph;
    for (std::int64_t r = 0; r < static_cast<std::int64_t>(kGlyph); ++r)
      for (std::int64_t col = 0; col < static_cast<std::int64_t>(kGlyph); ++col) {
        const std::int64_t sr = r - dy, sc = col - dx;
        if (sr < 0 || sc < 0 || sr >= static_cast<std::int64_t>(kGlyph) ||
            sc >= static_cast<std::int64_t>(kGlyph))
          continue;
        img[r * kGlyph + col] = kFont[c][sr][sc] == '#' ? 1.0 : -1.0;
      }
    for (std::size_t p = 0; p < kGlyph * kGlyph; ++p) img[p] *= 1.0 - o.jitter * rng.uniform();
  }
  return out;
}

Tensor make_negative(const Tensor& images) {
  Tensor out = images;
  for (double& v : out.values()) v = -v;
  return out;
}

Tensor make_edge(const Tensor& images, double threshold) {
  if (images.rank() < 2) throw ShapeError("make_edge: need [...,H,W], got " + shape_str(images.shape()));
  const std::size_t h = images.dim(images.rank() - 2), w = images.dim(images.rank() - 1);
  const std::size_t planes = images.size() / (h * w);
  Tensor out(images.shape(), -1.0);
  for (std::size_t p = 0; p < planes; ++p) {
    const double* x = images.data() + p * h * w;
    double* y = out.data() + p * h * w;
    for (std::size_t i = 0; i < h; ++i)
      for (std::size_t j = 0; j < w; ++j) {
        const double gx = j + 1 < w ? x[i * w + j + 1] - x[i * w + j] : 0.0;
        const double gy = i + 1 < h ? x[(i + 1) * w + j] - x[i * w + j] : 0.0;
        if (std::sqrt(gx * gx + gy * gy) > threshold) y[i * w + j] = 1.0;
      }
  }
  return out;
}

DomainDataset gaussian_pair_domains(std::size_t n, PairTransform transform, std::uint64_t seed) {
  if (n == 0) throw ConfigError("gaussian_pair_domains: n must be at least 1");
  (void)transform;  // negation is the only transform
  Rng rng(seed);
  auto draw = [&] {
    Tensor t({n, 2});
    for (double& v : t.values()) v = std::clamp(0.5 + 0.1 * rng.normal(), -1.0, 1.0);
    return t;
  };
  DomainDataset ds;
  ds.domains.push_back({"A", draw(), {}, 0});
  ds.domains.push_back({"B", make_negative(draw()), {}, 0});
  ds.provenance = "gaussian_pair_domains n=" + std::to_string(n) + " transform=negation seed=" +
                  std::to_string(seed);
  return ds;
}

// ---- IDX -------------------------------------------------------------------

namespace {

struct IdxHeader {
  IdxType type;
  Shape shape;
  std::size_t payload_offset;
};

std::string hex_bytes(std::string_view b) {
  std::string out;
  char buf[4];
  for (unsigned char c : b.substr(0, 4)) {
    std::snprintf(buf, sizeof buf, "%02x", c);
    if (!out.empty()) out += ' ';
    out += buf;
  }
  return out;
}

IdxHeader read_idx_header(std::string_view bytes) {
  if (bytes.size() < 4) throw FormatError("IDX: truncated header (" + std::to_string(bytes.size()) + " bytes)");
  const auto u = [&](std::size_t i) { return static_cast<unsigned char>(bytes[i]); };
  if (u(0) != 0 || u(1) != 0)
    throw FormatError("IDX: bad magic bytes [" + hex_bytes(bytes) + "], expected 00 00");
  IdxHeader h{};
  if (u(2) == 0x08)
    h.type = IdxType::u8;
  else if (u(2) == 0x0D)
    h.type = IdxType::f32;
  else
    throw FormatError("IDX: unsupported type byte in [" + hex_bytes(bytes) + "]");
  const std::size_t rank = u(3);
  if (rank == 0) throw FormatError("IDX: zero dimensions");
  if (bytes.size() < 4 + 4 * rank) throw FormatError("IDX: truncated dimension list");
  for (std::size_t d = 0; d < rank; ++d) {
    std::size_t e = 0;
    for (std::size_t k = 0; k < 4; ++k) e = (e << 8) | u(4 + 4 * d + k);
    if (e == 0) throw FormatError("IDX: zero extent in dimension " + std::to_string(d));
    h.shape.push_back(e);
  }
  h.payload_offset = 4 + 4 * rank;
  const std::size_t width = h.type == IdxType::u8 ? 1 : 4;
  const std::size_t need = shape_size(h.shape) * width;
  const std::size_t have = bytes.size() - h.payload_offset;
  if (have < need)
    throw FormatError("IDX: payload truncated, " + std::to_string(have) + " of " +
                      std::to_string(need) + " bytes");
  if (have > need)
    throw FormatError("IDX: " + std::to_string(have - need) + " trailing bytes after payload");
  return h;
}

void put_header(std::string& out, IdxType type, const Shape& shape) {
  if (shape.size() > 255) throw FormatError("IDX: too many dimensions");
  out.push_back(0);
  out.push_back(0);
  out.push_back(static_cast<char>(type));
  out.push_back(static_cast<char>(shape.size()));
  for (auto e : shape) {
    if (e > 0xffffffffu) throw FormatError("IDX: extent too large");
    for (int k = 3; k >= 0; --k) out.push_back(static_cast<char>((e >> (8 * k)) & 0xff));
  }
}

}  // namespace

Tensor parse_idx(std::string_view bytes) {
  const IdxHeader h = read_idx_header(bytes);
  Tensor t(h.shape);
  const auto* p = reinterpret_cast<const unsigned char*>(bytes.data()) + h.payload_offset;
  if (h.type == IdxType::u8) {
    for (std::size_t i = 0; i < t.size(); ++i) t[i] = p[i] / 127.5 - 1.0;
  } else {
    for (std::size_t i = 0; i < t.size(); ++i) {
      std::uint32_t bits = 0;
      for (std::size_t k = 0; k < 4; ++k) bits = (bits << 8) | p[4 * i + k];
      t[i] = static_cast<double>(std::bit_cast<float>(bits));
    }
  }
  return t;
}

std::vector<std::uint8_t> parse_idx_labels(std::string_view bytes) {
  const IdxHeader h = read_idx_header(bytes);
  if (h.type != IdxType::u8 || h.shape.size() != 1)
    throw FormatError("IDX: label file must be 1-D unsigned bytes, got " + shape_str(h.shape));
  const auto* p = reinterpret_cast<const unsigned char*>(bytes.data()) + h.payload_offset;
  return {p, p + h.shape[0]};
}

std::string write_idx(const Tensor& t, IdxType type) {
  std::string out;
  put_header(out, type, t.shape());
  for (std::size_t i = 0; i < t.size(); ++i) {
    const double v = t[i];
    if (type == IdxType::u8) {
      const double b = (v + 1.0) * 127.5;
      const long r = std::lround(b);
      if (!(r >= 0 && r <= 255) || std::abs(b - static_cast<double>(r)) > 1e-6)
        throw FormatError("IDX: value " + std::to_string(v) + " at element " + std::to_string(i) +
                          " is not on the u8 grid");
      out.push_back(static_cast<char>(r));
    } else {
      const auto f = static_cast<float>(v);
      if (static_cast<double>(f) != v && std::isfinite(v))
        throw FormatError("IDX: value at element " + std::to_string(i) + " is not exactly a float");
      const auto bits = std::bit_cast<std::uint32_t>(f);
      for (int k = 3; k >= 0; --k) out.push_back(static_cast<char>((bits >> (8 * k)) & 0xff));
    }
  }
  return out;
}

std::string write_idx_labels(std::span<const std::uint8_t> labels) {
  std::string out;
  put_header(out, IdxType::u8, {labels.size()});
  out.append(reinterpret_cast<const char*>(labels.data()), labels.size());
  return out;
}

}  // namespace aligngan
