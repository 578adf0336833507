#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "aligngan/conditioning.hpp"
#include "aligngan/tensor.hpp"

namespace aligngan {

/// Samples of one domain, stacked along axis 0, values in [-1,1].
struct Domain {
  std::string name;
  Tensor samples;
  std::vector<std::size_t> labels;  // empty when the domain is unlabeled
  std::size_t class_count = 0;

  std::size_t size() const { return samples.dim(0); }
  Shape sample_shape() const { return Shape(samples.shape().begin() + 1, samples.shape().end()); }
  bool labeled() const { return !labels.empty(); }
};

/// Unpaired domains: sample i of one domain has no relation to sample i of
/// another.
struct DomainDataset {
  std::vector<Domain> domains;
  std::string provenance;

  std::size_t domain_count() const { return domains.size(); }
  Shape sample_shape() const;
  ConditionVector domain_vector(std::size_t d) const;
  /// Throws ConfigError on: no domains, an empty domain, differing sample
  /// shapes, values outside [-1,1], or labels that do not match the samples.
  void validate() const;
};

struct LabeledImages {
  Tensor images;  // [n,1,8,8]
  std::vector<std::size_t> labels;
};

struct GlyphOptions {
  std::size_t n = 1;
  std::size_t class_count = 10;
  double jitter = 0.0;  // each pixel scaled by (1 - jitter*u), u ~ U[0,1)
  std::size_t max_shift = 1;
  std::uint64_t seed = 0;
};

/// Built-in 8x8 font for the digits 0-9; '#' is ink.
const std::array<std::array<std::string_view, 8>, 10>& glyph_font();
/// Glyph c as a [1,8,8] tensor, ink +1 and background -1.
Tensor glyph_bitmap(std::size_t c);

/// Labels uniform in [0, class_count), glyph shifted by up to max_shift
/// pixels each way (vacated pixels background) then jittered toward 0.
LabeledImages glyph_dataset(const GlyphOptions& options);

/// x -> -x.
Tensor make_negative(const Tensor& images);

/// Images [...,H,W]: +1 where the forward-difference gradient magnitude
/// sqrt(dx^2 + dy^2) exceeds `threshold`, -1 elsewhere. Differences past the
/// last row/column are taken as 0.
Tensor make_edge(const Tensor& images, double threshold);

enum class PairTransform { negation };

/// Domain A: Normal([0.5,0.5], 0.1^2 I) clipped to [-1,1]. Domain B:
/// independent draws of the same law, negated.
DomainDataset gaussian_pair_domains(std::size_t n, PairTransform transform, std::uint64_t seed);

enum class IdxType : std::uint8_t { u8 = 0x08, f32 = 0x0D };

/// u8 payloads map to x/127.5 - 1. Throws FormatError on bad magic (quoting
/// the bytes), unsupported type, or a payload shorter or longer than the
/// header declares.
Tensor parse_idx(std::string_view bytes);
/// Raw u8 values of a 1-D u8 file (label files).
std::vector<std::uint8_t> parse_idx_labels(std::string_view bytes);
/// Inverse of parse_idx. For u8 every value must sit on the x/127.5 - 1 grid.
std::string write_idx(const Tensor& t, IdxType type);
std::string write_idx_labels(std::span<const std::uint8_t> labels);

}  // namespace aligngan
