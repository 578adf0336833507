#pragma once

#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "aligngan/network.hpp"

namespace aligngan {

/// Trained networks plus free-form metadata (step, task, ...).
///
/// File layout, all integers little-endian:
///   "AGCK1"
///   u32 metadata entries, each: u32 len, key bytes, u32 len, value bytes
///   u32 network count, each:
///     u32 len, spec text (serialize_spec)
///     u64 spec digest (spec_digest of that text)
///     u32 parameter count, each:
///       u32 len, name bytes, u32 rank, u64 extents[rank], f64 values[]
///   u64 FNV-1a of every preceding byte
struct Checkpoint {
  std::vector<std::pair<std::string, std::string>> metadata;
  std::vector<Network> networks;

  /// First network with the given role; throws FormatError if absent.
  const Network& network(NetworkRole role) const;
  /// Value of a metadata key, or `fallback`.
  std::string meta(std::string_view key, std::string fallback = {}) const;
};

std::string encode_checkpoint(const Checkpoint& ckpt);
/// Throws FormatError on a bad magic, digest or checksum, or truncation.
Checkpoint decode_checkpoint(std::string_view bytes);

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& path);

std::string read_file(const std::filesystem::path& path);
/// Writes via a temporary sibling and rename.
void write_file(const std::filesystem::path& path, std::string_view bytes);

}  // namespace aligngan
