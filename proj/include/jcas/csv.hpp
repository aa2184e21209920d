#pragma once

#include <string>
#include <utility>
#include <vector>

namespace jcas {

/// Numeric result table rendered as CSV with '#'-prefixed metadata lines
/// (seed, config hash, format version) ahead of the header row.
struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<double>> rows;
  std::vector<std::pair<std::string, std::string>> meta;

  void add_meta(const std::string& key, const std::string& value) { meta.emplace_back(key, value); }
  std::string to_csv() const;
  void write(const std::string& path) const;
};

/// FNV-1a over a byte string; used for config hashes and draw hashes.
std::uint64_t fnv1a(const std::string& bytes);

std::string hex64(std::uint64_t v);

}  // namespace jcas
