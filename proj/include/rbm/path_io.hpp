#pragma once

#include <array>
#include <cstdint>
#include <fstream>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "rbm/simulator.hpp"

namespace rbm {

enum class PathFormat { csv, jsonl, bin };

std::string_view to_string(PathFormat f);
// Accepts "csv", "jsonl", "bin" (also "packed-binary"); throws ConfigError.
PathFormat parse_path_format(std::string_view s);

// Column order shared by the CSV and packed-binary layouts.
inline constexpr std::array<const char*, 9> kPathColumns = {
    "path_index", "t", "X1", "X2", "Z1", "Z2", "eta1", "eta2", "absorbed"};

// Packed-binary header: 8-byte magic, u32 version, u32 column count, all
// little-endian, followed by rows of little-endian f64 values.
inline constexpr std::array<char, 8> kPathMagic = {'R', 'B', 'M', 'W', 'P', 'A', 'T', 'H'};
inline constexpr std::uint32_t kPathFormatVersion = 1;

// Streams paths to one file. The CSV header and the binary header are
// written on construction, so an empty export is still a valid file.
class PathWriter {
 public:
  PathWriter(const std::string& target, PathFormat format);
  void write(const PathSample& path);
  void close();

 private:
  std::ofstream out_;
  PathFormat format_;
  std::string target_;
};

void export_paths(std::span<const PathSample> paths, PathFormat format, const std::string& target);

// Reads a packed-binary file back. Paths are grouped by path_index in file
// order; Y is recomputed as Z - X, free_push is not stored.
std::vector<PathSample> read_packed_paths(const std::string& source);

}  // namespace rbm
