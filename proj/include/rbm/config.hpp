#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "rbm/vec2.hpp"

namespace rbm {

// Flat "key = value" text grouped under [section] headers. '#' and ';'
// start comments. Every value remembers its source line for diagnostics.
class ConfigFile {
 public:
  struct Entry {
    std::string value;
    int line = 0;
    mutable bool used = false;
  };

  static ConfigFile parse(std::string_view text, std::string source = "<config>");
  static ConfigFile load(const std::string& path);

  const std::string& source() const { return source_; }
  bool has_section(const std::string& section) const;
  bool has(const std::string& section, const std::string& key) const;

  // Typed accessors. Missing keys return the fallback; malformed values throw
  // ConfigError naming file, line, section and key.
  std::string get_string(const std::string& section, const std::string& key,
                         const std::string& fallback = {}) const;
  double get_number(const std::string& section, const std::string& key, double fallback) const;
  std::uint64_t get_unsigned(const std::string& section, const std::string& key,
                             std::uint64_t fallback) const;
  bool get_bool(const std::string& section, const std::string& key, bool fallback) const;
  Vec2 get_vec2(const std::string& section, const std::string& key, const Vec2& fallback) const;
  std::vector<double> get_numbers(const std::string& section, const std::string& key,
                                  const std::vector<double>& fallback) const;
  // Accepts "6..14" as well as comma-separated integers.
  std::vector<int> get_ints(const std::string& section, const std::string& key,
                            const std::vector<int>& fallback) const;

  // Throws ConfigError for keys that were never read, i.e. misspelled or
  // unsupported settings.
  void reject_unused() const;

  [[noreturn]] void fail(const std::string& section, const std::string& key,
                         const std::string& what) const;

 private:
  const Entry* find(const std::string& section, const std::string& key) const;

  std::string source_;
  std::map<std::string, std::map<std::string, Entry>> sections_;
  std::map<std::string, int> section_lines_;
};

// Parses a real number, accepting "pi", "pi*<x>", "-pi*<x>" and "<x>*pi".
// Returns nullopt on malformed input.
std::optional<double> parse_number(std::string_view text);

}  // namespace rbm
