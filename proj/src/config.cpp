#include "rbm/config.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include "rbm/errors.hpp"
#include "rbm/geometry.hpp"

namespace rbm {

namespace {

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return s.substr(first, last - first + 1);
}

std::optional<double> parse_plain(std::string_view s) {
  s = trim(s);
  if (s.empty()) return std::nullopt;
  if (s.front() == '+') s.remove_prefix(1);
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size()) return std::nullopt;
  return v;
}

std::vector<std::string_view> split(std::string_view s, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = s.find(sep, start);
    out.push_back(trim(s.substr(start, pos == std::string_view::npos ? s.npos : pos - start)));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

}  // namespace

std::optional<double> parse_number(std::string_view text) {
  std::string_view s = trim(text);
  double sign = 1.0;
  if (!s.empty() && (s.front() == '-' || s.front() == '+')) {
    const std::string_view rest = trim(s.substr(1));
    if (rest.starts_with("pi")) {
      sign = s.front() == '-' ? -1.0 : 1.0;
      s = rest;
    }
  }
  if (s == "pi") return sign * kPi;
  if (s.starts_with("pi")) {
    const std::string_view rest = trim(s.substr(2));
    if (!rest.starts_with("*")) return std::nullopt;
    const auto f = parse_plain(rest.substr(1));
    if (!f) return std::nullopt;
    return sign * kPi * *f;
  }
  if (s.ends_with("pi")) {
    const std::string_view head = trim(s.substr(0, s.size() - 2));
    if (!head.ends_with("*")) return std::nullopt;
    const auto f = parse_plain(head.substr(0, head.size() - 1));
    if (!f) return std::nullopt;
    return *f * kPi;
  }
  return parse_plain(s);
}

ConfigFile ConfigFile::parse(std::string_view text, std::string source) {
  ConfigFile cfg;
  cfg.source_ = std::move(source);
  std::string section;
  int line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const auto end = text.find('\n', pos);
    std::string_view line = text.substr(pos, end == std::string_view::npos ? text.npos : end - pos);
    pos = end == std::string_view::npos ? text.size() + 1 : end + 1;
    ++line_no;
    if (line_no == 1 && line.starts_with("\xEF\xBB\xBF")) line.remove_prefix(3);
    if (const auto c = line.find_first_of("#;"); c != std::string_view::npos) line = line.substr(0, c);
    line = trim(line);
    if (line.empty()) continue;

    auto bad = [&](const std::string& what) {
      std::ostringstream msg;
      msg << cfg.source_ << ":" << line_no << ": " << what;
      throw ConfigError(msg.str());
    };
    if (line.front() == '[') {
      if (line.back() != ']') bad("unterminated section header");
      section = std::string(trim(line.substr(1, line.size() - 2)));
      if (section.empty()) bad("empty section name");
      if (cfg.section_lines_.count(section)) bad("duplicate section [" + section + "]");
      cfg.section_lines_[section] = line_no;
      cfg.sections_[section];
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) bad("expected 'key = value'");
    const std::string key(trim(line.substr(0, eq)));
    if (key.empty()) bad("missing key before '='");
    auto& entries = cfg.sections_[section];
    if (entries.count(key)) {
      bad("duplicate key '" + key + "'" + (section.empty() ? "" : " in [" + section + "]"));
    }
    entries[key] = Entry{std::string(trim(line.substr(eq + 1))), line_no, false};
  }
  return cfg;
}

ConfigFile ConfigFile::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse(ss.str(), path);
}

bool ConfigFile::has_section(const std::string& section) const {
  return sections_.count(section) != 0;
}

bool ConfigFile::has(const std::string& section, const std::string& key) const {
  return find(section, key) != nullptr;
}

const ConfigFile::Entry* ConfigFile::find(const std::string& section, const std::string& key) const {
  const auto s = sections_.find(section);
  if (s == sections_.end()) return nullptr;
  const auto e = s->second.find(key);
  if (e == s->second.end()) return nullptr;
  e->second.used = true;
  return &e->second;
}

void ConfigFile::fail(const std::string& section, const std::string& key,
                      const std::string& what) const {
  std::ostringstream msg;
  msg << source_;
  if (const auto s = sections_.find(section); s != sections_.end()) {
    if (const auto e = s->second.find(key); e != s->second.end()) msg << ":" << e->second.line;
  }
  msg << ": [" << section << "] " << key << ": " << what;
  throw ConfigError(msg.str());
}

std::string ConfigFile::get_string(const std::string& section, const std::string& key,
                                   const std::string& fallback) const {
  const Entry* e = find(section, key);
  return e ? e->value : fallback;
}

double ConfigFile::get_number(const std::string& section, const std::string& key,
                              double fallback) const {
  const Entry* e = find(section, key);
  if (!e) return fallback;
  const auto v = parse_number(e->value);
  if (!v) fail(section, key, "expected a number, got '" + e->value + "'");
  return *v;
}

std::uint64_t ConfigFile::get_unsigned(const std::string& section, const std::string& key,
                                       std::uint64_t fallback) const {
  const Entry* e = find(section, key);
  if (!e) return fallback;
  std::uint64_t v = 0;
  const std::string& s = e->value;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size()) {
    // Allow "1e4"-style integers.
    const auto d = parse_plain(s);
    if (d && *d >= 0.0 && *d < 1.8e19 && *d == static_cast<double>(static_cast<std::uint64_t>(*d))) {
      return static_cast<std::uint64_t>(*d);
    }
    fail(section, key, "expected a non-negative integer, got '" + s + "'");
  }
  return v;
}

bool ConfigFile::get_bool(const std::string& section, const std::string& key, bool fallback) const {
  const Entry* e = find(section, key);
  if (!e) return fallback;
  const std::string& s = e->value;
  if (s == "true" || s == "yes" || s == "on" || s == "1") return true;
  if (s == "false" || s == "no" || s == "off" || s == "0") return false;
  fail(section, key, "expected true or false, got '" + s + "'");
}

Vec2 ConfigFile::get_vec2(const std::string& section, const std::string& key,
                          const Vec2& fallback) const {
  const Entry* e = find(section, key);
  if (!e) return fallback;
  const auto parts = split(e->value, ',');
  if (parts.size() != 2) fail(section, key, "expected two comma-separated numbers, got '" + e->value + "'");
  const auto x = parse_number(parts[0]);
  const auto y = parse_number(parts[1]);
  if (!x || !y) fail(section, key, "expected two comma-separated numbers, got '" + e->value + "'");
  return {*x, *y};
}

std::vector<double> ConfigFile::get_numbers(const std::string& section, const std::string& key,
                                            const std::vector<double>& fallback) const {
  const Entry* e = find(section, key);
  if (!e) return fallback;
  std::vector<double> out;
  for (auto part : split(e->value, ',')) {
    const auto v = parse_number(part);
    if (!v) fail(section, key, "expected a comma-separated list of numbers, got '" + e->value + "'");
    out.push_back(*v);
  }
  return out;
}

std::vector<int> ConfigFile::get_ints(const std::string& section, const std::string& key,
                                      const std::vector<int>& fallback) const {
  const Entry* e = find(section, key);
  if (!e) return fallback;
  auto to_int = [&](std::string_view s) {
    int v = 0;
    s = trim(s);
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || ptr != s.data() + s.size() || s.empty()) {
      fail(section, key, "expected integers or a range 'a..b', got '" + e->value + "'");
    }
    return v;
  };
  std::vector<int> out;
  if (const auto dots = e->value.find(".."); dots != std::string::npos) {
    const std::string_view all = e->value;
    const int lo = to_int(all.substr(0, dots));
    const int hi = to_int(all.substr(dots + 2));
    if (hi < lo) fail(section, key, "empty range '" + e->value + "'");
    for (int i = lo; i <= hi; ++i) out.push_back(i);
    return out;
  }
  for (auto part : split(e->value, ',')) out.push_back(to_int(part));
  return out;
}

void ConfigFile::reject_unused() const {
  for (const auto& [section, entries] : sections_) {
    for (const auto& [key, entry] : entries) {
      if (!entry.used) fail(section, key, "unknown setting");
    }
  }
}

}  // namespace rbm
