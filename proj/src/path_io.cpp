#include "rbm/path_io.hpp"

#include <bit>
#include <charconv>
#include <cstring>

#include <json.hpp>

#include "rbm/errors.hpp"

namespace rbm {

namespace {

void put_u32(std::ostream& out, std::uint32_t v) {
  char b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xffu);
  out.write(b, 4);
}

void put_f64(std::ostream& out, double d) {
  const auto v = std::bit_cast<std::uint64_t>(d);
  char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xffu);
  out.write(b, 8);
}

std::uint32_t get_u32(const unsigned char* p) {
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(p[i]) << (8 * i);
  return v;
}

double get_f64(const unsigned char* p) {
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(p[i]) << (8 * i);
  return std::bit_cast<double>(v);
}

void append_number(std::string& s, double v) {
  char buf[32];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  s.append(buf, ptr);
}

void append_number(std::string& s, std::uint64_t v) {
  char buf[24];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  s.append(buf, ptr);
}

}  // namespace

std::string_view to_string(PathFormat f) {
  switch (f) {
    case PathFormat::csv: return "csv";
    case PathFormat::jsonl: return "jsonl";
    case PathFormat::bin: return "bin";
  }
  return "unknown";
}

PathFormat parse_path_format(std::string_view s) {
  if (s == "csv") return PathFormat::csv;
  if (s == "jsonl") return PathFormat::jsonl;
  if (s == "bin" || s == "packed-binary") return PathFormat::bin;
  throw ConfigError("unknown path format '" + std::string(s) + "' (valid: csv, jsonl, bin)");
}

PathWriter::PathWriter(const std::string& target, PathFormat format)
    : out_(target, std::ios::binary | std::ios::trunc), format_(format), target_(target) {
  if (!out_) throw std::runtime_error("cannot open '" + target + "' for writing");
  if (format_ == PathFormat::csv) {
    std::string header;
    for (std::size_t i = 0; i < kPathColumns.size(); ++i) {
      if (i) header += ',';
      header += kPathColumns[i];
    }
    header += '\n';
    out_ << header;
  } else if (format_ == PathFormat::bin) {
    out_.write(kPathMagic.data(), kPathMagic.size());
    put_u32(out_, kPathFormatVersion);
    put_u32(out_, static_cast<std::uint32_t>(kPathColumns.size()));
  }
}

void PathWriter::write(const PathSample& p) {
  const std::size_t n = p.size();
  if (format_ == PathFormat::csv) {
    std::string buf;
    for (std::size_t k = 0; k < n; ++k) {
      append_number(buf, p.path_index);
      for (double v : {p.times[k], p.X[k].x, p.X[k].y, p.Z[k].x, p.Z[k].y, p.eta[k].x, p.eta[k].y}) {
        buf += ',';
        append_number(buf, v);
      }
      buf += p.absorbed_at(k) ? ",1\n" : ",0\n";
    }
    out_ << buf;
  } else if (format_ == PathFormat::jsonl) {
    nlohmann::json j;
    j["path_index"] = p.path_index;
    j["mode"] = to_string(p.mode);
    j["t"] = p.times;
    auto pairs = [](const std::vector<Vec2>& v) {
      nlohmann::json a = nlohmann::json::array();
      for (const auto& q : v) a.push_back({q.x, q.y});
      return a;
    };
    j["X"] = pairs(p.X);
    j["Z"] = pairs(p.Z);
    j["eta"] = pairs(p.eta);
    std::vector<int> absorbed(n);
    for (std::size_t k = 0; k < n; ++k) absorbed[k] = p.absorbed_at(k) ? 1 : 0;
    j["absorbed"] = absorbed;
    j["tau0_index"] = p.tau0_index ? nlohmann::json(*p.tau0_index) : nlohmann::json(nullptr);
    j["zeta_T"] = p.zeta_T;
    out_ << j.dump() << '\n';
  } else {
    for (std::size_t k = 0; k < n; ++k) {
      put_f64(out_, static_cast<double>(p.path_index));
      for (double v : {p.times[k], p.X[k].x, p.X[k].y, p.Z[k].x, p.Z[k].y, p.eta[k].x, p.eta[k].y}) {
        put_f64(out_, v);
      }
      put_f64(out_, p.absorbed_at(k) ? 1.0 : 0.0);
    }
  }
  if (!out_) throw std::runtime_error("write to '" + target_ + "' failed");
}

void PathWriter::close() {
  out_.close();
  if (!out_) throw std::runtime_error("closing '" + target_ + "' failed");
}

void export_paths(std::span<const PathSample> paths, PathFormat format, const std::string& target) {
  PathWriter w(target, format);
  for (const auto& p : paths) w.write(p);
  w.close();
}

std::vector<PathSample> read_packed_paths(const std::string& source) {
  std::ifstream in(source, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open '" + source + "'");
  const std::vector<unsigned char> data((std::istreambuf_iterator<char>(in)),
                                        std::istreambuf_iterator<char>());
  if (data.size() < 16 || std::memcmp(data.data(), kPathMagic.data(), kPathMagic.size()) != 0) {
    throw std::runtime_error("'" + source + "' is not a packed path file");
  }
  if (get_u32(data.data() + 8) != kPathFormatVersion) {
    throw std::runtime_error("'" + source + "': unsupported packed path version");
  }
  const std::uint32_t ncols = get_u32(data.data() + 12);
  if (ncols != kPathColumns.size()) throw std::runtime_error("'" + source + "': unexpected column count");
  const std::size_t row_bytes = 8 * ncols;
  if ((data.size() - 16) % row_bytes != 0) throw std::runtime_error("'" + source + "': truncated row");

  std::vector<PathSample> out;
  for (std::size_t off = 16; off < data.size(); off += row_bytes) {
    double c[9];
    for (std::size_t i = 0; i < 9; ++i) c[i] = get_f64(data.data() + off + 8 * i);
    const auto index = static_cast<std::uint64_t>(c[0]);
    if (out.empty() || out.back().path_index != index) {
      out.emplace_back();
      out.back().path_index = index;
    }
    PathSample& p = out.back();
    const Vec2 x{c[2], c[3]};
    const Vec2 z{c[4], c[5]};
    if (c[8] != 0.0 && !p.tau0_index) {
      p.tau0_index = p.size();
      p.mode = Mode::absorbed;
    }
    p.times.push_back(c[1]);
    p.X.push_back(x);
    p.Z.push_back(z);
    p.Y.push_back(z - x);
    p.eta.push_back({c[6], c[7]});
  }
  return out;
}

}  // namespace rbm
