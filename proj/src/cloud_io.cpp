#include "graspkit/cloud_io.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <string_view>
#include <vector>

#include "graspkit/error.hpp"

namespace graspkit {
namespace {

[[noreturn]] void fail(std::size_t line, const std::string& what) {
  throw Error(Errc::kParseError, "line " + std::to_string(line) + ": " + what);
}

std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

bool parse_number(std::string_view tok, double& v) {
  tok = trim(tok);
  if (!tok.empty() && tok.front() == '+') tok.remove_prefix(1);
  const auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
  return ec == std::errc() && ptr == tok.data() + tok.size() && !tok.empty();
}

std::vector<std::string_view> split(std::string_view s, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = s.find(sep, start);
    out.push_back(s.substr(start, pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

std::vector<std::string_view> split_ws(std::string_view s) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < s.size()) {
    while (i < s.size() && (s[i] == ' ' || s[i] == '\t' || s[i] == '\r')) ++i;
    const std::size_t b = i;
    while (i < s.size() && s[i] != ' ' && s[i] != '\t' && s[i] != '\r') ++i;
    if (i > b) out.push_back(s.substr(b, i - b));
  }
  return out;
}

std::int32_t to_label(double v, std::size_t line) {
  if (v != std::floor(v) || v < INT32_MIN || v > INT32_MAX) fail(line, "label is not an integer");
  return static_cast<std::int32_t>(v);
}

void check_point(const Point3& p, std::size_t line) {
  if (!p.allFinite()) fail(line, "non-finite coordinate");
}

}  // namespace

std::string format_double(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

PointCloud read_ply(std::istream& in) {
  std::string line;
  std::size_t lineno = 0;
  auto next = [&]() -> bool {
    if (!std::getline(in, line)) return false;
    ++lineno;
    return true;
  };
  if (!next() || trim(line) != "ply") fail(1, "missing 'ply' magic");
  long long vertex_count = -1;
  bool in_vertex = false;
  std::vector<std::string> props;
  bool format_seen = false;
  while (true) {
    if (!next()) fail(lineno, "unterminated header");
    const auto toks = split_ws(trim(line));
    if (toks.empty()) continue;
    if (toks[0] == "end_header") break;
    if (toks[0] == "comment" || toks[0] == "obj_info") continue;
    if (toks[0] == "format") {
      if (toks.size() < 2 || toks[1] != "ascii") fail(lineno, "only ascii PLY is supported");
      format_seen = true;
    } else if (toks[0] == "element") {
      if (toks.size() != 3) fail(lineno, "malformed element line");
      in_vertex = toks[1] == "vertex";
      if (in_vertex) {
        double c = 0;
        if (!parse_number(toks[2], c) || c < 0 || c != std::floor(c)) {
          fail(lineno, "bad vertex count");
        }
        vertex_count = static_cast<long long>(c);
      }
    } else if (toks[0] == "property") {
      if (!in_vertex) continue;
      if (toks.size() != 3) fail(lineno, "unsupported vertex property declaration");
      props.emplace_back(toks[2]);
    } else {
      fail(lineno, "unexpected header keyword '" + std::string(toks[0]) + "'");
    }
  }
  if (!format_seen) fail(lineno, "missing format line");
  if (vertex_count < 0) fail(lineno, "missing vertex element");
  auto col = [&](const char* name) -> int {
    const auto it = std::find(props.begin(), props.end(), name);
    return it == props.end() ? -1 : static_cast<int>(it - props.begin());
  };
  const int cx = col("x"), cy = col("y"), cz = col("z"), cl = col("label");
  if (cx < 0 || cy < 0 || cz < 0) fail(lineno, "vertex element lacks x/y/z");

  PointCloud cloud;
  cloud.points.reserve(static_cast<std::size_t>(vertex_count));
  for (long long v = 0; v < vertex_count; ++v) {
    if (!next()) fail(lineno + 1, "expected " + std::to_string(vertex_count) + " vertices");
    const auto toks = split_ws(trim(line));
    if (toks.size() != props.size()) {
      fail(lineno, "expected " + std::to_string(props.size()) + " values, got " +
                       std::to_string(toks.size()));
    }
    double vals[4] = {};
    const int cols[4] = {cx, cy, cz, cl};
    for (int k = 0; k < 4; ++k) {
      if (cols[k] < 0) continue;
      if (!parse_number(toks[cols[k]], vals[k])) {
        fail(lineno, "bad number '" + std::string(toks[cols[k]]) + "'");
      }
    }
    cloud.points.emplace_back(vals[0], vals[1], vals[2]);
    check_point(cloud.points.back(), lineno);
    if (cl >= 0) cloud.labels.push_back(to_label(vals[3], lineno));
  }
  return cloud;
}

void write_ply(std::ostream& out, const PointCloud& cloud) {
  out << "ply\nformat ascii 1.0\nelement vertex " << cloud.size() << "\n"
      << "property double x\nproperty double y\nproperty double z\n";
  if (cloud.has_labels()) out << "property int label\n";
  out << "end_header\n";
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    const auto& p = cloud.points[i];
    out << format_double(p.x()) << ' ' << format_double(p.y()) << ' ' << format_double(p.z());
    if (cloud.has_labels()) out << ' ' << cloud.labels[i];
    out << '\n';
  }
}

PointCloud read_csv(std::istream& in) {
  PointCloud cloud;
  std::string line;
  std::size_t lineno = 0;
  int cols[4] = {0, 1, 2, -1};
  int width = -1;
  bool first = true;
  while (std::getline(in, line)) {
    ++lineno;
    const auto body = trim(line);
    if (body.empty()) continue;
    const auto toks = split(body, ',');
    if (first) {
      first = false;
      double probe = 0;
      if (!parse_number(toks[0], probe)) {
        cols[0] = cols[1] = cols[2] = cols[3] = -1;
        for (std::size_t k = 0; k < toks.size(); ++k) {
          const auto name = trim(toks[k]);
          if (name == "x") cols[0] = static_cast<int>(k);
          if (name == "y") cols[1] = static_cast<int>(k);
          if (name == "z") cols[2] = static_cast<int>(k);
          if (name == "label") cols[3] = static_cast<int>(k);
        }
        if (cols[0] < 0 || cols[1] < 0 || cols[2] < 0) fail(lineno, "header lacks x/y/z");
        width = static_cast<int>(toks.size());
        continue;
      }
      if (toks.size() != 3 && toks.size() != 4) fail(lineno, "expected 3 or 4 columns");
      if (toks.size() == 4) cols[3] = 3;
      width = static_cast<int>(toks.size());
    }
    if (static_cast<int>(toks.size()) != width) {
      fail(lineno, "expected " + std::to_string(width) + " columns, got " +
                       std::to_string(toks.size()));
    }
    double vals[4] = {};
    for (int k = 0; k < 4; ++k) {
      if (cols[k] < 0) continue;
      if (!parse_number(toks[cols[k]], vals[k])) {
        fail(lineno, "bad number '" + std::string(trim(toks[cols[k]])) + "'");
      }
    }
    cloud.points.emplace_back(vals[0], vals[1], vals[2]);
    check_point(cloud.points.back(), lineno);
    if (cols[3] >= 0) cloud.labels.push_back(to_label(vals[3], lineno));
  }
  return cloud;
}

void write_csv(std::ostream& out, const PointCloud& cloud) {
  out << (cloud.has_labels() ? "x,y,z,label\n" : "x,y,z\n");
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    const auto& p = cloud.points[i];
    out << format_double(p.x()) << ',' << format_double(p.y()) << ',' << format_double(p.z());
    if (cloud.has_labels()) out << ',' << cloud.labels[i];
    out << '\n';
  }
}

PointCloud read_cloud(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::kParseError, "cannot open " + path.string());
  const auto ext = path.extension().string();
  try {
    if (ext == ".ply") return read_ply(in);
    if (ext == ".csv") return read_csv(in);
  } catch (const Error& e) {
    throw Error(e.code(), path.string() + ": " + e.detail());
  }
  throw Error(Errc::kParseError, "unknown cloud extension '" + ext + "'");
}

void write_cloud(const std::filesystem::path& path, const PointCloud& cloud) {
  std::ofstream out(path);
  if (!out) throw Error(Errc::kInvalidArgument, "cannot write " + path.string());
  const auto ext = path.extension().string();
  if (ext == ".ply") {
    write_ply(out, cloud);
  } else if (ext == ".csv") {
    write_csv(out, cloud);
  } else {
    throw Error(Errc::kInvalidArgument, "unknown cloud extension '" + ext + "'");
  }
}

}  // namespace graspkit
