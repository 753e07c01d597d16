#pragma once

// JSON helpers shared by every artifact format. Reals are written as
// shortest round-trip decimal strings so files reproduce bit-exactly.

#include <charconv>
#include <fstream>
#include <sstream>
#include <string>
#include <system_error>
#include <vector>

#include <json.hpp>

#include "ssmgan/error.hpp"

namespace ssmgan::io {

using json = nlohmann::json;

inline std::string format_real(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

inline double parse_real(const json& j) {
  if (j.is_number()) return j.get<double>();
  if (!j.is_string()) fail(ErrorCode::FormatError, "expected real encoded as string");
  const auto& s = j.get_ref<const std::string&>();
  double v = 0.0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc{} || res.ptr != s.data() + s.size()) {
    // from_chars rejects "inf"/"nan" spellings on some libstdc++ builds
    fail(ErrorCode::FormatError, "bad real literal '" + s + "'");
  }
  return v;
}

inline json encode_reals(const std::vector<double>& values) {
  json arr = json::array();
  for (double v : values) arr.push_back(format_real(v));
  return arr;
}

inline std::vector<double> decode_reals(const json& j) {
  if (!j.is_array()) fail(ErrorCode::FormatError, "expected array of reals");
  std::vector<double> out;
  out.reserve(j.size());
  for (const auto& e : j) out.push_back(parse_real(e));
  return out;
}

inline std::string read_text(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::IoError, "cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline std::vector<unsigned char> read_bytes(const std::string& path) {
  const auto text = read_text(path);
  return {text.begin(), text.end()};
}

inline void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorCode::IoError, "cannot write '" + path + "'");
  out << text;
  if (!out) fail(ErrorCode::IoError, "write failed for '" + path + "'");
}

inline json read_json(const std::string& path) {
  try {
    return json::parse(read_text(path));
  } catch (const json::parse_error& e) {
    fail(ErrorCode::FormatError, path + ": " + e.what());
  }
}

inline void write_json(const std::string& path, const json& j) { write_text(path, j.dump(1) + "\n"); }

inline void require_version(const json& j, int expected, const char* what) {
  if (!j.contains("version") || j.at("version").get<int>() != expected) {
    fail(ErrorCode::FormatError, std::string(what) + ": unsupported or missing version");
  }
}

}  // namespace ssmgan::io
