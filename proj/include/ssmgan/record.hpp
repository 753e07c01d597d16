#pragma once

// MIT-BIH style record ingestion: WFDB text header, format-212 signal
// file, and a CSV annotation list ("sample_index,symbol" per line).

#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "ssmgan/error.hpp"
#include "ssmgan/serialize.hpp"

namespace ssmgan {

struct SignalSpec {
  std::string file_name;
  int format_code = 212;
  double adc_gain = 200.0;  // ADC units per millivolt
  int adc_zero = 0;
};

struct RecordHeader {
  std::string record_name;
  int num_signals = 0;
  double sampling_rate_hz = 250.0;
  std::int64_t samples_per_signal = 0;
  std::vector<SignalSpec> signals;
};

struct Annotation {
  std::int64_t sample_index = 0;
  char symbol = 'N';

  friend bool operator==(const Annotation&, const Annotation&) = default;
};

struct Record {
  RecordHeader header;
  std::vector<std::vector<double>> signals;  // millivolts, one vector per channel
  std::vector<Annotation> annotations;
};

namespace detail {

inline std::vector<std::string> split_ws(const std::string& line) {
  std::istringstream ss(line);
  std::vector<std::string> out;
  for (std::string tok; ss >> tok;) out.push_back(tok);
  return out;
}

inline bool parse_int(const std::string& s, std::int64_t& out) {
  const auto res = std::from_chars(s.data(), s.data() + s.size(), out);
  return res.ec == std::errc{} && res.ptr == s.data() + s.size();
}

inline bool parse_double(const std::string& s, double& out) {
  const auto res = std::from_chars(s.data(), s.data() + s.size(), out);
  return res.ec == std::errc{} && res.ptr == s.data() + s.size();
}

/// Leading numeric prefix of a token such as "360/1(0)" or "212+4".
inline std::string numeric_prefix(const std::string& tok) {
  std::size_t end = 0;
  while (end < tok.size() && (std::isdigit(static_cast<unsigned char>(tok[end])) || tok[end] == '.' ||
                              tok[end] == '-' || tok[end] == '+' || tok[end] == 'e' || tok[end] == 'E')) {
    if ((tok[end] == '-' || tok[end] == '+') && end > 0 && tok[end - 1] != 'e' && tok[end - 1] != 'E') break;
    ++end;
  }
  return tok.substr(0, end);
}

inline std::int64_t wfdb_int(const std::string& tok, const char* field) {
  std::int64_t v = 0;
  if (!parse_int(numeric_prefix(tok), v)) fail(ErrorCode::MalformedHeader, std::string("non-numeric ") + field + " '" + tok + "'");
  return v;
}

inline double wfdb_real(const std::string& tok, const char* field) {
  double v = 0;
  if (!parse_double(numeric_prefix(tok), v)) fail(ErrorCode::MalformedHeader, std::string("non-numeric ") + field + " '" + tok + "'");
  return v;
}

}  // namespace detail

/// Parses a WFDB header. Comment lines ('#') and unknown trailing fields
/// are ignored; any signal format other than 212 is rejected.
inline RecordHeader parse_header(const std::string& text) {
  if (text.empty()) fail(ErrorCode::MalformedHeader, "empty header");
  std::istringstream in(text);
  std::vector<std::vector<std::string>> lines;
  for (std::string line; std::getline(in, line);) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const auto first = line.find_first_not_of(" \t");
    if (first == std::string::npos || line[first] == '#') continue;
    lines.push_back(detail::split_ws(line));
  }
  if (lines.empty()) fail(ErrorCode::MalformedHeader, "missing record line");

  const auto& rec = lines.front();
  if (rec.size() < 2) fail(ErrorCode::MalformedHeader, "record line needs name and signal count");
  RecordHeader h;
  h.record_name = rec[0].substr(0, rec[0].find('/'));
  const auto nsig = detail::wfdb_int(rec[1], "signal count");
  if (nsig < 1) fail(ErrorCode::MalformedHeader, "record must declare at least one signal");
  h.num_signals = static_cast<int>(nsig);
  if (rec.size() > 2) h.sampling_rate_hz = detail::wfdb_real(rec[2], "sampling frequency");
  if (!(h.sampling_rate_hz > 0)) fail(ErrorCode::MalformedHeader, "sampling frequency must be positive");
  if (rec.size() > 3) h.samples_per_signal = detail::wfdb_int(rec[3], "sample count");
  if (h.samples_per_signal < 0) fail(ErrorCode::MalformedHeader, "negative sample count");

  if (static_cast<int>(lines.size()) - 1 < h.num_signals) {
    fail(ErrorCode::MalformedHeader, "expected " + std::to_string(h.num_signals) + " signal lines");
  }
  for (int s = 0; s < h.num_signals; ++s) {
    const auto& f = lines[static_cast<std::size_t>(s) + 1];
    if (f.size() < 2) fail(ErrorCode::MalformedHeader, "signal line needs file name and format");
    SignalSpec spec;
    spec.file_name = f[0];
    spec.format_code = static_cast<int>(detail::wfdb_int(f[1], "format"));
    if (spec.format_code != 212) {
      fail(ErrorCode::UnsupportedFormat, "signal " + std::to_string(s) + " uses format " + std::to_string(spec.format_code));
    }
    if (f.size() > 2) {
      spec.adc_gain = detail::wfdb_real(f[2], "ADC gain");
      if (spec.adc_gain == 0.0) spec.adc_gain = 200.0;  // WFDB: zero gain means default
    }
    if (f.size() > 4) spec.adc_zero = static_cast<int>(detail::wfdb_int(f[4], "ADC zero"));
    h.signals.push_back(spec);
  }
  return h;
}

inline std::size_t format212_byte_count(std::size_t total_samples) { return (total_samples * 3 + 1) / 2; }

/// Unpacks two 12-bit two's-complement samples from every three bytes.
/// Samples are interleaved channel-major per frame; the result is
/// returned frame by frame (total = num_signals * num_samples values).
inline std::vector<int> decode_format212(std::span<const unsigned char> bytes, int num_signals, std::int64_t num_samples) {
  if (num_signals < 1 || num_samples < 0) fail(ErrorCode::InvalidArgument, "bad signal/sample count");
  const auto total = static_cast<std::size_t>(num_signals) * static_cast<std::size_t>(num_samples);
  if (bytes.size() < format212_byte_count(total)) {
    fail(ErrorCode::TruncatedData, "need " + std::to_string(format212_byte_count(total)) + " bytes, got " +
                                       std::to_string(bytes.size()));
  }
  auto sign12 = [](int v) { return v > 2047 ? v - 4096 : v; };
  std::vector<int> out(total);
  for (std::size_t i = 0, b = 0; i < total; i += 2, b += 3) {
    const int b0 = bytes[b];
    const int b1 = bytes[b + 1];
    out[i] = sign12(b0 | ((b1 & 0x0F) << 8));
    if (i + 1 < total) {
      const int b2 = bytes[b + 2];
      out[i + 1] = sign12(b2 | ((b1 & 0xF0) << 4));
    }
  }
  return out;
}

inline std::vector<unsigned char> encode_format212(std::span<const int> samples) {
  std::vector<unsigned char> out(format212_byte_count(samples.size()));
  for (std::size_t i = 0, b = 0; i < samples.size(); i += 2, b += 3) {
    if (samples[i] < -2048 || samples[i] > 2047) fail(ErrorCode::InvalidArgument, "sample outside 12-bit range");
    const int s1 = samples[i] & 0xFFF;
    const int s2 = i + 1 < samples.size() ? samples[i + 1] & 0xFFF : 0;
    if (i + 1 < samples.size() && (samples[i + 1] < -2048 || samples[i + 1] > 2047)) {
      fail(ErrorCode::InvalidArgument, "sample outside 12-bit range");
    }
    out[b] = static_cast<unsigned char>(s1 & 0xFF);
    out[b + 1] = static_cast<unsigned char>(((s1 >> 8) & 0x0F) | ((s2 >> 4) & 0xF0));
    if (i + 1 < samples.size()) out[b + 2] = static_cast<unsigned char>(s2 & 0xFF);
  }
  return out;
}

inline std::vector<Annotation> parse_annotations_csv(const std::string& text) {
  std::vector<Annotation> out;
  std::istringstream in(text);
  std::size_t line_no = 0;
  for (std::string line; std::getline(in, line);) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto comma = line.find(',');
    const auto where = "line " + std::to_string(line_no) + ": '" + line + "'";
    if (comma == std::string::npos) fail(ErrorCode::MalformedLine, where);
    Annotation a;
    if (!detail::parse_int(line.substr(0, comma), a.sample_index) || a.sample_index < 0) {
      fail(ErrorCode::MalformedLine, where);
    }
    const auto sym = line.substr(comma + 1);
    if (sym.size() != 1) fail(ErrorCode::MalformedLine, where);
    a.symbol = sym[0];
    if (!out.empty() && a.sample_index <= out.back().sample_index) fail(ErrorCode::NonMonotoneIndex, where);
    out.push_back(a);
  }
  return out;
}

inline std::string format_annotations_csv(std::span<const Annotation> annotations) {
  std::string out;
  for (const auto& a : annotations) out += std::to_string(a.sample_index) + "," + a.symbol + "\n";
  return out;
}

/// Converts interleaved raw samples into per-channel millivolts.
inline Record assemble_record(RecordHeader header, std::span<const unsigned char> signal_bytes,
                              std::vector<Annotation> annotations) {
  const auto total = static_cast<std::size_t>(header.num_signals) * static_cast<std::size_t>(header.samples_per_signal);
  const auto raw = decode_format212(signal_bytes, header.num_signals, header.samples_per_signal);
  if (signal_bytes.size() > format212_byte_count(total)) {
    fail(ErrorCode::ChannelLengthMismatch, "signal file holds more data than the header declares");
  }
  for (const auto& a : annotations) {
    if (a.sample_index >= header.samples_per_signal) {
      fail(ErrorCode::AnnotationOutOfRange, "annotation at " + std::to_string(a.sample_index));
    }
  }
  Record r;
  r.signals.assign(static_cast<std::size_t>(header.num_signals),
                   std::vector<double>(static_cast<std::size_t>(header.samples_per_signal)));
  const auto nsig = static_cast<std::size_t>(header.num_signals);
  for (std::size_t ch = 0; ch < nsig; ++ch) {
    const double gain = header.signals[ch].adc_gain;
    const double zero = header.signals[ch].adc_zero;
    auto& dst = r.signals[ch];
    for (std::size_t s = 0; s < dst.size(); ++s) dst[s] = (raw[s * nsig + ch] - zero) / gain;
  }
  r.header = std::move(header);
  r.annotations = std::move(annotations);
  return r;
}

inline Record load_record(const std::string& header_path, const std::string& signal_path,
                          const std::string& annotation_path) {
  auto header = parse_header(io::read_text(header_path));
  const auto bytes = io::read_bytes(signal_path);
  auto annotations = parse_annotations_csv(io::read_text(annotation_path));
  return assemble_record(std::move(header), bytes, std::move(annotations));
}

/// Inverse of the millivolt conversion.
inline int millivolts_to_raw(double mv, const SignalSpec& spec) {
  return static_cast<int>(std::lround(mv * spec.adc_gain + spec.adc_zero));
}

// Single-channel record persistence used between the `ingest` and
// `preprocess` CLI stages.

inline io::json record_to_json(const Record& r, int channel) {
  if (channel < 0 || channel >= r.header.num_signals) fail(ErrorCode::InvalidArgument, "channel out of range");
  io::json j;
  j["version"] = 1;
  j["name"] = r.header.record_name;
  j["fs"] = io::format_real(r.header.sampling_rate_hz);
  j["channel"] = channel;
  j["samples"] = io::encode_reals(r.signals[static_cast<std::size_t>(channel)]);
  io::json ann = io::json::array();
  for (const auto& a : r.annotations) ann.push_back({{"index", a.sample_index}, {"symbol", std::string(1, a.symbol)}});
  j["annotations"] = ann;
  return j;
}

/// Loads a single-channel record; the channel becomes channel 0.
inline Record record_from_json(const io::json& j) {
  io::require_version(j, 1, "record");
  Record r;
  r.header.record_name = j.at("name").get<std::string>();
  r.header.sampling_rate_hz = io::parse_real(j.at("fs"));
  r.header.num_signals = 1;
  r.signals.push_back(io::decode_reals(j.at("samples")));
  r.header.samples_per_signal = static_cast<std::int64_t>(r.signals[0].size());
  r.header.signals.push_back(SignalSpec{});
  for (const auto& a : j.at("annotations")) {
    const auto sym = a.at("symbol").get<std::string>();
    if (sym.size() != 1) fail(ErrorCode::FormatError, "annotation symbol must be one character");
    r.annotations.push_back({a.at("index").get<std::int64_t>(), sym[0]});
  }
  return r;
}

}  // namespace ssmgan
