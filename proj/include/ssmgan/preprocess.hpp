#pragma once

// Low-pass filtering, R-peak-anchored beat segmentation, amplitude
// normalization and stratified train/test splitting.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <map>
#include <numbers>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ssmgan/error.hpp"
#include "ssmgan/record.hpp"
#include "ssmgan/rng.hpp"
#include "ssmgan/serialize.hpp"

namespace ssmgan {

inline constexpr int kNumClasses = 3;
inline constexpr int kBeatLength = 270;
inline constexpr double kPreRSeconds = 0.35;
inline constexpr double kPostRSeconds = 0.40;

/// Beat classes in label order.
inline constexpr char kClassSymbols[kNumClasses] = {'N', 'V', 'F'};

inline std::optional<int> class_from_symbol(char symbol) {
  for (int c = 0; c < kNumClasses; ++c) {
    if (kClassSymbols[c] == symbol) return c;
  }
  return std::nullopt;
}

inline char class_symbol(int label) {
  if (label < 0 || label >= kNumClasses) fail(ErrorCode::InvalidArgument, "label out of range");
  return kClassSymbols[label];
}

/// One beat as a 2-D shape: a time row in [0, 1] and an amplitude row.
struct Heartbeat {
  std::vector<double> time;
  std::vector<double> amp;
  int label = 0;
  std::string source_record;
  std::int64_t r_peak_index = 0;

  std::size_t length() const { return amp.size(); }
};

struct BeatDataset {
  std::vector<Heartbeat> beats;

  std::array<std::size_t, kNumClasses> class_counts() const {
    std::array<std::size_t, kNumClasses> counts{};
    for (const auto& b : beats) ++counts[static_cast<std::size_t>(b.label)];
    return counts;
  }

  std::vector<std::size_t> indices_of(int label) const {
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < beats.size(); ++i) {
      if (beats[i].label == label) idx.push_back(i);
    }
    return idx;
  }

  std::size_t beat_length() const { return beats.empty() ? 0 : beats.front().length(); }
};

/// Uniform time grid i / (T - 1).
inline std::vector<double> uniform_time_grid(std::size_t length) {
  std::vector<double> t(length, 0.0);
  for (std::size_t i = 0; i < length; ++i) t[i] = length > 1 ? static_cast<double>(i) / static_cast<double>(length - 1) : 0.0;
  return t;
}

// ---------------------------------------------------------------- filter

/// Hamming-windowed sinc low-pass taps, normalized to unit DC gain.
inline std::vector<double> lowpass_taps(double fs, double cutoff, int taps = 101) {
  if (!(fs > 0) || !(cutoff > 0) || !(cutoff < fs / 2)) {
    fail(ErrorCode::InvalidCutoff, "cutoff must lie in (0, fs/2)");
  }
  if (taps < 3 || taps % 2 == 0) fail(ErrorCode::InvalidArgument, "tap count must be odd and >= 3");
  const double fc = cutoff / fs;
  const int mid = taps / 2;
  std::vector<double> h(static_cast<std::size_t>(taps));
  double sum = 0.0;
  for (int n = 0; n < taps; ++n) {
    const double k = n - mid;
    const double sinc = k == 0 ? 2.0 * fc : std::sin(2.0 * std::numbers::pi * fc * k) / (std::numbers::pi * k);
    const double window = 0.54 - 0.46 * std::cos(2.0 * std::numbers::pi * n / (taps - 1));
    h[static_cast<std::size_t>(n)] = sinc * window;
    sum += h[static_cast<std::size_t>(n)];
  }
  for (auto& v : h) v /= sum;
  return h;
}

namespace detail {

// Causal FIR pass; samples before the start are held at x[0] (steady
// state), so a constant input passes through unchanged.
inline std::vector<double> fir_pass(std::span<const double> x, std::span<const double> h) {
  std::vector<double> y(x.size());
  const auto n = static_cast<std::ptrdiff_t>(x.size());
  const auto m = static_cast<std::ptrdiff_t>(h.size());
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    double acc = 0.0;
    for (std::ptrdiff_t k = 0; k < m; ++k) {
      const auto j = i - k;
      acc += h[static_cast<std::size_t>(k)] * x[static_cast<std::size_t>(j < 0 ? 0 : j)];
    }
    y[static_cast<std::size_t>(i)] = acc;
  }
  return y;
}

}  // namespace detail

/// Zero-phase low-pass: the FIR is applied forward then backward over an
/// odd-reflection-padded copy of the input.
inline std::vector<double> lowpass_filter(std::span<const double> samples, double fs, double cutoff, int taps = 101) {
  const auto h = lowpass_taps(fs, cutoff, taps);
  if (samples.empty()) fail(ErrorCode::InvalidArgument, "empty sequence");
  const std::size_t n = samples.size();
  const std::size_t pad = std::min<std::size_t>(3 * (h.size() - 1), n - 1);

  std::vector<double> ext;
  ext.reserve(n + 2 * pad);
  for (std::size_t i = pad; i >= 1; --i) ext.push_back(2.0 * samples[0] - samples[i]);
  ext.insert(ext.end(), samples.begin(), samples.end());
  for (std::size_t i = 1; i <= pad; ++i) ext.push_back(2.0 * samples[n - 1] - samples[n - 1 - i]);

  auto fwd = detail::fir_pass(ext, h);
  std::reverse(fwd.begin(), fwd.end());
  auto bwd = detail::fir_pass(fwd, h);
  std::reverse(bwd.begin(), bwd.end());
  return {bwd.begin() + static_cast<std::ptrdiff_t>(pad), bwd.begin() + static_cast<std::ptrdiff_t>(pad + n)};
}

// ---------------------------------------------------------- segmentation

struct BeatWindow {
  int before = 0;  // samples strictly before the R peak
  int after = 0;   // samples from the R peak onward
  int length() const { return before + after; }
};

inline BeatWindow beat_window(double fs) {
  return {static_cast<int>(std::lround(kPreRSeconds * fs)), static_cast<int>(std::lround(kPostRSeconds * fs))};
}

struct SegmentationReport {
  std::size_t kept = 0;
  std::size_t dropped_at_boundary = 0;
  std::size_t skipped_symbols = 0;
};

/// Cuts [r - before, r + after) around every N/V/F annotation. Windows
/// leaving the record are dropped; other symbols are skipped.
inline BeatDataset segment_heartbeats(const Record& record, int channel, SegmentationReport* report = nullptr) {
  if (channel < 0 || channel >= static_cast<int>(record.signals.size())) {
    fail(ErrorCode::InvalidArgument, "channel out of range");
  }
  const auto win = beat_window(record.header.sampling_rate_hz);
  if (win.length() != kBeatLength) {
    fail(ErrorCode::InvalidArgument, "sampling rate must give a " + std::to_string(kBeatLength) + "-sample window (360 Hz)");
  }
  const auto& sig = record.signals[static_cast<std::size_t>(channel)];
  const auto n = static_cast<std::int64_t>(sig.size());
  const auto grid = uniform_time_grid(kBeatLength);

  SegmentationReport rep;
  BeatDataset out;
  for (const auto& a : record.annotations) {
    const auto label = class_from_symbol(a.symbol);
    if (!label) {
      ++rep.skipped_symbols;
      continue;
    }
    const auto start = a.sample_index - win.before;
    const auto stop = a.sample_index + win.after;
    if (start < 0 || stop > n) {
      ++rep.dropped_at_boundary;
      continue;
    }
    Heartbeat b;
    b.time = grid;
    b.amp.assign(sig.begin() + start, sig.begin() + stop);
    b.label = *label;
    b.source_record = record.header.record_name;
    b.r_peak_index = a.sample_index;
    out.beats.push_back(std::move(b));
  }
  rep.kept = out.beats.size();
  if (report) *report = rep;
  return out;
}

// --------------------------------------------------------- normalization

/// Per-record amplitude scale (max |amplitude| over the fitting beats).
struct NormStats {
  std::map<std::string, double> max_abs;
  double fallback = 1.0;  // global max over the fitting beats, used for unseen records

  double scale_for(const std::string& record) const {
    const auto it = max_abs.find(record);
    return it == max_abs.end() ? fallback : it->second;
  }
};

inline NormStats fit_norm_stats(const BeatDataset& fit_set) {
  if (fit_set.beats.empty()) fail(ErrorCode::InvalidArgument, "cannot fit normalization on an empty dataset");
  NormStats stats;
  double global = 0.0;
  for (const auto& b : fit_set.beats) {
    double& m = stats.max_abs[b.source_record];
    for (double v : b.amp) m = std::max(m, std::abs(v));
    global = std::max(global, m);
  }
  for (const auto& [name, m] : stats.max_abs) {
    if (m == 0.0) fail(ErrorCode::DegenerateSignal, "record '" + name + "' has zero amplitude");
  }
  stats.fallback = global;
  return stats;
}

inline BeatDataset apply_norm(BeatDataset data, const NormStats& stats) {
  for (auto& b : data.beats) {
    const double s = stats.scale_for(b.source_record);
    for (auto& v : b.amp) v /= s;
  }
  return data;
}

inline BeatDataset denormalize(BeatDataset data, const NormStats& stats) {
  for (auto& b : data.beats) {
    const double s = stats.scale_for(b.source_record);
    for (auto& v : b.amp) v *= s;
  }
  return data;
}

struct NormalizedDataset {
  BeatDataset data;
  NormStats stats;
};

/// Scales each record's amplitudes by 1/max|amplitude| of that record.
/// When `fit_set` is given the statistics come from it (the training
/// partition); otherwise from `data` itself.
inline NormalizedDataset normalize_amplitudes(const BeatDataset& data, const BeatDataset* fit_set = nullptr) {
  if (data.beats.empty()) fail(ErrorCode::InvalidArgument, "empty dataset");
  auto stats = fit_norm_stats(fit_set ? *fit_set : data);
  return {apply_norm(data, stats), std::move(stats)};
}

// ----------------------------------------------------------------- split

struct TrainTestSplit {
  BeatDataset train;
  BeatDataset test;
};

/// Per-class stratified split with |train_c| = round(ratio * n_c). Every
/// class listed in `required` must have at least one beat; by default
/// only the classes present are required (and the dataset must be
/// non-empty).
inline TrainTestSplit split_train_test(const BeatDataset& data, double ratio, std::uint64_t seed,
                                       std::span<const int> required = {}) {
  if (!(ratio > 0.0 && ratio < 1.0)) fail(ErrorCode::InvalidArgument, "split ratio must lie in (0, 1)");
  if (data.beats.empty()) fail(ErrorCode::EmptyClass, "dataset has no beats");
  const auto counts = data.class_counts();
  for (int c : required) {
    if (c < 0 || c >= kNumClasses) fail(ErrorCode::InvalidArgument, "required class out of range");
    if (counts[static_cast<std::size_t>(c)] == 0) {
      fail(ErrorCode::EmptyClass, std::string("class ") + class_symbol(c) + " has no beats");
    }
  }

  std::vector<bool> in_train(data.beats.size(), false);
  for (int c = 0; c < kNumClasses; ++c) {
    auto idx = data.indices_of(c);
    if (idx.empty()) continue;
    Rng rng = Rng::keyed(seed, 0x5u, static_cast<std::uint64_t>(c));
    rng.shuffle(idx.begin(), idx.end());
    const auto n_train = static_cast<std::size_t>(std::lround(ratio * static_cast<double>(idx.size())));
    for (std::size_t i = 0; i < n_train; ++i) in_train[idx[i]] = true;
  }
  TrainTestSplit out;
  for (std::size_t i = 0; i < data.beats.size(); ++i) {
    (in_train[i] ? out.train : out.test).beats.push_back(data.beats[i]);
  }
  return out;
}

// -------------------------------------------------------------- pipeline

struct PreprocessOptions {
  double cutoff_hz = 40.0;
  double split_ratio = 0.7;
  std::uint64_t seed = 0;
  int channel = 0;
};

struct PreprocessResult {
  BeatDataset train;
  BeatDataset test;
  NormStats stats;
  SegmentationReport segmentation;
};

/// Filter, segment, split, then normalize both partitions with
/// statistics fitted on the training partition.
inline PreprocessResult preprocess_record(Record record, const PreprocessOptions& o) {
  for (auto& ch : record.signals) {
    if (!ch.empty()) ch = lowpass_filter(ch, record.header.sampling_rate_hz, o.cutoff_hz);
  }
  PreprocessResult r;
  const auto beats = segment_heartbeats(record, o.channel, &r.segmentation);
  auto split = split_train_test(beats, o.split_ratio, o.seed);
  r.stats = fit_norm_stats(split.train);
  r.train = apply_norm(std::move(split.train), r.stats);
  r.test = apply_norm(std::move(split.test), r.stats);
  return r;
}

// ----------------------------------------------------------- persistence

inline io::json dataset_to_json(const BeatDataset& data, const NormStats* stats = nullptr) {
  io::json j;
  j["version"] = 1;
  j["T"] = data.beat_length() == 0 ? kBeatLength : static_cast<int>(data.beat_length());
  io::json beats = io::json::array();
  for (const auto& b : data.beats) {
    beats.push_back({{"label", std::string(1, class_symbol(b.label))},
                     {"record", b.source_record},
                     {"r_index", b.r_peak_index},
                     {"time", io::encode_reals(b.time)},
                     {"amp", io::encode_reals(b.amp)}});
  }
  j["beats"] = std::move(beats);
  if (stats) {
    io::json ns;
    ns["fallback"] = io::format_real(stats->fallback);
    io::json per = io::json::object();
    for (const auto& [name, m] : stats->max_abs) per[name] = io::format_real(m);
    ns["max_abs"] = std::move(per);
    j["norm_stats"] = std::move(ns);
  } else {
    j["norm_stats"] = nullptr;
  }
  return j;
}

inline BeatDataset dataset_from_json(const io::json& j, NormStats* stats = nullptr) {
  io::require_version(j, 1, "beat dataset");
  const auto T = j.at("T").get<std::size_t>();
  BeatDataset data;
  for (const auto& jb : j.at("beats")) {
    Heartbeat b;
    const auto sym = jb.at("label").get<std::string>();
    const auto label = sym.size() == 1 ? class_from_symbol(sym[0]) : std::nullopt;
    if (!label) fail(ErrorCode::FormatError, "unknown beat label '" + sym + "'");
    b.label = *label;
    b.source_record = jb.at("record").get<std::string>();
    b.r_peak_index = jb.at("r_index").get<std::int64_t>();
    b.time = io::decode_reals(jb.at("time"));
    b.amp = io::decode_reals(jb.at("amp"));
    if (b.time.size() != T || b.amp.size() != T) fail(ErrorCode::FormatError, "beat length disagrees with T");
    data.beats.push_back(std::move(b));
  }
  if (stats && j.contains("norm_stats") && !j.at("norm_stats").is_null()) {
    const auto& ns = j.at("norm_stats");
    stats->fallback = io::parse_real(ns.at("fallback"));
    for (const auto& [name, v] : ns.at("max_abs").items()) stats->max_abs[name] = io::parse_real(v);
  }
  return data;
}

}  // namespace ssmgan
