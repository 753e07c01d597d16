#pragma once

// Synthetic ECG records for tests and smoke runs. Each beat is a sum of
// Gaussian bumps (P, QRS, T) whose QRS width, height and latency are
// randomized per beat; the classes differ in morphology.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <sstream>
#include <string>
#include <vector>

#include "ssmgan/preprocess.hpp"
#include "ssmgan/record.hpp"
#include "ssmgan/rng.hpp"

namespace ssmgan::fixture {

struct Bump {
  double center;  // seconds relative to the R annotation
  double width;   // Gaussian sigma, seconds
  double height;  // millivolts
};

struct ClassMorphology {
  Bump p, qrs, t;
  double qrs_width_jitter;   // relative
  double qrs_height_jitter;  // relative
  double latency_jitter;     // seconds
};

inline ClassMorphology morphology(int label) {
  switch (label) {
    case 0: return {{-0.20, 0.025, 0.15}, {0.0, 0.012, 1.1}, {0.25, 0.040, 0.30}, 0.25, 0.15, 0.008};
    case 1: return {{-0.20, 0.025, 0.00}, {0.0, 0.032, 1.7}, {0.30, 0.060, -0.40}, 0.25, 0.15, 0.008};
    default: return {{-0.20, 0.025, 0.08}, {0.0, 0.020, 1.3}, {0.27, 0.050, 0.15}, 0.25, 0.15, 0.008};
  }
}

inline double gauss(double x, double c, double w) {
  const double z = (x - c) / w;
  return std::exp(-0.5 * z * z);
}

/// Waveform sample of one beat at `t` seconds from its annotation.
struct BeatShape {
  ClassMorphology m;
  double qrs_width;
  double qrs_height;
  double latency;

  double operator()(double t) const {
    return m.p.height * gauss(t, m.p.center, m.p.width) + qrs_height * gauss(t, latency, qrs_width) +
           m.t.height * gauss(t, m.t.center + latency, m.t.width);
  }
};

inline BeatShape random_beat(int label, Rng& rng) {
  const auto m = morphology(label);
  return {m, m.qrs.width * (1 + rng.uniform(-m.qrs_width_jitter, m.qrs_width_jitter)),
          m.qrs.height * (1 + rng.uniform(-m.qrs_height_jitter, m.qrs_height_jitter)), rng.uniform(-m.latency_jitter, m.latency_jitter)};
}

struct RecordOptions {
  std::string name = "fixture";
  std::array<std::size_t, kNumClasses> beats_per_class{100, 100, 0};
  double fs = 360.0;
  double rr_seconds = 1.0;
  double rr_jitter = 0.05;
  double noise_mv = 0.01;
  std::uint64_t seed = 0;
};

struct RecordFiles {
  std::string header;
  std::vector<unsigned char> signal;
  std::string annotations;
};

/// A one-channel format-212 record with beats of the requested classes in
/// shuffled order, about one per `rr_seconds`.
inline RecordFiles make_record(const RecordOptions& o) {
  Rng rng = Rng::keyed(o.seed, 0, 0x464958);
  std::vector<int> order;
  for (int l = 0; l < kNumClasses; ++l) order.insert(order.end(), o.beats_per_class[static_cast<std::size_t>(l)], l);
  rng.shuffle(order.begin(), order.end());

  std::vector<double> r_times;
  double t = 0.6;
  for (std::size_t i = 0; i < order.size(); ++i) {
    r_times.push_back(t);
    t += o.rr_seconds * (1 + rng.uniform(-o.rr_jitter, o.rr_jitter));
  }
  const auto n = static_cast<std::size_t>(std::ceil((t + 0.4) * o.fs));
  std::vector<double> mv(n, 0.0);
  std::vector<Annotation> ann;
  for (std::size_t i = 0; i < order.size(); ++i) {
    const auto beat = random_beat(order[i], rng);
    const auto r = static_cast<std::int64_t>(std::lround(r_times[i] * o.fs));
    ann.push_back({r, class_symbol(order[i])});
    const auto lo = std::max<std::int64_t>(0, r - static_cast<std::int64_t>(0.6 * o.fs));
    const auto hi = std::min<std::int64_t>(static_cast<std::int64_t>(n), r + static_cast<std::int64_t>(0.7 * o.fs));
    for (auto s = lo; s < hi; ++s) mv[static_cast<std::size_t>(s)] += beat(static_cast<double>(s - r) / o.fs);
  }
  for (auto& v : mv) v += o.noise_mv * rng.normal();

  SignalSpec spec;
  spec.file_name = o.name + ".dat";
  std::vector<int> raw(n);
  for (std::size_t i = 0; i < n; ++i) raw[i] = std::clamp(millivolts_to_raw(mv[i], spec), -2048, 2047);

  RecordFiles f;
  std::ostringstream h;
  h << o.name << " 1 " << o.fs << ' ' << n << '\n' << spec.file_name << " 212 200 11 0 0 0 0 MLII\n";
  f.header = h.str();
  f.signal = encode_format212(raw);
  f.annotations = format_annotations_csv(ann);
  return f;
}

/// Beats drawn directly on the uniform time grid (no record, no filter),
/// amplitudes scaled into [-1, 1] by the largest absolute value.
inline BeatDataset make_beats(const std::array<std::size_t, kNumClasses>& per_class, std::uint64_t seed, int length = kBeatLength,
                              double fs = 360.0) {
  Rng rng = Rng::keyed(seed, 0, 0x424541);
  const auto win = beat_window(fs);
  BeatDataset d;
  double peak = 0.0;
  for (int l = 0; l < kNumClasses; ++l) {
    for (std::size_t i = 0; i < per_class[static_cast<std::size_t>(l)]; ++i) {
      const auto beat = random_beat(l, rng);
      Heartbeat b;
      b.label = l;
      b.source_record = "fixture";
      b.r_peak_index = static_cast<std::int64_t>(i);
      b.time = uniform_time_grid(static_cast<std::size_t>(length));
      b.amp.resize(static_cast<std::size_t>(length));
      for (int s = 0; s < length; ++s) {
        b.amp[static_cast<std::size_t>(s)] = beat(static_cast<double>(s - win.before) / fs) + 0.01 * rng.normal();
        peak = std::max(peak, std::abs(b.amp[static_cast<std::size_t>(s)]));
      }
      d.beats.push_back(std::move(b));
    }
  }
  for (auto& b : d.beats) {
    for (auto& v : b.amp) v /= peak;
  }
  return d;
}

}  // namespace ssmgan::fixture
