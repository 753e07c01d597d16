#include <gtest/gtest.h>

#include <cmath>
#include <complex>
#include <numbers>

#include "ssmgan/fixture.hpp"
#include "ssmgan/preprocess.hpp"
#include "test_util.hpp"

using namespace ssmgan;

namespace {

// Hamming-windowed sinc taps normalized to unit DC gain, built from the
// textbook definitions.
std::vector<double> oracle_taps(double fs, double cutoff, int taps) {
  std::vector<double> h(static_cast<std::size_t>(taps));
  const double wc = 2 * std::numbers::pi * cutoff / fs;
  double sum = 0;
  for (int n = 0; n < taps; ++n) {
    const double m = n - (taps - 1) / 2.0;
    const double ideal = m == 0 ? wc / std::numbers::pi : std::sin(wc * m) / (std::numbers::pi * m);
    const double w = 0.54 - 0.46 * std::cos(2 * std::numbers::pi * n / (taps - 1));
    h[static_cast<std::size_t>(n)] = ideal * w;
    sum += ideal * w;
  }
  for (auto& v : h) v /= sum;
  return h;
}

// |H(f)| of an FIR from its DTFT.
double magnitude(const std::vector<double>& h, double f, double fs) {
  std::complex<double> acc = 0;
  for (std::size_t n = 0; n < h.size(); ++n) acc += h[n] * std::polar(1.0, -2 * std::numbers::pi * f / fs * static_cast<double>(n));
  return std::abs(acc);
}

std::vector<double> sinusoid(double f, double fs, std::size_t n, double phase = 0.3) {
  std::vector<double> x(n);
  for (std::size_t i = 0; i < n; ++i) x[i] = std::sin(2 * std::numbers::pi * f * static_cast<double>(i) / fs + phase);
  return x;
}

double rms(std::span<const double> x, std::size_t lo, std::size_t hi) {
  double s = 0;
  for (std::size_t i = lo; i < hi; ++i) s += x[i] * x[i];
  return std::sqrt(s / static_cast<double>(hi - lo));
}

Record record_from(std::vector<double> signal, std::vector<Annotation> ann, double fs = 360, std::string name = "r") {
  Record r;
  r.header.record_name = std::move(name);
  r.header.num_signals = 1;
  r.header.sampling_rate_hz = fs;
  r.header.samples_per_signal = static_cast<std::int64_t>(signal.size());
  r.header.signals.push_back(SignalSpec{});
  r.signals.push_back(std::move(signal));
  r.annotations = std::move(ann);
  return r;
}

}  // namespace

TEST(Filter, TapsMatchTextbookDesign) {
  const auto h = lowpass_taps(360, 40);
  const auto o = oracle_taps(360, 40, 101);
  ASSERT_EQ(h.size(), o.size());
  for (std::size_t i = 0; i < h.size(); ++i) EXPECT_NEAR(h[i], o[i], 1e-14);
}

TEST(Filter, ConstantPassesUnchanged) {
  const std::vector<double> x(500, 5.0);
  for (double v : lowpass_filter(x, 360, 40)) EXPECT_NEAR(v, 5.0, 1e-9);
}

TEST(Filter, StopbandAttenuationMatchesFrequencyResponse) {
  // forward-backward application squares the magnitude response
  const double predicted = std::pow(magnitude(oracle_taps(360, 40, 101), 120, 360), 2);
  EXPECT_LT(predicted, 0.05);
  const auto x = sinusoid(120, 360, 7200);
  const auto y = lowpass_filter(x, 360, 40);
  ASSERT_EQ(y.size(), x.size());
  const double ratio = rms(y, 400, 6800) / rms(x, 400, 6800);
  EXPECT_LE(ratio, 0.05);
  EXPECT_NEAR(ratio, predicted, 1e-6);
}

TEST(Filter, PassbandGainMatchesFrequencyResponse) {
  const double predicted = std::pow(magnitude(oracle_taps(360, 40, 101), 10, 360), 2);
  const auto x = sinusoid(10, 360, 7200);
  const auto y = lowpass_filter(x, 360, 40);
  EXPECT_NEAR(rms(y, 400, 6800) / rms(x, 400, 6800), predicted, 1e-4);
}

TEST(Filter, ZeroPhase) {
  const auto x = sinusoid(5, 360, 3600, 0.0);
  const auto y = lowpass_filter(x, 360, 40);
  const double g = std::pow(magnitude(oracle_taps(360, 40, 101), 5, 360), 2);
  for (std::size_t i = 400; i < 3200; ++i) EXPECT_NEAR(y[i], g * x[i], 1e-6);
}

TEST(Filter, PassbandIdempotence) {
  const auto x = sinusoid(1, 360, 7200);
  const auto once = lowpass_filter(x, 360, 40);
  const auto twice = lowpass_filter(once, 360, 40);
  const double r1 = rms(once, 0, once.size()), r2 = rms(twice, 0, twice.size());
  EXPECT_LT(std::abs(r2 - r1) / r1, 0.01);
}

TEST(Filter, InvalidCutoff) {
  const std::vector<double> x(100, 1.0);
  EXPECT_SSMGAN_ERROR(lowpass_filter(x, 360, 200), ErrorCode::InvalidCutoff);
  EXPECT_SSMGAN_ERROR(lowpass_filter(x, 360, 0), ErrorCode::InvalidCutoff);
  EXPECT_SSMGAN_ERROR(lowpass_filter(x, 360, 180), ErrorCode::InvalidCutoff);
}

TEST(Filter, ShortInputKeepsLength) {
  const std::vector<double> x{1, 2, 3};
  EXPECT_EQ(lowpass_filter(x, 360, 40).size(), 3u);
}

TEST(Segment, WindowCounts) {
  const auto w = beat_window(360);
  EXPECT_EQ(w.before, 126);
  EXPECT_EQ(w.after, 144);
  EXPECT_EQ(w.before + w.after, 270);
  EXPECT_EQ(w.before, static_cast<int>(std::lround(0.35 * 360)));
  EXPECT_EQ(w.after, static_cast<int>(std::lround(0.40 * 360)));
}

TEST(Segment, WindowContentsAndTimeGrid) {
  std::vector<double> sig(1000);
  for (std::size_t i = 0; i < sig.size(); ++i) sig[i] = static_cast<double>(i);
  SegmentationReport rep;
  const auto d = segment_heartbeats(record_from(sig, {{100, 'N'}, {300, 'N'}, {500, 'A'}, {700, 'V'}, {900, 'F'}}), 0, &rep);
  ASSERT_EQ(d.beats.size(), 2u);
  EXPECT_EQ(rep.kept, 2u);
  EXPECT_EQ(rep.dropped_at_boundary, 2u);
  EXPECT_EQ(rep.skipped_symbols, 1u);
  const auto& b = d.beats[0];
  ASSERT_EQ(b.amp.size(), 270u);
  EXPECT_EQ(b.amp.front(), 300 - 126);
  EXPECT_EQ(b.amp.back(), 300 + 143);
  EXPECT_EQ(d.beats[1].label, 1);
  ASSERT_EQ(b.time.size(), 270u);
  EXPECT_EQ(b.time.front(), 0.0);
  EXPECT_EQ(b.time.back(), 1.0);
  for (std::size_t i = 1; i < b.time.size(); ++i) {
    EXPECT_GT(b.time[i], b.time[i - 1]);
    EXPECT_NEAR(b.time[i], static_cast<double>(i) / 269.0, 1e-15);
  }
}

TEST(Segment, SymbolFilter) {
  const std::vector<double> sig(2000, 0.5);
  const auto d = segment_heartbeats(record_from(sig, {{400, 'N'}, {800, 'A'}, {1200, 'V'}}), 0);
  ASSERT_EQ(d.beats.size(), 2u);
  EXPECT_EQ(d.beats[0].label, 0);
  EXPECT_EQ(d.beats[1].label, 1);
}

TEST(Segment, TranslationConsistent) {
  Rng rng(3);
  std::vector<double> sig(3000);
  for (auto& v : sig) v = rng.normal();
  const std::vector<Annotation> ann{{500, 'N'}, {1200, 'V'}, {2000, 'F'}};
  const auto base = segment_heartbeats(record_from(sig, ann), 0);
  for (std::int64_t d : {1, 17, 250}) {
    std::vector<double> shifted(static_cast<std::size_t>(d), 9.0);
    shifted.insert(shifted.end(), sig.begin(), sig.end());
    auto moved = ann;
    for (auto& a : moved) a.sample_index += d;
    const auto s = segment_heartbeats(record_from(shifted, moved), 0);
    ASSERT_EQ(s.beats.size(), base.beats.size());
    for (std::size_t i = 0; i < s.beats.size(); ++i) {
      EXPECT_EQ(s.beats[i].amp, base.beats[i].amp);
      EXPECT_EQ(s.beats[i].label, base.beats[i].label);
    }
  }
}

TEST(Segment, RejectsOtherSamplingRates) {
  const std::vector<double> sig(2000, 0.0);
  EXPECT_SSMGAN_ERROR(segment_heartbeats(record_from(sig, {}, 250), 0), ErrorCode::InvalidArgument);
  EXPECT_SSMGAN_ERROR(segment_heartbeats(record_from(sig, {}), 1), ErrorCode::InvalidArgument);
}

TEST(Normalize, HalvesWhenMaxIsTwo) {
  BeatDataset d;
  Heartbeat b;
  b.source_record = "r";
  b.time = uniform_time_grid(4);
  b.amp = {1.0, -2.0, 0.5, 0.0};
  d.beats.push_back(b);
  const auto n = normalize_amplitudes(d);
  EXPECT_EQ(n.data.beats[0].amp, (std::vector<double>{0.5, -1.0, 0.25, 0.0}));
  EXPECT_DOUBLE_EQ(n.stats.scale_for("r"), 2.0);
}

TEST(Normalize, AllZeroRecordIsDegenerate) {
  BeatDataset d;
  Heartbeat b;
  b.source_record = "z";
  b.amp.assign(10, 0.0);
  d.beats.push_back(b);
  EXPECT_SSMGAN_ERROR(normalize_amplitudes(d), ErrorCode::DegenerateSignal);
}

TEST(Normalize, DenormalizeInverts) {
  const auto d = fixture::make_beats({20, 20, 5}, 4);
  auto scaled = d;
  for (std::size_t i = 0; i < scaled.beats.size(); ++i) {
    scaled.beats[i].source_record = i % 2 ? "a" : "b";
    for (auto& v : scaled.beats[i].amp) v *= i % 2 ? 3.7 : 0.2;
  }
  const auto n = normalize_amplitudes(scaled);
  const auto back = denormalize(n.data, n.stats);
  for (std::size_t i = 0; i < back.beats.size(); ++i) {
    for (std::size_t j = 0; j < back.beats[i].amp.size(); ++j) EXPECT_NEAR(back.beats[i].amp[j], scaled.beats[i].amp[j], 1e-12);
  }
}

TEST(Normalize, StatisticsComeFromFitSet) {
  BeatDataset train, test;
  Heartbeat b;
  b.source_record = "r";
  b.amp = {4.0, 1.0};
  train.beats.push_back(b);
  b.amp = {8.0, 2.0};
  test.beats.push_back(b);
  const auto n = normalize_amplitudes(test, &train);
  EXPECT_EQ(n.data.beats[0].amp, (std::vector<double>{2.0, 0.5}));
}

TEST(Split, SeventyThirty) {
  const auto d = fixture::make_beats({100, 0, 0}, 1);
  for (std::uint64_t seed : {0, 1, 99}) {
    const auto s = split_train_test(d, 0.7, seed);
    EXPECT_EQ(s.train.beats.size(), 70u);
    EXPECT_EQ(s.test.beats.size(), 30u);
  }
}

TEST(Split, StratifiedAndDeterministic) {
  const auto d = fixture::make_beats({33, 17, 5}, 2);
  const auto a = split_train_test(d, 0.7, 11), b = split_train_test(d, 0.7, 11), c = split_train_test(d, 0.7, 12);
  const auto n = d.class_counts(), tr = a.train.class_counts(), te = a.test.class_counts();
  for (std::size_t l = 0; l < 3; ++l) {
    EXPECT_EQ(tr[l] + te[l], n[l]);
    EXPECT_EQ(tr[l], static_cast<std::size_t>(std::lround(0.7 * static_cast<double>(n[l]))));
  }
  ASSERT_EQ(a.train.beats.size(), b.train.beats.size());
  for (std::size_t i = 0; i < a.train.beats.size(); ++i) EXPECT_EQ(a.train.beats[i].amp, b.train.beats[i].amp);
  bool differs = false;
  for (std::size_t i = 0; i < a.train.beats.size(); ++i) differs |= a.train.beats[i].amp != c.train.beats[i].amp;
  EXPECT_TRUE(differs);
}

TEST(Split, EmptyClass) {
  const auto d = fixture::make_beats({10, 10, 0}, 2);
  const int required[] = {0, 1, 2};
  EXPECT_SSMGAN_ERROR(split_train_test(d, 0.7, 0, required), ErrorCode::EmptyClass);
  EXPECT_SSMGAN_ERROR(split_train_test(BeatDataset{}, 0.7, 0), ErrorCode::EmptyClass);
  EXPECT_SSMGAN_ERROR(split_train_test(d, 1.0, 0), ErrorCode::InvalidArgument);
}

TEST(Pipeline, FixtureRecordEndToEnd) {
  fixture::RecordOptions o;
  o.beats_per_class = {40, 30, 10};
  const auto f = fixture::make_record(o);
  const auto rec = assemble_record(parse_header(f.header), f.signal, parse_annotations_csv(f.annotations));
  const auto r = preprocess_record(rec, {});
  EXPECT_EQ(r.segmentation.kept, 80u);
  EXPECT_EQ(r.train.class_counts(), (std::array<std::size_t, 3>{28, 21, 7}));
  EXPECT_EQ(r.test.class_counts(), (std::array<std::size_t, 3>{12, 9, 3}));
  double peak = 0;
  for (const auto& b : r.train.beats) {
    EXPECT_EQ(b.amp.size(), 270u);
    for (double v : b.amp) peak = std::max(peak, std::abs(v));
  }
  EXPECT_NEAR(peak, 1.0, 1e-12);
}

TEST(Persistence, DatasetJsonRoundTripIsExact) {
  const auto d = fixture::make_beats({5, 4, 3}, 8);
  NormStats stats;
  stats.max_abs["fixture"] = 1.0 / 3.0;
  stats.fallback = 0.1;
  NormStats back_stats;
  const auto back = dataset_from_json(io::json::parse(dataset_to_json(d, &stats).dump()), &back_stats);
  ASSERT_EQ(back.beats.size(), d.beats.size());
  for (std::size_t i = 0; i < d.beats.size(); ++i) {
    EXPECT_EQ(back.beats[i].amp, d.beats[i].amp);
    EXPECT_EQ(back.beats[i].time, d.beats[i].time);
    EXPECT_EQ(back.beats[i].label, d.beats[i].label);
  }
  EXPECT_EQ(back_stats.max_abs.at("fixture"), 1.0 / 3.0);
  EXPECT_EQ(back_stats.fallback, 0.1);
}
