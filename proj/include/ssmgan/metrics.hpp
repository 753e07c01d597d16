#pragma once

// Set-to-set similarity between real and synthetic beats: RMSE, MAE and
// MSE over nearest-real pairs, EMD over pooled amplitude values, and DTW
// over the same pairs. Everything runs on the amplitude channel.

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "ssmgan/dtw.hpp"
#include "ssmgan/error.hpp"
#include "ssmgan/preprocess.hpp"
#include "ssmgan/serialize.hpp"

namespace ssmgan::metrics {

/// Wasserstein-1 distance between two empirical distributions: the
/// integral of |F_a - F_b| over the merged support.
inline double emd_1d(std::span<const double> a, std::span<const double> b) {
  if (a.empty() || b.empty()) fail(ErrorCode::EmptySet, "emd_1d needs two non-empty sets");
  std::vector<double> x(a.begin(), a.end()), y(b.begin(), b.end());
  std::sort(x.begin(), x.end());
  std::sort(y.begin(), y.end());
  const double na = static_cast<double>(x.size()), nb = static_cast<double>(y.size());
  std::size_t i = 0, j = 0;
  double prev = std::min(x.front(), y.front());
  double total = 0.0;
  while (i < x.size() || j < y.size()) {
    const double next = j >= y.size() || (i < x.size() && x[i] <= y[j]) ? x[i] : y[j];
    total += std::abs(static_cast<double>(i) / na - static_cast<double>(j) / nb) * (next - prev);
    prev = next;
    while (i < x.size() && x[i] == next) ++i;
    while (j < y.size() && y[j] == next) ++j;
  }
  return total;
}

enum class Pairing {
  NearestReal,  // each fake beat against its Euclidean-nearest real beat
  MeanVsMean,   // the mean fake beat against the mean real beat
};

inline std::string_view to_string(Pairing p) { return p == Pairing::NearestReal ? "nearest-real" : "mean-vs-mean"; }

struct PairedErrors {
  double rmse = 0.0;
  double mae = 0.0;
  double mse = 0.0;
  std::vector<std::size_t> match;  // nearest real index per fake beat (NearestReal only)
};

using Beats = std::vector<std::vector<double>>;

inline void require_same_length(const Beats& real, const Beats& fake) {
  if (real.empty() || fake.empty()) fail(ErrorCode::EmptySet, "paired errors need non-empty real and fake sets");
  const auto n = real.front().size();
  for (const auto* set : {&real, &fake}) {
    for (const auto& b : *set) {
      if (b.size() != n) fail(ErrorCode::ShapeMismatch, "beats differ in length");
    }
  }
}

/// Index of the real beat closest to `x` in Euclidean distance (first on ties).
inline std::size_t nearest(const Beats& real, std::span<const double> x) {
  std::size_t best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (std::size_t r = 0; r < real.size(); ++r) {
    double d = 0.0;
    for (std::size_t i = 0; i < x.size() && d < best_d; ++i) {
      const double e = x[i] - real[r][i];
      d += e * e;
    }
    if (d < best_d) {
      best_d = d;
      best = r;
    }
  }
  return best;
}

inline std::vector<double> mean_beat(const Beats& set) {
  std::vector<double> m(set.front().size(), 0.0);
  for (const auto& b : set) {
    for (std::size_t i = 0; i < m.size(); ++i) m[i] += b[i];
  }
  for (auto& v : m) v /= static_cast<double>(set.size());
  return m;
}

/// Coordinate-wise errors over all matched pairs; rmse = sqrt(mse).
inline PairedErrors paired_errors(const Beats& real, const Beats& fake, Pairing pairing = Pairing::NearestReal) {
  require_same_length(real, fake);
  PairedErrors out;
  double se = 0.0, ae = 0.0;
  std::size_t count = 0;
  auto accumulate = [&](std::span<const double> f, std::span<const double> r) {
    for (std::size_t i = 0; i < f.size(); ++i) {
      const double e = f[i] - r[i];
      se += e * e;
      ae += std::abs(e);
    }
    count += f.size();
  };
  if (pairing == Pairing::NearestReal) {
    for (const auto& f : fake) {
      const auto r = nearest(real, f);
      out.match.push_back(r);
      accumulate(f, real[r]);
    }
  } else {
    accumulate(mean_beat(fake), mean_beat(real));
  }
  out.mse = se / static_cast<double>(count);
  out.mae = ae / static_cast<double>(count);
  out.rmse = std::sqrt(out.mse);
  return out;
}

/// Mean DTW distance between each fake beat and its nearest real beat.
inline double mean_nearest_dtw(const Beats& real, const Beats& fake) {
  const auto pe = paired_errors(real, fake, Pairing::NearestReal);
  double total = 0.0;
  for (std::size_t i = 0; i < fake.size(); ++i) total += dtw_distance(fake[i], real[pe.match[i]]);
  return total / static_cast<double>(fake.size());
}

struct ClassMetrics {
  int label = 0;
  double rmse = 0.0;
  double mae = 0.0;
  double mse = 0.0;
  double emd = 0.0;
  double dtw = 0.0;
  std::size_t n_real = 0;
  std::size_t n_fake = 0;
};

struct MetricsReport {
  Pairing pairing = Pairing::NearestReal;
  std::vector<ClassMetrics> classes;
};

inline Beats amplitudes_of(const BeatDataset& data, int label) {
  Beats out;
  for (const auto& b : data.beats) {
    if (b.label == label) out.push_back(b.amp);
  }
  return out;
}

inline ClassMetrics evaluate_class(const Beats& real, const Beats& fake, int label, Pairing pairing = Pairing::NearestReal) {
  const auto pe = paired_errors(real, fake, pairing);
  ClassMetrics m;
  m.label = label;
  m.rmse = pe.rmse;
  m.mae = pe.mae;
  m.mse = pe.mse;
  m.n_real = real.size();
  m.n_fake = fake.size();
  std::vector<double> pooled_real, pooled_fake;
  for (const auto& b : real) pooled_real.insert(pooled_real.end(), b.begin(), b.end());
  for (const auto& b : fake) pooled_fake.insert(pooled_fake.end(), b.begin(), b.end());
  m.emd = emd_1d(pooled_real, pooled_fake);
  if (pairing == Pairing::NearestReal) {
    double total = 0.0;
    for (std::size_t i = 0; i < fake.size(); ++i) total += dtw_distance(fake[i], real[pe.match[i]]);
    m.dtw = total / static_cast<double>(fake.size());
  } else {
    m.dtw = dtw_distance(mean_beat(fake), mean_beat(real));
  }
  return m;
}

/// Per-class report for every class present in the fake set.
inline MetricsReport evaluate_sets(const BeatDataset& real, const BeatDataset& fake, Pairing pairing = Pairing::NearestReal) {
  MetricsReport report;
  report.pairing = pairing;
  for (int l = 0; l < kNumClasses; ++l) {
    const auto f = amplitudes_of(fake, l);
    if (f.empty()) continue;
    const auto r = amplitudes_of(real, l);
    if (r.empty()) fail(ErrorCode::EmptySet, std::string("no real beats of class ") + class_symbol(l));
    report.classes.push_back(evaluate_class(r, f, l, pairing));
  }
  if (report.classes.empty()) fail(ErrorCode::EmptySet, "fake set is empty");
  return report;
}

// ------------------------------------------------------------- output

inline std::string report_csv(const MetricsReport& r) {
  std::ostringstream out;
  out << "# pairing: " << to_string(r.pairing) << "; emd over pooled amplitudes; dtw on amplitude rows\n";
  out << "class,metric,value,n_real,n_fake\n";
  for (const auto& c : r.classes) {
    const std::pair<const char*, double> rows[] = {{"rmse", c.rmse}, {"mae", c.mae}, {"mse", c.mse}, {"emd", c.emd}, {"dtw", c.dtw}};
    for (const auto& [name, v] : rows) {
      out << class_symbol(c.label) << ',' << name << ',' << io::format_real(v) << ',' << c.n_real << ',' << c.n_fake << '\n';
    }
  }
  return out.str();
}

inline io::json report_json(const MetricsReport& r) {
  io::json classes = io::json::array();
  for (const auto& c : r.classes) {
    classes.push_back({{"class", std::string(1, class_symbol(c.label))},
                       {"rmse", c.rmse},
                       {"mae", c.mae},
                       {"mse", c.mse},
                       {"emd", c.emd},
                       {"dtw", c.dtw},
                       {"n_real", c.n_real},
                       {"n_fake", c.n_fake}});
  }
  return {{"version", 1}, {"pairing", std::string(to_string(r.pairing))}, {"classes", classes}};
}

}  // namespace ssmgan::metrics
