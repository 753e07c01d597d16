#pragma once

// Augmentation experiment: the same classifier trained on real beats only
// (setting 1) and on real plus generated beats (setting 4), scored on the
// same real test set.

#include <array>
#include <optional>
#include <sstream>
#include <tuple>
#include <string>

#include "ssmgan/classifier.hpp"
#include "ssmgan/gan.hpp"

namespace ssmgan::experiment {

using Counts = std::array<std::size_t, kNumClasses>;

struct SettingResult {
  int setting = 1;
  clf::Evaluation evaluation;
  std::size_t train_size = 0;
};

struct ExperimentReport {
  SettingResult setting1;
  SettingResult setting4;
  Counts synthetic{};
  Counts real_train{};
  std::size_t test_size = 0;
};

/// Counts that bring every class up to the majority class size.
inline Counts balancing_counts(const BeatDataset& train) {
  const auto c = train.class_counts();
  const auto majority = *std::max_element(c.begin(), c.end());
  Counts out{};
  for (std::size_t l = 0; l < c.size(); ++l) out[l] = majority - c[l];
  return out;
}

/// Real training beats followed by `counts[l]` generated beats of each
/// class, regridded onto the uniform time grid.
inline BeatDataset augmented_training_set(const BeatDataset& train, gan::TrainState& state, const ShapeModelSet& models,
                                          const Counts& counts, std::uint64_t seed) {
  BeatDataset out = train;
  for (int l = 0; l < kNumClasses; ++l) {
    const auto n = counts[static_cast<std::size_t>(l)];
    if (n == 0) continue;
    const auto beats = gan::to_beats(gan::generate(state, models, l, n, seed));
    out.beats.insert(out.beats.end(), beats.beats.begin(), beats.beats.end());
  }
  return out;
}

inline ExperimentReport run_experiment(const BeatDataset& train, const BeatDataset& test, const ShapeModelSet& models,
                                       gan::TrainState& state, std::optional<Counts> counts, std::uint64_t seed,
                                       const clf::ClassifierConfig& config = {}) {
  gan::check_compatible(state, models);
  ExperimentReport r;
  r.synthetic = counts ? *counts : balancing_counts(train);
  r.real_train = train.class_counts();
  r.test_size = test.beats.size();

  const auto p1 = clf::train_classifier(train, config, seed);
  r.setting1 = {1, clf::evaluate_classifier(p1, test), train.beats.size()};

  const auto augmented = augmented_training_set(train, state, models, r.synthetic, seed);
  const auto p4 = clf::train_classifier(augmented, config, seed);
  r.setting4 = {4, clf::evaluate_classifier(p4, test), augmented.beats.size()};
  return r;
}

// ------------------------------------------------------------- output

inline std::string report_csv(const ExperimentReport& r) {
  std::ostringstream out;
  out << "# reduced baseline classifier; setting 1 = real only, setting 4 = real + generated\n";
  out << "setting,class,metric,value,train_size,synthetic_added,flag\n";
  for (const auto* s : {&r.setting1, &r.setting4}) {
    for (int l = 0; l < kNumClasses; ++l) {
      const auto& c = s->evaluation.classes[static_cast<std::size_t>(l)];
      const auto added = s->setting == 4 ? r.synthetic[static_cast<std::size_t>(l)] : 0;
      const std::tuple<const char*, double, bool> rows[] = {
          {"precision", c.precision, c.precision_undefined}, {"recall", c.recall, c.recall_undefined}, {"f1", c.f1, false}};
      for (const auto& [name, v, undefined] : rows) {
        out << s->setting << ',' << class_symbol(l) << ',' << name << ',' << io::format_real(v) << ',' << s->train_size << ','
            << added << ',' << (undefined ? "undefined" : "") << '\n';
      }
    }
  }
  return out.str();
}

inline io::json report_json(const ExperimentReport& r) {
  auto setting = [&](const SettingResult& s) {
    io::json classes = io::json::array();
    for (int l = 0; l < kNumClasses; ++l) {
      const auto& c = s.evaluation.classes[static_cast<std::size_t>(l)];
      classes.push_back({{"class", std::string(1, class_symbol(l))},
                         {"precision", c.precision},
                         {"recall", c.recall},
                         {"f1", c.f1},
                         {"precision_undefined", c.precision_undefined},
                         {"recall_undefined", c.recall_undefined},
                         {"support", c.support}});
    }
    return io::json{{"setting", s.setting}, {"train_size", s.train_size}, {"accuracy", s.evaluation.accuracy}, {"classes", classes}};
  };
  return {{"version", 1},
          {"classifier", "reduced baseline"},
          {"test_size", r.test_size},
          {"real_train", r.real_train},
          {"synthetic", r.synthetic},
          {"settings", {setting(r.setting1), setting(r.setting4)}}};
}

}  // namespace ssmgan::experiment
