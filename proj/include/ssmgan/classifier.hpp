#pragma once

// Reduced 1-D convolutional beat classifier over the amplitude channel:
// conv(k5, 8) -> relu -> maxpool(2), twice, then FC(32) -> relu -> FC(3).

#include <array>
#include <cstdint>
#include <numeric>
#include <string>
#include <vector>

#include "ssmgan/layers.hpp"
#include "ssmgan/optim.hpp"
#include "ssmgan/preprocess.hpp"

namespace ssmgan::clf {

using ad::Tensor;

struct ClassifierConfig {
  std::size_t channels = 8;
  std::size_t kernel = 5;
  std::size_t pool = 2;
  std::size_t hidden = 32;
  int epochs = 30;
  std::size_t batch_size = 32;
  double learning_rate = 1e-3;
  std::vector<int> required_classes{0, 1, 2};
};

struct ClassifierParams {
  Tensor conv1_w, conv1_b;  // (C, 1, k), (C)
  Tensor conv2_w, conv2_b;  // (C, C, k), (C)
  nn::Linear fc1;
  nn::Linear fc2;
  std::size_t input_length = 0;

  std::vector<nn::ParamRef> parameters() {
    return {{"conv1.weight", &conv1_w}, {"conv1.bias", &conv1_b}, {"conv2.weight", &conv2_w}, {"conv2.bias", &conv2_b},
            {"fc1.weight", &fc1.weight},  {"fc1.bias", &fc1.bias},   {"fc2.weight", &fc2.weight},  {"fc2.bias", &fc2.bias}};
  }

  std::vector<Tensor> tensors() {
    std::vector<Tensor> t;
    for (auto& p : parameters()) t.push_back(*p.tensor);
    return t;
  }
};

inline std::size_t features_after(std::size_t length, const ClassifierConfig& c) {
  for (int i = 0; i < 2; ++i) {
    if (length < c.kernel) fail(ErrorCode::ShapeMismatch, "beat too short for the classifier");
    length = (length - c.kernel + 1) / c.pool;
  }
  return length * c.channels;
}

inline ClassifierParams init_classifier(std::size_t input_length, const ClassifierConfig& c, std::uint64_t seed) {
  Rng rng = Rng::keyed(seed, 0, 0x434C46);
  ClassifierParams p;
  p.input_length = input_length;
  const double b1 = 1.0 / std::sqrt(static_cast<double>(c.kernel));
  const double b2 = 1.0 / std::sqrt(static_cast<double>(c.channels * c.kernel));
  p.conv1_w = nn::uniform_param({c.channels, 1, c.kernel}, b1, rng);
  p.conv1_b = nn::uniform_param({c.channels}, b1, rng);
  p.conv2_w = nn::uniform_param({c.channels, c.channels, c.kernel}, b2, rng);
  p.conv2_b = nn::uniform_param({c.channels}, b2, rng);
  p.fc1 = nn::Linear::init(features_after(input_length, c), c.hidden, rng);
  p.fc2 = nn::Linear::init(c.hidden, kNumClasses, rng);
  return p;
}

/// Logits (B, 3) for amplitudes x of shape (B, L).
inline Tensor classifier_logits(const ClassifierParams& p, const Tensor& x, std::size_t pool = 2) {
  if (x.rank() != 2 || x.dim(1) != p.input_length) fail(ErrorCode::ShapeMismatch, "classifier input must be (batch, beat length)");
  Tensor h = ad::reshape(x, {x.dim(0), 1, x.dim(1)});
  h = ad::maxpool1d(ad::relu(ad::conv1d(h, p.conv1_w, p.conv1_b)), pool);
  h = ad::maxpool1d(ad::relu(ad::conv1d(h, p.conv2_w, p.conv2_b)), pool);
  h = ad::reshape(h, {h.dim(0), h.dim(1) * h.dim(2)});
  return p.fc2(ad::relu(p.fc1(h)));
}

inline Tensor amplitude_batch(const BeatDataset& data, std::span<const std::size_t> idx) {
  const auto L = data.beat_length();
  std::vector<double> v;
  v.reserve(idx.size() * L);
  for (auto i : idx) v.insert(v.end(), data.beats[i].amp.begin(), data.beats[i].amp.end());
  return Tensor::constant({idx.size(), L}, std::move(v));
}

/// Class probabilities, one simplex row per beat.
inline std::vector<std::array<double, kNumClasses>> predict_proba(const ClassifierParams& p, const BeatDataset& data) {
  ad::NoGradGuard no_grad;
  std::vector<std::array<double, kNumClasses>> out;
  constexpr std::size_t chunk = 256;
  for (std::size_t s = 0; s < data.beats.size(); s += chunk) {
    std::vector<std::size_t> idx(std::min(chunk, data.beats.size() - s));
    std::iota(idx.begin(), idx.end(), s);
    const Tensor probs = ad::softmax(classifier_logits(p, amplitude_batch(data, idx)));
    for (std::size_t i = 0; i < idx.size(); ++i) {
      std::array<double, kNumClasses> row{};
      for (int c = 0; c < kNumClasses; ++c) row[static_cast<std::size_t>(c)] = probs[i * kNumClasses + static_cast<std::size_t>(c)];
      out.push_back(row);
    }
  }
  return out;
}

inline std::vector<int> predict(const ClassifierParams& p, const BeatDataset& data) {
  std::vector<int> labels;
  for (const auto& row : predict_proba(p, data)) {
    labels.push_back(static_cast<int>(std::max_element(row.begin(), row.end()) - row.begin()));
  }
  return labels;
}

/// Adam on mean cross-entropy over shuffled minibatches, a fixed number of
/// epochs. Deterministic under seed.
inline ClassifierParams train_classifier(const BeatDataset& data, const ClassifierConfig& c, std::uint64_t seed) {
  if (data.beats.empty()) fail(ErrorCode::EmptyClass, "empty training set");
  const auto counts = data.class_counts();
  for (int l : c.required_classes) {
    if (l < 0 || l >= kNumClasses || counts[static_cast<std::size_t>(l)] == 0) {
      fail(ErrorCode::EmptyClass, std::string("training set has no beats of class ") + class_symbol(l));
    }
  }
  ClassifierParams p = init_classifier(data.beat_length(), c, seed);
  nn::Adam opt({c.learning_rate, 0.9, 0.999, 1e-8});
  opt.init(p.parameters());
  std::vector<std::size_t> order(data.beats.size());
  for (int epoch = 0; epoch < c.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng rng = Rng::keyed(seed, static_cast<std::uint64_t>(epoch) + 1, 0x434C46);
    rng.shuffle(order.begin(), order.end());
    for (std::size_t s = 0; s < order.size(); s += c.batch_size) {
      const std::span<const std::size_t> idx(order.data() + s, std::min(c.batch_size, order.size() - s));
      std::vector<int> labels;
      for (auto i : idx) labels.push_back(data.beats[i].label);
      Tensor loss = ad::softmax_cross_entropy(classifier_logits(p, amplitude_batch(data, idx), c.pool), labels);
      opt.step(p.parameters(), ad::backward(loss, p.tensors()));
    }
  }
  return p;
}

// ------------------------------------------------------------ evaluation

struct ClassScores {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  bool precision_undefined = false;  // no beat predicted as this class
  bool recall_undefined = false;     // no beat of this class in the test set
  std::size_t support = 0;
};

struct Evaluation {
  std::array<ClassScores, kNumClasses> classes{};
  std::array<std::array<std::size_t, kNumClasses>, kNumClasses> confusion{};  // [true][predicted]
  double accuracy = 0.0;
};

/// One-vs-rest precision, recall and F1 from true and predicted labels.
/// Undefined rates are reported as 0 with a flag; F1 is 0 when
/// precision + recall is 0.
inline Evaluation score_predictions(const std::vector<int>& truth, const std::vector<int>& predicted) {
  if (truth.size() != predicted.size()) fail(ErrorCode::ShapeMismatch, "label vectors differ in length");
  if (truth.empty()) fail(ErrorCode::EmptySet, "empty test set");
  Evaluation e;
  std::size_t correct = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    ++e.confusion[static_cast<std::size_t>(truth[i])][static_cast<std::size_t>(predicted[i])];
    correct += truth[i] == predicted[i];
  }
  e.accuracy = static_cast<double>(correct) / static_cast<double>(truth.size());
  for (std::size_t c = 0; c < kNumClasses; ++c) {
    std::size_t tp = e.confusion[c][c], pred = 0, actual = 0;
    for (std::size_t o = 0; o < kNumClasses; ++o) {
      pred += e.confusion[o][c];
      actual += e.confusion[c][o];
    }
    auto& s = e.classes[c];
    s.support = actual;
    s.precision_undefined = pred == 0;
    s.recall_undefined = actual == 0;
    s.precision = pred ? static_cast<double>(tp) / static_cast<double>(pred) : 0.0;
    s.recall = actual ? static_cast<double>(tp) / static_cast<double>(actual) : 0.0;
    s.f1 = s.precision + s.recall > 0 ? 2 * s.precision * s.recall / (s.precision + s.recall) : 0.0;
  }
  return e;
}

inline Evaluation evaluate_classifier(const ClassifierParams& p, const BeatDataset& test) {
  if (test.beats.empty()) fail(ErrorCode::EmptySet, "empty test set");
  std::vector<int> truth;
  for (const auto& b : test.beats) truth.push_back(b.label);
  return score_predictions(truth, predict(p, test));
}

inline io::json classifier_to_json(ClassifierParams& p, const ClassifierConfig& c) {
  io::json j = nn::params_to_json(p.parameters(), {});
  j["input_length"] = p.input_length;
  j["config"] = {{"channels", c.channels}, {"kernel", c.kernel}, {"pool", c.pool}, {"hidden", c.hidden}};
  return j;
}

}  // namespace ssmgan::clf
