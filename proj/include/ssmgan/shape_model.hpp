#pragma once

// Statistical shape models of 2-D beat shapes. For every class the
// training beats are clustered, each cluster is aligned (DTW against a
// medoid reference), the aligned beats are resampled at homologous
// positions and a PCA basis is fitted on the concatenated
// [time | amplitude] rows.

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/SVD>

#include "ssmgan/dtw.hpp"
#include "ssmgan/error.hpp"
#include "ssmgan/kmeans.hpp"
#include "ssmgan/preprocess.hpp"
#include "ssmgan/serialize.hpp"

namespace ssmgan {

// ------------------------------------------------------------- alignment

struct AlignmentOptions {
  int rounds = 2;
  std::size_t medoid_candidates = 64;  // medoid search runs on an evenly spaced subset
};

struct AlignmentResult {
  std::size_t reference_length = 0;
  std::vector<double> reference;               // amplitude of the final reference
  std::vector<std::vector<double>> positions;  // per signal, one fractional source index per reference index
};

/// Fractional source index for every reference index: the mean of the
/// source indices the warping path pairs with it.
inline std::vector<double> warp_positions(std::span<const double> reference, std::span<const double> signal) {
  const auto path = dtw_path(reference, signal, SquaredCost{});
  std::vector<double> sum(reference.size(), 0.0);
  std::vector<int> count(reference.size(), 0);
  for (const auto& [i, j] : path) {
    sum[i] += static_cast<double>(j);
    ++count[i];
  }
  for (std::size_t i = 0; i < sum.size(); ++i) sum[i] /= count[i];
  return sum;
}

inline std::vector<double> identity_positions(std::size_t length) {
  std::vector<double> p(length);
  std::iota(p.begin(), p.end(), 0.0);
  return p;
}

/// Linear interpolation of `row` at fractional index `pos`.
inline double interpolate_at(std::span<const double> row, double pos) {
  if (pos <= 0.0) return row.front();
  const auto last = static_cast<double>(row.size() - 1);
  if (pos >= last) return row.back();
  const auto i = static_cast<std::size_t>(pos);
  const double frac = pos - static_cast<double>(i);
  if (frac == 0.0) return row[i];
  return row[i] + frac * (row[i + 1] - row[i]);
}

struct ShapeRows {
  std::vector<double> time;
  std::vector<double> amp;
};

/// Both rows of a beat resampled at the given positions.
inline ShapeRows resample_homologous(std::span<const double> time, std::span<const double> amp,
                                     std::span<const double> positions) {
  if (time.size() != amp.size() || time.empty()) fail(ErrorCode::ShapeMismatch, "beat rows differ in length");
  ShapeRows out;
  out.time.reserve(positions.size());
  out.amp.reserve(positions.size());
  for (double p : positions) {
    out.time.push_back(interpolate_at(time, p));
    out.amp.push_back(interpolate_at(amp, p));
  }
  return out;
}

namespace detail {

inline std::vector<std::size_t> medoid_candidates(std::size_t n, std::size_t cap) {
  std::vector<std::size_t> idx;
  if (n <= cap || cap == 0) {
    idx.resize(n);
    std::iota(idx.begin(), idx.end(), std::size_t{0});
  } else {
    for (std::size_t i = 0; i < cap; ++i) idx.push_back(i * n / cap);
  }
  return idx;
}

/// Index (into `signals`) of the candidate with the smallest summed DTW
/// cost to the other candidates. Ties go to the lower index.
inline std::size_t dtw_medoid(const std::vector<std::vector<double>>& signals, std::size_t cap) {
  const auto cand = medoid_candidates(signals.size(), cap);
  std::vector<double> total(cand.size(), 0.0);
  for (std::size_t a = 0; a < cand.size(); ++a) {
    for (std::size_t b = a + 1; b < cand.size(); ++b) {
      const double d = dtw_squared_total(signals[cand[a]], signals[cand[b]]);
      total[a] += d;
      total[b] += d;
    }
  }
  const auto best = std::min_element(total.begin(), total.end()) - total.begin();
  return cand[static_cast<std::size_t>(best)];
}

}  // namespace detail

/// DTW-to-medoid alignment of one cluster's amplitude rows. Round one
/// aligns to the medoid of the raw signals; each later round picks the
/// medoid of the aligned signals as the new reference and re-aligns the
/// original signals to it.
inline AlignmentResult align_cluster(const std::vector<std::vector<double>>& amps, const AlignmentOptions& opts = {}) {
  AlignmentResult r;
  if (amps.empty()) return r;
  const std::size_t T = amps.front().size();
  r.reference_length = T;
  if (amps.size() == 1) {
    r.reference = amps.front();
    r.positions.push_back(identity_positions(T));
    return r;
  }
  r.reference = amps[detail::dtw_medoid(amps, opts.medoid_candidates)];
  for (int round = 0; round < std::max(1, opts.rounds); ++round) {
    if (round > 0) {
      std::vector<std::vector<double>> aligned;
      aligned.reserve(amps.size());
      for (std::size_t i = 0; i < amps.size(); ++i) {
        std::vector<double> a;
        a.reserve(T);
        for (double p : r.positions[i]) a.push_back(interpolate_at(amps[i], p));
        aligned.push_back(std::move(a));
      }
      r.reference = aligned[detail::dtw_medoid(aligned, opts.medoid_candidates)];
    }
    r.positions.clear();
    for (const auto& a : amps) r.positions.push_back(warp_positions(r.reference, a));
  }
  return r;
}

// ------------------------------------------------------------------- PCA

struct ShapeModel {
  Eigen::VectorXd mean;            // length 2T: time values then amplitude values
  Eigen::MatrixXd basis;           // B x 2T, orthonormal rows
  Eigen::VectorXd eigenvalues;     // length B, non-increasing
  double total_variance = 0.0;     // sum of all sample-covariance eigenvalues
  std::size_t num_samples = 0;

  // Training provenance, used to rebuild the aligned real rows.
  std::vector<std::size_t> members;  // indices into the training dataset
  std::vector<double> reference;     // amplitude reference the members were aligned to

  int rank() const { return static_cast<int>(basis.rows()); }

  Eigen::VectorXd project(const Eigen::VectorXd& x) const { return basis * (x - mean); }
  Eigen::VectorXd reconstruct(const Eigen::VectorXd& coeffs) const { return mean + basis.transpose() * coeffs; }
};

struct PcaOptions {
  double variance_fraction = 0.95;  // >= 1 keeps every available component
};

/// PCA of the rows of `X` through the SVD of the centered matrix.
/// Eigenvalues are s_i^2 / (N - 1); the retained count B is the smallest
/// reaching the requested explained variance, clamped to [1, N - 1].
inline ShapeModel pca_fit(const Eigen::MatrixXd& X, const PcaOptions& opts = {}) {
  const auto n = X.rows();
  if (n < 2) fail(ErrorCode::DegenerateCluster, "PCA needs at least two signals, got " + std::to_string(n));
  ShapeModel m;
  m.num_samples = static_cast<std::size_t>(n);
  m.mean = X.colwise().mean().transpose();
  const Eigen::MatrixXd centered = X.rowwise() - m.mean.transpose();
  Eigen::BDCSVD<Eigen::MatrixXd> svd(centered, Eigen::ComputeThinV);
  const Eigen::VectorXd eig = svd.singularValues().array().square() / static_cast<double>(n - 1);
  m.total_variance = eig.sum();

  const auto available = std::min<Eigen::Index>(eig.size(), n - 1);
  Eigen::Index B = available;
  if (opts.variance_fraction < 1.0 && m.total_variance > 0.0) {
    double cum = 0.0;
    for (Eigen::Index i = 0; i < available; ++i) {
      cum += eig[i];
      if (cum >= opts.variance_fraction * m.total_variance) {
        B = i + 1;
        break;
      }
    }
  } else if (m.total_variance == 0.0) {
    B = 1;
  }
  B = std::clamp<Eigen::Index>(B, 1, std::max<Eigen::Index>(1, available));

  m.eigenvalues = eig.head(B);
  m.basis = svd.matrixV().leftCols(B).transpose();
  for (Eigen::Index r = 0; r < B; ++r) {
    for (Eigen::Index c = 0; c < m.basis.cols(); ++c) {
      if (std::abs(m.basis(r, c)) > 1e-12) {
        if (m.basis(r, c) < 0) m.basis.row(r) *= -1.0;
        break;
      }
    }
  }
  return m;
}

// ------------------------------------------------------------- model set

struct ClassModels {
  std::vector<ShapeModel> clusters;  // empty when the class is absent
};

struct ShapeModelSet {
  int K = 5;  // requested clusters per class
  int T = kBeatLength;
  double variance_fraction = 0.95;
  std::vector<ClassModels> classes = std::vector<ClassModels>(kNumClasses);

  int dim() const { return 2 * T; }

  bool has_class(int l) const {
    return l >= 0 && l < static_cast<int>(classes.size()) && !classes[static_cast<std::size_t>(l)].clusters.empty();
  }

  int clusters_in(int l) const { return has_class(l) ? static_cast<int>(classes[static_cast<std::size_t>(l)].clusters.size()) : 0; }

  const ShapeModel& model(int l, int k) const {
    if (!has_class(l) || k < 0 || k >= clusters_in(l)) fail(ErrorCode::InvalidArgument, "no shape model for that class/cluster");
    return classes[static_cast<std::size_t>(l)].clusters[static_cast<std::size_t>(k)];
  }

  /// max over (c, k) of B^c_k.
  int max_rank() const {
    int b = 0;
    for (const auto& c : classes) {
      for (const auto& m : c.clusters) b = std::max(b, m.rank());
    }
    return b;
  }

  /// M_l: one cluster mean per row (K_l x 2T).
  Eigen::MatrixXd means(int l) const {
    Eigen::MatrixXd M(clusters_in(l), dim());
    for (int k = 0; k < clusters_in(l); ++k) M.row(k) = model(l, k).mean.transpose();
    return M;
  }

  /// Slice k of the padded tensor: maxB x 2T with rows beyond B^l_k zero.
  Eigen::MatrixXd padded_basis(int l, int k) const {
    const auto& m = model(l, k);
    Eigen::MatrixXd A = Eigen::MatrixXd::Zero(max_rank(), dim());
    A.topRows(m.rank()) = m.basis;
    return A;
  }

  /// X_fake = M_l + W A_l for W of shape K x maxB. Rows of W beyond the
  /// class's cluster count are ignored.
  Eigen::MatrixXd synthesize(const Eigen::MatrixXd& W, int l) const {
    if (W.rows() < clusters_in(l) || W.cols() != max_rank()) fail(ErrorCode::ShapeMismatch, "weight matrix must be K x maxB");
    if (!W.allFinite()) fail(ErrorCode::NonFiniteValue, "non-finite weights");
    Eigen::MatrixXd X = means(l);
    for (int k = 0; k < clusters_in(l); ++k) X.row(k) += W.row(k) * padded_basis(l, k);
    return X;
  }
};

/// Distance from `x` to the affine span of model (l, k).
inline double affine_span_residual(const ShapeModel& m, const Eigen::VectorXd& x) {
  const Eigen::VectorXd d = x - m.mean;
  return (d - m.basis.transpose() * (m.basis * d)).cwiseAbs().maxCoeff();
}

/// Converts a synthesized [time | amplitude] row into a beat on the
/// uniform time grid. The time row is made monotone by a running max.
inline Heartbeat regrid_shape(std::span<const double> row, int label) {
  const std::size_t T = row.size() / 2;
  std::vector<double> t(row.begin(), row.begin() + static_cast<std::ptrdiff_t>(T));
  std::span<const double> a = row.subspan(T, T);
  for (std::size_t i = 1; i < T; ++i) t[i] = std::max(t[i], t[i - 1]);
  Heartbeat b;
  b.label = label;
  b.time = uniform_time_grid(T);
  b.amp.resize(T);
  std::size_t j = 0;
  for (std::size_t i = 0; i < T; ++i) {
    const double g = b.time[i];
    if (g <= t.front()) {
      b.amp[i] = a.front();
      continue;
    }
    if (g >= t.back()) {
      b.amp[i] = a.back();
      continue;
    }
    while (j + 1 < T && t[j + 1] < g) ++j;
    const double span = t[j + 1] - t[j];
    const double f = span > 0 ? (g - t[j]) / span : 0.0;
    b.amp[i] = a[j] + f * (a[j + 1] - a[j]);
  }
  return b;
}

// ------------------------------------------------------------- building

struct BuildOptions {
  int K = 5;
  double variance_fraction = 0.95;
  std::uint64_t seed = 0;
  AlignmentOptions alignment;
  KMeansOptions kmeans;
};

struct BuildReport {
  std::array<int, kNumClasses> requested_k{};
  std::array<int, kNumClasses> effective_k{};  // after the size guard and merges
  std::array<int, kNumClasses> merged_clusters{};
};

inline Eigen::VectorXd beat_row(std::span<const double> time, std::span<const double> amp) {
  Eigen::VectorXd v(static_cast<Eigen::Index>(time.size() + amp.size()));
  for (std::size_t i = 0; i < time.size(); ++i) v[static_cast<Eigen::Index>(i)] = time[i];
  for (std::size_t i = 0; i < amp.size(); ++i) v[static_cast<Eigen::Index>(time.size() + i)] = amp[i];
  return v;
}

/// Aligned [time | amplitude] row of one beat against a reference.
inline Eigen::VectorXd aligned_row(const Heartbeat& beat, std::span<const double> reference) {
  const auto pos = warp_positions(reference, beat.amp);
  const auto s = resample_homologous(beat.time, beat.amp, pos);
  return beat_row(s.time, s.amp);
}

/// Aligned rows of the training members of model (l, k), one per row.
inline Eigen::MatrixXd member_rows(const ShapeModelSet& set, const BeatDataset& train, int l, int k) {
  const auto& m = set.model(l, k);
  Eigen::MatrixXd X(static_cast<Eigen::Index>(m.members.size()), set.dim());
  for (std::size_t i = 0; i < m.members.size(); ++i) {
    if (m.members[i] >= train.beats.size()) fail(ErrorCode::InvalidArgument, "shape model does not match training set");
    X.row(static_cast<Eigen::Index>(i)) = aligned_row(train.beats[m.members[i]], m.reference).transpose();
  }
  return X;
}

namespace detail {

// Clusters with fewer than two members are folded into the nearest
// remaining cluster (centroid distance); indices are then compacted.
inline int merge_small_clusters(std::vector<int>& assign, const Eigen::MatrixXd& centroids) {
  const auto k = static_cast<int>(centroids.rows());
  std::vector<int> size(static_cast<std::size_t>(k), 0);
  for (int a : assign) ++size[static_cast<std::size_t>(a)];
  std::vector<int> target(static_cast<std::size_t>(k));
  std::iota(target.begin(), target.end(), 0);
  int merged = 0;
  for (int c = 0; c < k; ++c) {
    if (size[static_cast<std::size_t>(c)] >= 2 || size[static_cast<std::size_t>(c)] == 0) continue;
    int best = -1;
    double best_d = 0.0;
    for (int o = 0; o < k; ++o) {
      if (o == c || size[static_cast<std::size_t>(o)] < 2) continue;
      const double d = (centroids.row(c) - centroids.row(o)).squaredNorm();
      if (best < 0 || d < best_d) {
        best = o;
        best_d = d;
      }
    }
    if (best < 0) continue;
    target[static_cast<std::size_t>(c)] = best;
    size[static_cast<std::size_t>(best)] += size[static_cast<std::size_t>(c)];
    size[static_cast<std::size_t>(c)] = 0;
    ++merged;
  }
  std::vector<int> compact(static_cast<std::size_t>(k), -1);
  int next = 0;
  for (int c = 0; c < k; ++c) {
    if (size[static_cast<std::size_t>(c)] > 0) compact[static_cast<std::size_t>(c)] = next++;
  }
  for (auto& a : assign) a = compact[static_cast<std::size_t>(target[static_cast<std::size_t>(a)])];
  return merged;
}

}  // namespace detail

/// Per class: K-Means, alignment, homologous resampling and PCA. A class
/// with n_c < 2K beats gets K reduced to floor(n_c / 2).
inline ShapeModelSet build_shape_models(const BeatDataset& train, const BuildOptions& opts = {},
                                        BuildReport* report = nullptr) {
  if (opts.K < 1) fail(ErrorCode::InvalidArgument, "K must be positive");
  if (train.beats.empty()) fail(ErrorCode::EmptyClass, "training set is empty");
  ShapeModelSet set;
  set.K = opts.K;
  set.T = static_cast<int>(train.beat_length());
  set.variance_fraction = opts.variance_fraction;
  BuildReport rep;

  for (int c = 0; c < kNumClasses; ++c) {
    const auto idx = train.indices_of(c);
    rep.requested_k[static_cast<std::size_t>(c)] = opts.K;
    if (idx.empty()) continue;
    if (idx.size() < 2) fail(ErrorCode::EmptyClass, std::string("class ") + class_symbol(c) + " has fewer than two beats");
    const int k_c = std::min<int>(opts.K, static_cast<int>(idx.size() / 2));

    Eigen::MatrixXd pts(static_cast<Eigen::Index>(idx.size()), 2 * set.T);
    for (std::size_t i = 0; i < idx.size(); ++i) {
      const auto& b = train.beats[idx[i]];
      if (static_cast<int>(b.length()) != set.T) fail(ErrorCode::ShapeMismatch, "beats differ in length");
      pts.row(static_cast<Eigen::Index>(i)) = beat_row(b.time, b.amp).transpose();
    }
    auto km = kmeans(pts, k_c, opts.seed + static_cast<std::uint64_t>(c), opts.kmeans);
    rep.merged_clusters[static_cast<std::size_t>(c)] = detail::merge_small_clusters(km.assignment, km.centroids);
    const int k_eff = *std::max_element(km.assignment.begin(), km.assignment.end()) + 1;
    rep.effective_k[static_cast<std::size_t>(c)] = k_eff;

    auto& cls = set.classes[static_cast<std::size_t>(c)];
    cls.clusters.resize(static_cast<std::size_t>(k_eff));
    for (int k = 0; k < k_eff; ++k) {
      std::vector<std::size_t> members;
      std::vector<std::vector<double>> amps;
      for (std::size_t i = 0; i < idx.size(); ++i) {
        if (km.assignment[i] != k) continue;
        members.push_back(idx[i]);
        amps.push_back(train.beats[idx[i]].amp);
      }
      const auto al = align_cluster(amps, opts.alignment);
      Eigen::MatrixXd X(static_cast<Eigen::Index>(members.size()), 2 * set.T);
      for (std::size_t i = 0; i < members.size(); ++i) {
        const auto& b = train.beats[members[i]];
        const auto s = resample_homologous(b.time, b.amp, al.positions[i]);
        X.row(static_cast<Eigen::Index>(i)) = beat_row(s.time, s.amp).transpose();
      }
      auto model = pca_fit(X, {opts.variance_fraction});
      model.members = std::move(members);
      model.reference = al.reference;
      cls.clusters[static_cast<std::size_t>(k)] = std::move(model);
    }
  }
  if (report) *report = rep;
  return set;
}

// ----------------------------------------------------------- persistence

inline io::json shape_models_to_json(const ShapeModelSet& set) {
  auto vec = [](const Eigen::VectorXd& v) { return io::encode_reals(std::vector<double>(v.data(), v.data() + v.size())); };
  io::json j;
  j["version"] = 1;
  j["K"] = set.K;
  j["T"] = set.T;
  j["variance_fraction"] = io::format_real(set.variance_fraction);
  io::json classes = io::json::array();
  for (int c = 0; c < static_cast<int>(set.classes.size()); ++c) {
    io::json clusters = io::json::array();
    for (const auto& m : set.classes[static_cast<std::size_t>(c)].clusters) {
      io::json eigvecs = io::json::array();
      for (Eigen::Index r = 0; r < m.basis.rows(); ++r) eigvecs.push_back(vec(m.basis.row(r).transpose()));
      clusters.push_back({{"mean", vec(m.mean)},
                          {"eigvecs", eigvecs},
                          {"eigvals", vec(m.eigenvalues)},
                          {"total_variance", io::format_real(m.total_variance)},
                          {"num_samples", m.num_samples},
                          {"members", m.members},
                          {"reference", io::encode_reals(m.reference)}});
    }
    classes.push_back({{"label", std::string(1, class_symbol(c))}, {"clusters", clusters}});
  }
  j["classes"] = classes;
  return j;
}

inline ShapeModelSet shape_models_from_json(const io::json& j) {
  io::require_version(j, 1, "shape model");
  ShapeModelSet set;
  set.K = j.at("K").get<int>();
  set.T = j.at("T").get<int>();
  set.variance_fraction = io::parse_real(j.at("variance_fraction"));
  const auto& classes = j.at("classes");
  if (classes.size() != static_cast<std::size_t>(kNumClasses)) fail(ErrorCode::FormatError, "expected three classes");
  auto vec = [](const io::json& a) {
    const auto v = io::decode_reals(a);
    return Eigen::VectorXd(Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size())));
  };
  for (std::size_t c = 0; c < classes.size(); ++c) {
    for (const auto& jc : classes[c].at("clusters")) {
      ShapeModel m;
      m.mean = vec(jc.at("mean"));
      if (m.mean.size() != 2 * set.T) fail(ErrorCode::FormatError, "mean length must be 2T");
      const auto& ev = jc.at("eigvecs");
      m.basis.resize(static_cast<Eigen::Index>(ev.size()), 2 * set.T);
      for (std::size_t r = 0; r < ev.size(); ++r) {
        const auto row = vec(ev[r]);
        if (row.size() != 2 * set.T) fail(ErrorCode::FormatError, "eigenvector length must be 2T");
        m.basis.row(static_cast<Eigen::Index>(r)) = row.transpose();
      }
      m.eigenvalues = vec(jc.at("eigvals"));
      if (m.eigenvalues.size() != m.basis.rows()) fail(ErrorCode::FormatError, "eigenvalue count mismatch");
      m.total_variance = io::parse_real(jc.at("total_variance"));
      m.num_samples = jc.at("num_samples").get<std::size_t>();
      m.members = jc.at("members").get<std::vector<std::size_t>>();
      m.reference = io::decode_reals(jc.at("reference"));
      set.classes[c].clusters.push_back(std::move(m));
    }
  }
  return set;
}

}  // namespace ssmgan
