#pragma once

#include <cstdint>
#include <limits>
#include <vector>

#include <Eigen/Dense>

#include "ssmgan/error.hpp"
#include "ssmgan/rng.hpp"

namespace ssmgan {

struct KMeansOptions {
  int max_iterations = 300;
  int restarts = 30;  // independent k-means++ seedings; the lowest inertia wins
  bool refine = true;  // single-point moves after each Lloyd fixpoint
};

struct KMeansResult {
  std::vector<int> assignment;        // cluster index per point
  Eigen::MatrixXd centroids;          // K x D
  double inertia = 0.0;
  std::vector<double> inertia_trace;  // after every update step of the winning run
  int iterations = 0;
  bool converged = false;             // assignment reached a fixpoint
};

namespace detail {

inline double sq_dist(const Eigen::MatrixXd& a, Eigen::Index i, const Eigen::MatrixXd& b, Eigen::Index j) {
  return (a.row(i) - b.row(j)).squaredNorm();
}

inline Eigen::MatrixXd kmeanspp_seed(const Eigen::MatrixXd& pts, int k, Rng& rng) {
  const auto n = pts.rows();
  Eigen::MatrixXd centers(k, pts.cols());
  centers.row(0) = pts.row(static_cast<Eigen::Index>(rng.index(static_cast<std::uint64_t>(n))));
  std::vector<double> d2(static_cast<std::size_t>(n), std::numeric_limits<double>::infinity());
  for (int c = 1; c < k; ++c) {
    double total = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      d2[static_cast<std::size_t>(i)] = std::min(d2[static_cast<std::size_t>(i)], sq_dist(pts, i, centers, c - 1));
      total += d2[static_cast<std::size_t>(i)];
    }
    Eigen::Index pick = 0;
    if (total > 0.0) {
      double target = rng.uniform() * total;
      pick = n - 1;
      for (Eigen::Index i = 0; i < n; ++i) {
        target -= d2[static_cast<std::size_t>(i)];
        if (target < 0.0) {
          pick = i;
          break;
        }
      }
    } else {
      pick = static_cast<Eigen::Index>(rng.index(static_cast<std::uint64_t>(n)));
    }
    centers.row(c) = pts.row(pick);
  }
  return centers;
}

inline void recompute_centroids(const Eigen::MatrixXd& pts, const std::vector<int>& assign, Eigen::MatrixXd& centers,
                                std::vector<int>& sizes) {
  centers.setZero();
  std::fill(sizes.begin(), sizes.end(), 0);
  for (Eigen::Index i = 0; i < pts.rows(); ++i) {
    centers.row(assign[static_cast<std::size_t>(i)]) += pts.row(i);
    ++sizes[static_cast<std::size_t>(assign[static_cast<std::size_t>(i)])];
  }
  for (Eigen::Index c = 0; c < centers.rows(); ++c) {
    if (sizes[static_cast<std::size_t>(c)] > 0) centers.row(c) /= sizes[static_cast<std::size_t>(c)];
  }
}

inline double inertia_of(const Eigen::MatrixXd& pts, const std::vector<int>& assign, const Eigen::MatrixXd& centers) {
  double s = 0.0;
  for (Eigen::Index i = 0; i < pts.rows(); ++i) s += sq_dist(pts, i, centers, assign[static_cast<std::size_t>(i)]);
  return s;
}

// An empty cluster takes the point farthest from its own centroid among
// clusters that can spare one.
inline void repair_empty(const Eigen::MatrixXd& pts, std::vector<int>& assign, Eigen::MatrixXd& centers,
                         std::vector<int>& sizes) {
  for (Eigen::Index c = 0; c < centers.rows(); ++c) {
    if (sizes[static_cast<std::size_t>(c)] > 0) continue;
    Eigen::Index far = -1;
    double best = -1.0;
    for (Eigen::Index i = 0; i < pts.rows(); ++i) {
      const int own = assign[static_cast<std::size_t>(i)];
      if (sizes[static_cast<std::size_t>(own)] < 2) continue;
      const double d = sq_dist(pts, i, centers, own);
      if (d > best) {
        best = d;
        far = i;
      }
    }
    if (far < 0) break;  // cannot happen when n >= K
    assign[static_cast<std::size_t>(far)] = static_cast<int>(c);
    recompute_centroids(pts, assign, centers, sizes);
  }
}

inline KMeansResult lloyd(const Eigen::MatrixXd& pts, Eigen::MatrixXd centers, int max_iterations) {
  const auto n = pts.rows();
  const auto k = centers.rows();
  KMeansResult r;
  r.assignment.assign(static_cast<std::size_t>(n), -1);
  std::vector<int> sizes(static_cast<std::size_t>(k), 0);
  for (int it = 0; it < max_iterations; ++it) {
    bool changed = false;
    for (Eigen::Index i = 0; i < n; ++i) {
      int best_c = 0;
      double best_d = sq_dist(pts, i, centers, 0);
      for (Eigen::Index c = 1; c < k; ++c) {
        const double d = sq_dist(pts, i, centers, c);
        if (d < best_d) {
          best_d = d;
          best_c = static_cast<int>(c);
        }
      }
      // keep the current cluster on exact ties so the fixpoint is stable
      const int cur = r.assignment[static_cast<std::size_t>(i)];
      if (cur >= 0 && sq_dist(pts, i, centers, cur) == best_d) best_c = cur;
      if (best_c != cur) {
        r.assignment[static_cast<std::size_t>(i)] = best_c;
        changed = true;
      }
    }
    r.iterations = it + 1;
    if (!changed) {
      r.converged = true;
      break;
    }
    recompute_centroids(pts, r.assignment, centers, sizes);
    repair_empty(pts, r.assignment, centers, sizes);
    r.inertia_trace.push_back(inertia_of(pts, r.assignment, centers));
  }
  r.centroids = std::move(centers);
  r.inertia = inertia_of(pts, r.assignment, r.centroids);
  return r;
}

// Single-point moves (Hartigan) from a Lloyd fixpoint. Each accepted move
// strictly lowers the inertia, so the trace stays non-increasing.
inline void refine_moves(const Eigen::MatrixXd& pts, KMeansResult& r, int max_passes) {
  const auto n = pts.rows();
  const auto k = r.centroids.rows();
  std::vector<int> sizes(static_cast<std::size_t>(k), 0);
  recompute_centroids(pts, r.assignment, r.centroids, sizes);
  for (int pass = 0; pass < max_passes; ++pass) {
    bool moved = false;
    for (Eigen::Index i = 0; i < n; ++i) {
      const int a = r.assignment[static_cast<std::size_t>(i)];
      const double na = sizes[static_cast<std::size_t>(a)];
      if (na < 2) continue;
      const double leave = na / (na - 1.0) * sq_dist(pts, i, r.centroids, a);
      int best_c = a;
      double best_gain = 0.0;
      for (Eigen::Index c = 0; c < k; ++c) {
        if (c == a) continue;
        const double nc = sizes[static_cast<std::size_t>(c)];
        const double gain = leave - nc / (nc + 1.0) * sq_dist(pts, i, r.centroids, c);
        if (gain > best_gain * (1.0 + 1e-12) + 1e-15) {
          best_gain = gain;
          best_c = static_cast<int>(c);
        }
      }
      if (best_c == a) continue;
      const double before = inertia_of(pts, r.assignment, r.centroids);
      auto trial = r.assignment;
      trial[static_cast<std::size_t>(i)] = best_c;
      Eigen::MatrixXd centers = r.centroids;
      std::vector<int> trial_sizes = sizes;
      recompute_centroids(pts, trial, centers, trial_sizes);
      const double after = inertia_of(pts, trial, centers);
      if (!(after < before)) continue;
      r.assignment = std::move(trial);
      r.centroids = std::move(centers);
      sizes = std::move(trial_sizes);
      r.inertia_trace.push_back(after);
      moved = true;
    }
    if (!moved) break;
  }
  r.inertia = inertia_of(pts, r.assignment, r.centroids);
}

}  // namespace detail

/// Lloyd's algorithm with k-means++ seeding, followed by single-point
/// refinement. Rows of `points` are the observations.
inline KMeansResult kmeans(const Eigen::MatrixXd& points, int k, std::uint64_t seed, const KMeansOptions& opts = {}) {
  if (k < 1) fail(ErrorCode::InvalidArgument, "K must be positive");
  if (points.rows() < k) {
    fail(ErrorCode::TooFewSignals, std::to_string(points.rows()) + " signals for K=" + std::to_string(k));
  }
  KMeansResult best;
  bool have = false;
  for (int run = 0; run < std::max(1, opts.restarts); ++run) {
    Rng rng = Rng::keyed(seed, 0x4B4Du, static_cast<std::uint64_t>(run));
    auto r = detail::lloyd(points, detail::kmeanspp_seed(points, k, rng), opts.max_iterations);
    if (opts.refine) detail::refine_moves(points, r, opts.max_iterations);
    if (!have || r.inertia < best.inertia) {
      best = std::move(r);
      have = true;
    }
  }
  return best;
}

}  // namespace ssmgan
