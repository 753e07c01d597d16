#pragma once

// Dynamic time warping with the symmetric step pattern
// {(1,0), (0,1), (1,1)}. Shared by the alignment stage (squared cost,
// full path) and the evaluation metric (absolute cost, distance only).

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>
#include <utility>
#include <vector>

#include "ssmgan/error.hpp"

namespace ssmgan {

struct SquaredCost {
  double operator()(double a, double b) const {
    const double d = a - b;
    return d * d;
  }
};

struct AbsoluteCost {
  double operator()(double a, double b) const { return std::abs(a - b); }
};

/// Accumulated cost matrix, row-major (|a| x |b|).
template <typename Cost = SquaredCost>
std::vector<double> dtw_cost_matrix(std::span<const double> a, std::span<const double> b, Cost cost = {}) {
  const std::size_t n = a.size(), m = b.size();
  std::vector<double> acc(n * m);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < m; ++j) {
      const double c = cost(a[i], b[j]);
      double best;
      if (i == 0 && j == 0) {
        best = 0.0;
      } else if (i == 0) {
        best = acc[j - 1];
      } else if (j == 0) {
        best = acc[(i - 1) * m];
      } else {
        best = std::min({acc[(i - 1) * m + j - 1], acc[(i - 1) * m + j], acc[i * m + j - 1]});
      }
      acc[i * m + j] = best + c;
    }
  }
  return acc;
}

/// Optimal warping path from (0,0) to (n-1,m-1). Backtracking prefers
/// the diagonal, then a step along `a`, then a step along `b` on ties.
template <typename Cost = SquaredCost>
std::vector<std::pair<std::size_t, std::size_t>> dtw_path(std::span<const double> a, std::span<const double> b,
                                                          Cost cost = {}) {
  if (a.empty() || b.empty()) fail(ErrorCode::EmptySequence, "DTW needs non-empty sequences");
  const std::size_t m = b.size();
  const auto acc = dtw_cost_matrix(a, b, cost);
  std::vector<std::pair<std::size_t, std::size_t>> path;
  std::size_t i = a.size() - 1, j = m - 1;
  path.emplace_back(i, j);
  while (i > 0 || j > 0) {
    if (i == 0) {
      --j;
    } else if (j == 0) {
      --i;
    } else {
      const double diag = acc[(i - 1) * m + j - 1];
      const double up = acc[(i - 1) * m + j];
      const double left = acc[i * m + j - 1];
      if (diag <= up && diag <= left) {
        --i;
        --j;
      } else if (up <= left) {
        --i;
      } else {
        --j;
      }
    }
    path.emplace_back(i, j);
  }
  std::reverse(path.begin(), path.end());
  return path;
}

/// DTW distance with |a_i - b_j| cost summed along the optimal path.
inline double dtw_distance(std::span<const double> a, std::span<const double> b) {
  if (a.empty() || b.empty()) fail(ErrorCode::EmptySequence, "DTW needs non-empty sequences");
  const std::size_t m = b.size();
  std::vector<double> prev(m), cur(m);
  for (std::size_t i = 0; i < a.size(); ++i) {
    for (std::size_t j = 0; j < m; ++j) {
      const double c = std::abs(a[i] - b[j]);
      double best;
      if (i == 0 && j == 0) {
        best = 0.0;
      } else if (i == 0) {
        best = cur[j - 1];
      } else if (j == 0) {
        best = prev[0];
      } else {
        best = std::min({prev[j - 1], prev[j], cur[j - 1]});
      }
      cur[j] = best + c;
    }
    std::swap(prev, cur);
  }
  return prev[m - 1];
}

/// Squared-cost DTW total, used to rank medoid candidates.
inline double dtw_squared_total(std::span<const double> a, std::span<const double> b) {
  const std::size_t m = b.size();
  std::vector<double> prev(m), cur(m);
  for (std::size_t i = 0; i < a.size(); ++i) {
    for (std::size_t j = 0; j < m; ++j) {
      const double d = a[i] - b[j];
      double best;
      if (i == 0 && j == 0) {
        best = 0.0;
      } else if (i == 0) {
        best = cur[j - 1];
      } else if (j == 0) {
        best = prev[0];
      } else {
        best = std::min({prev[j - 1], prev[j], cur[j - 1]});
      }
      cur[j] = best + d * d;
    }
    std::swap(prev, cur);
  }
  return prev[m - 1];
}

}  // namespace ssmgan
