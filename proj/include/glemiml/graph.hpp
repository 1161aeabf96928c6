#pragma once

// Mutual-KNN graphs with Gaussian edge weights, their Laplacians, and the
// reverse-mode pass from adjacency gradients back to node coordinates.

#include "glemiml/common.hpp"

#include <algorithm>
#include <numeric>
#include <utility>
#include <vector>

namespace glemiml::graph {

using Edge = std::pair<Eigen::Index, Eigen::Index>;  // (k, m) with k < m

struct WeightedGraph {
  Matrix adjacency;        // symmetric, zero diagonal, entries in [0, 1]
  double width = 1.0;      // Gaussian width delta
  Eigen::Index k_neighbors = 0;  // K after clamping to n - 1
  std::vector<Edge> edges;

  Eigen::Index size() const { return adjacency.rows(); }
};

struct LaplacianMatrix {
  Matrix matrix;
};

// Median heuristic for delta and the bookkeeping needed to differentiate it.
struct WidthEstimate {
  double value = 1e-8;
  std::vector<Edge> median_pairs;  // one pair (odd count) or two (even count)
  bool floored = true;
};

inline constexpr double kWidthFloor = 1e-8;
inline constexpr Eigen::Index kDefaultInstanceK = 3;

inline Matrix squared_distances(const Matrix& points) {
  const Eigen::Index n = points.rows();
  Matrix d = Matrix::Zero(n, n);
  for (Eigen::Index k = 0; k < n; ++k) {
    for (Eigen::Index m = k + 1; m < n; ++m) {
      const double s = (points.row(k) - points.row(m)).squaredNorm();
      d(k, m) = s;
      d(m, k) = s;
    }
  }
  return d;
}

// Median of squared pairwise distances (k < m), floored at kWidthFloor.
inline WidthEstimate median_width(const Matrix& points) {
  const Eigen::Index n = points.rows();
  const Matrix d = squared_distances(points);
  std::vector<Edge> pairs;
  for (Eigen::Index k = 0; k < n; ++k) {
    for (Eigen::Index m = k + 1; m < n; ++m) {
      pairs.emplace_back(k, m);
    }
  }
  WidthEstimate est;
  if (pairs.empty()) {
    return est;
  }
  std::stable_sort(pairs.begin(), pairs.end(), [&](const Edge& a, const Edge& b) {
    return d(a.first, a.second) < d(b.first, b.second);
  });
  const std::size_t mid = pairs.size() / 2;
  double median = 0.0;
  if (pairs.size() % 2 == 1) {
    est.median_pairs = {pairs[mid]};
    median = d(pairs[mid].first, pairs[mid].second);
  } else {
    est.median_pairs = {pairs[mid - 1], pairs[mid]};
    median = 0.5 * (d(pairs[mid - 1].first, pairs[mid - 1].second) +
                    d(pairs[mid].first, pairs[mid].second));
  }
  est.floored = !(median > kWidthFloor);
  est.value = est.floored ? kWidthFloor : median;
  return est;
}

// neighbors[k][m] is true iff m is among the K nearest points to k (self
// excluded, ties broken by lower index).
inline std::vector<std::vector<bool>> knn_membership(const Matrix& sq_dist, Eigen::Index K) {
  const Eigen::Index n = sq_dist.rows();
  std::vector<std::vector<bool>> member(static_cast<std::size_t>(n),
                                        std::vector<bool>(static_cast<std::size_t>(n), false));
  for (Eigen::Index k = 0; k < n; ++k) {
    std::vector<Eigen::Index> others;
    for (Eigen::Index m = 0; m < n; ++m) {
      if (m != k) {
        others.push_back(m);
      }
    }
    std::stable_sort(others.begin(), others.end(),
                     [&](Eigen::Index a, Eigen::Index b) { return sq_dist(k, a) < sq_dist(k, b); });
    for (Eigen::Index r = 0; r < K && r < static_cast<Eigen::Index>(others.size()); ++r) {
      member[static_cast<std::size_t>(k)][static_cast<std::size_t>(others[static_cast<std::size_t>(r)])] = true;
    }
  }
  return member;
}

inline WeightedGraph mutual_knn_adjacency(const Matrix& points, Eigen::Index K, double width) {
  const Eigen::Index n = points.rows();
  if (n < 1) {
    throw ShapeError("graph needs at least one point");
  }
  if (K < 1) {
    throw ConfigError("K must be >= 1");
  }
  if (!(width > 0.0)) {
    throw ConfigError("graph width must be > 0");
  }
  if (!points.allFinite()) {
    throw NumericError("graph points contain non-finite values");
  }
  WeightedGraph g;
  g.width = width;
  g.k_neighbors = std::min<Eigen::Index>(K, n - 1);
  g.adjacency = Matrix::Zero(n, n);
  const Matrix d = squared_distances(points);
  const auto member = knn_membership(d, g.k_neighbors);
  for (Eigen::Index k = 0; k < n; ++k) {
    for (Eigen::Index m = k + 1; m < n; ++m) {
      if (member[static_cast<std::size_t>(k)][static_cast<std::size_t>(m)] &&
          member[static_cast<std::size_t>(m)][static_cast<std::size_t>(k)]) {
        const double a = std::exp(-d(k, m) / (2.0 * width));
        g.adjacency(k, m) = a;
        g.adjacency(m, k) = a;
        g.edges.emplace_back(k, m);
      }
    }
  }
  return g;
}

// Graph whose width comes from the median heuristic on the same points.
struct MedianGraph {
  WeightedGraph graph;
  WidthEstimate width;
};

inline MedianGraph mutual_knn_median(const Matrix& points, Eigen::Index K) {
  if (!points.allFinite()) {
    throw NumericError("graph points contain non-finite values");
  }
  MedianGraph out;
  out.width = median_width(points);
  out.graph = mutual_knn_adjacency(points, K, out.width.value);
  return out;
}

inline LaplacianMatrix laplacian(const WeightedGraph& g) {
  const Matrix& a = g.adjacency;
  require_shape(a.rows() == a.cols(), "adjacency must be square");
  LaplacianMatrix l;
  l.matrix = -a;
  l.matrix.diagonal() += a.rowwise().sum();
  return l;
}

// Row k of the result is sum_m a_km * embeddings[m].
inline Matrix propagate_embeddings(const Matrix& embeddings, const WeightedGraph& g) {
  require_shape(embeddings.rows() == g.size(),
                "embedding rows (" + std::to_string(embeddings.rows()) +
                    ") must equal graph nodes (" + std::to_string(g.size()) + ")");
  return g.adjacency * embeddings;
}

// trace(E^T L E) = 1/2 sum_{k,m} a_km ||e_k - e_m||^2.
inline double smoothness_energy(const Matrix& embeddings, const LaplacianMatrix& l) {
  require_shape(l.matrix.rows() == l.matrix.cols() && embeddings.rows() == l.matrix.rows(),
                "embedding rows must equal Laplacian size");
  return (embeddings.transpose() * l.matrix * embeddings).trace();
}

// Pulls dLoss/dA back to dLoss/dpoints through the Gaussian weights and,
// when a median width estimate is given, through delta itself. Neighbor
// membership is locally constant and contributes nothing.
inline Matrix adjacency_backward(const Matrix& points, const WeightedGraph& g,
                                 const WidthEstimate* width, const Matrix& grad_adjacency) {
  const Eigen::Index n = points.rows();
  require_shape(grad_adjacency.rows() == n && grad_adjacency.cols() == n,
                "adjacency gradient shape mismatch");
  const double delta = g.width;
  Matrix grad_sq = Matrix::Zero(n, n);  // upper triangle used
  double grad_delta = 0.0;
  for (const auto& [k, m] : g.edges) {
    const double a = g.adjacency(k, m);
    const double s = (points.row(k) - points.row(m)).squaredNorm();
    const double ga = grad_adjacency(k, m) + grad_adjacency(m, k);
    grad_sq(k, m) += ga * (-a / (2.0 * delta));
    grad_delta += ga * a * s / (2.0 * delta * delta);
  }
  if (width != nullptr && !width->floored && !width->median_pairs.empty()) {
    const double share = 1.0 / static_cast<double>(width->median_pairs.size());
    for (const auto& [k, m] : width->median_pairs) {
      grad_sq(k, m) += grad_delta * share;
    }
  }
  Matrix grad_points = Matrix::Zero(n, points.cols());
  for (Eigen::Index k = 0; k < n; ++k) {
    for (Eigen::Index m = k + 1; m < n; ++m) {
      const double gs = grad_sq(k, m);
      if (gs != 0.0) {
        const RowVector diff = 2.0 * gs * (points.row(k) - points.row(m));
        grad_points.row(k) += diff;
        grad_points.row(m) -= diff;
      }
    }
  }
  return grad_points;
}

}  // namespace glemiml::graph
