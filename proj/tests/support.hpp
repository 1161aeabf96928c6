#pragma once

// Shared generators and brute-force oracles for the test suites. Oracles here
// are written independently of the library (plain loops, no shared helpers).

#include "glemiml/classifier.hpp"
#include "glemiml/data.hpp"
#include "glemiml/enhancer.hpp"
#include "glemiml/graph.hpp"
#include "glemiml/losses.hpp"
#include "glemiml/metrics.hpp"
#include "glemiml/nn.hpp"
#include "glemiml/train.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

namespace gt {

using glemiml::Bag;
using glemiml::Matrix;
using glemiml::MIMLDataset;
using glemiml::Vector;

class Gen {
 public:
  explicit Gen(std::uint64_t seed) : rng_(seed) {}

  double uniform(double lo = 0.0, double hi = 1.0) {
    return std::uniform_real_distribution<double>(lo, hi)(rng_);
  }
  double normal(double sd = 1.0) { return std::normal_distribution<double>(0.0, sd)(rng_); }
  long integer(long lo, long hi) { return std::uniform_int_distribution<long>(lo, hi)(rng_); }
  bool coin(double p = 0.5) { return uniform() < p; }

  Matrix normal_matrix(Eigen::Index r, Eigen::Index c, double sd = 1.0) {
    Matrix m(r, c);
    for (Eigen::Index i = 0; i < r; ++i)
      for (Eigen::Index j = 0; j < c; ++j) m(i, j) = normal(sd);
    return m;
  }
  Matrix uniform_matrix(Eigen::Index r, Eigen::Index c, double lo = 0.0, double hi = 1.0) {
    Matrix m(r, c);
    for (Eigen::Index i = 0; i < r; ++i)
      for (Eigen::Index j = 0; j < c; ++j) m(i, j) = uniform(lo, hi);
    return m;
  }
  // Scores drawn from a small grid so ties are common.
  Matrix tied_scores(Eigen::Index r, Eigen::Index c, int levels = 5) {
    Matrix m(r, c);
    for (Eigen::Index i = 0; i < r; ++i)
      for (Eigen::Index j = 0; j < c; ++j) m(i, j) = static_cast<double>(integer(0, levels - 1)) / levels;
    return m;
  }
  Matrix binary_matrix(Eigen::Index r, Eigen::Index c, double p = 0.4) {
    Matrix m(r, c);
    for (Eigen::Index i = 0; i < r; ++i)
      for (Eigen::Index j = 0; j < c; ++j) m(i, j) = coin(p) ? 1.0 : 0.0;
    return m;
  }
  // Labels with at least one positive and one negative.
  Vector mixed_labels(Eigen::Index t) {
    Vector l(t);
    do {
      for (Eigen::Index j = 0; j < t; ++j) l[j] = coin() ? 1.0 : 0.0;
    } while (l.sum() < 1 || l.sum() > static_cast<double>(t - 1));
    return l;
  }
  Bag bag(Eigen::Index n, Eigen::Index d, Eigen::Index t) {
    return Bag{normal_matrix(n, d), mixed_labels(t)};
  }
  std::vector<Bag> bags(std::size_t count, Eigen::Index d, Eigen::Index t, long n_min = 1, long n_max = 5) {
    std::vector<Bag> out;
    for (std::size_t i = 0; i < count; ++i) out.push_back(bag(integer(n_min, n_max), d, t));
    return out;
  }
  MIMLDataset dataset(std::size_t count, Eigen::Index d, Eigen::Index t) {
    MIMLDataset ds;
    ds.name = "random";
    ds.feature_dim = d;
    ds.label_count = t;
    ds.bags = bags(count, d, t);
    return ds;
  }
  std::mt19937_64& engine() { return rng_; }

 private:
  std::mt19937_64 rng_;
};

// ---------------------------------------------------------------------------
// Metric oracles: literal transcriptions of the definitions.

inline double oracle_hamming(const Matrix& pred, const Matrix& truth) {
  double wrong = 0;
  for (Eigen::Index i = 0; i < pred.rows(); ++i)
    for (Eigen::Index j = 0; j < pred.cols(); ++j) wrong += (pred(i, j) != truth(i, j)) ? 1 : 0;
  return wrong / static_cast<double>(pred.rows() * pred.cols());
}

inline double oracle_ranking(const Matrix& s, const Matrix& y) {
  double sum = 0;
  int bags = 0;
  for (Eigen::Index i = 0; i < s.rows(); ++i) {
    int pos = 0, neg = 0, bad = 0;
    for (Eigen::Index u = 0; u < s.cols(); ++u) {
      if (y(i, u) == 1) ++pos; else ++neg;
    }
    if (pos == 0 || neg == 0) continue;
    for (Eigen::Index u = 0; u < s.cols(); ++u)
      for (Eigen::Index v = 0; v < s.cols(); ++v)
        if (y(i, u) == 1 && y(i, v) == 0 && !(s(i, u) > s(i, v))) ++bad;
    sum += static_cast<double>(bad) / (pos * neg);
    ++bags;
  }
  return sum / bags;
}

// Rank of bag b for label j: 1 + number of bags strictly ahead (higher score,
// or equal score and lower index).
inline double oracle_map(const Matrix& s, const Matrix& y) {
  double total = 0;
  int labels = 0;
  for (Eigen::Index j = 0; j < s.cols(); ++j) {
    auto ahead = [&](Eigen::Index a, Eigen::Index b) {
      return s(a, j) > s(b, j) || (s(a, j) == s(b, j) && a < b);
    };
    double ap = 0;
    int positives = 0;
    for (Eigen::Index b = 0; b < s.rows(); ++b) {
      if (y(b, j) != 1) continue;
      ++positives;
      int rank = 1, pos_at_or_above = 1;
      for (Eigen::Index o = 0; o < s.rows(); ++o) {
        if (o != b && ahead(o, b)) {
          ++rank;
          if (y(o, j) == 1) ++pos_at_or_above;
        }
      }
      ap += static_cast<double>(pos_at_or_above) / rank;
    }
    if (positives == 0) continue;
    total += ap / positives;
    ++labels;
  }
  return total / labels;
}

inline double oracle_macro_f1(const Matrix& pred, const Matrix& truth) {
  double sum = 0;
  for (Eigen::Index j = 0; j < pred.cols(); ++j) {
    double tp = 0, fp = 0, fn = 0;
    for (Eigen::Index i = 0; i < pred.rows(); ++i) {
      if (pred(i, j) == 1 && truth(i, j) == 1) tp += 1;
      if (pred(i, j) == 1 && truth(i, j) == 0) fp += 1;
      if (pred(i, j) == 0 && truth(i, j) == 1) fn += 1;
    }
    sum += (tp + fp + fn == 0) ? 0.0 : 2 * tp / (2 * tp + fp + fn);
  }
  return sum / static_cast<double>(pred.cols());
}

// ---------------------------------------------------------------------------
// Graph oracles

inline double sq_dist(const Matrix& p, Eigen::Index a, Eigen::Index b) {
  double s = 0;
  for (Eigen::Index c = 0; c < p.cols(); ++c) s += (p(a, c) - p(b, c)) * (p(a, c) - p(b, c));
  return s;
}

// Is m among k's K nearest (self excluded, ties to the lower index)?
inline bool oracle_in_knn(const Matrix& p, Eigen::Index k, Eigen::Index m, Eigen::Index K) {
  Eigen::Index closer = 0;
  const double dm = sq_dist(p, k, m);
  for (Eigen::Index o = 0; o < p.rows(); ++o) {
    if (o == k || o == m) continue;
    const double d = sq_dist(p, k, o);
    if (d < dm || (d == dm && o < m)) ++closer;
  }
  return closer < K;
}

inline Matrix oracle_adjacency(const Matrix& p, Eigen::Index K, double width) {
  const Eigen::Index n = p.rows();
  Matrix a = Matrix::Zero(n, n);
  for (Eigen::Index k = 0; k < n; ++k)
    for (Eigen::Index m = 0; m < n; ++m)
      if (k != m && oracle_in_knn(p, k, m, K) && oracle_in_knn(p, m, k, K))
        a(k, m) = std::exp(-sq_dist(p, k, m) / (2 * width));
  return a;
}

inline double oracle_energy(const Matrix& emb, const Matrix& adj) {
  double s = 0;
  for (Eigen::Index k = 0; k < emb.rows(); ++k)
    for (Eigen::Index m = 0; m < emb.rows(); ++m) s += adj(k, m) * sq_dist(emb, k, m);
  return 0.5 * s;
}

inline double oracle_cosine(const Vector& a, const Vector& b) {
  double ab = 0, aa = 0, bb = 0;
  for (Eigen::Index i = 0; i < a.size(); ++i) {
    ab += a[i] * b[i];
    aa += a[i] * a[i];
    bb += b[i] * b[i];
  }
  if (aa == 0 || bb == 0) return 0;
  return ab / std::sqrt(aa * bb);
}

// Random graph from random points; K and n small.
inline glemiml::graph::WeightedGraph random_graph(Gen& g) {
  const Eigen::Index n = g.integer(1, 8);
  const Matrix pts = g.normal_matrix(n, g.integer(1, 4));
  return glemiml::graph::mutual_knn_adjacency(pts, g.integer(1, 5), g.uniform(0.1, 3.0));
}

// Enhancer/classifier with small random weights and random biases.
inline glemiml::EnhancerModel random_enhancer(Gen& g, Eigen::Index d, Eigen::Index t, bool graph = true) {
  glemiml::EnhancerOptions opt;
  opt.embed_dim = g.integer(2, 4);
  opt.instance_k = g.integer(1, 3);
  opt.label_k = g.integer(1, 3);
  opt.use_instance_graph = graph;
  auto m = glemiml::init_enhancer(d, t, opt, static_cast<std::uint64_t>(g.integer(0, 1L << 40)));
  Vector theta = glemiml::to_vector(m);
  for (Eigen::Index i = 0; i < theta.size(); ++i) theta[i] += g.normal(0.1);
  glemiml::from_vector(m, theta);
  return m;
}

inline glemiml::ClassifierModel random_classifier(Gen& g, Eigen::Index d, Eigen::Index t, int depth) {
  auto m = glemiml::init_classifier(d, t, depth, static_cast<std::uint64_t>(g.integer(0, 1L << 40)));
  Vector phi = glemiml::to_vector(m);
  for (Eigen::Index i = 0; i < phi.size(); ++i) phi[i] += g.normal(0.1);
  glemiml::from_vector(m, phi);
  return m;
}

}  // namespace gt
