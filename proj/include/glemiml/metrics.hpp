#pragma once

#include "glemiml/common.hpp"

#include <algorithm>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

namespace glemiml::metrics {

struct MetricsReport {
  double hamming_loss = 0.0;
  double ranking_loss = 0.0;
  double macro_avg_precision = 0.0;
  double macro_f1 = 0.0;
  // Which averaging produced macro_avg_precision.
  std::string map_reading = "label-wise";
  std::vector<double> per_label_f1;
  std::vector<std::optional<double>> per_label_ap;  // nullopt: label had no positive bag
};

namespace detail {
inline void same_shape(const Matrix& a, const Matrix& b) {
  require_shape(a.rows() == b.rows() && a.cols() == b.cols(), "metric inputs must share a shape");
}
}  // namespace detail

inline double hamming_loss(const Matrix& pred, const Matrix& truth) {
  detail::same_shape(pred, truth);
  require_shape(pred.size() > 0, "empty prediction matrix");
  std::size_t wrong = 0;
  for (Eigen::Index i = 0; i < pred.rows(); ++i) {
    for (Eigen::Index j = 0; j < pred.cols(); ++j) {
      if ((pred(i, j) > 0.5) != (truth(i, j) > 0.5)) ++wrong;
    }
  }
  return static_cast<double>(wrong) / static_cast<double>(pred.size());
}

// Fraction of (relevant, irrelevant) pairs with score_rel <= score_irr,
// averaged over bags that have both kinds of label.
inline double ranking_loss(const Matrix& scores, const Matrix& truth) {
  detail::same_shape(scores, truth);
  double total = 0.0;
  std::size_t eligible = 0;
  for (Eigen::Index i = 0; i < scores.rows(); ++i) {
    std::vector<double> pos, neg;
    for (Eigen::Index j = 0; j < scores.cols(); ++j) {
      (truth(i, j) > 0.5 ? pos : neg).push_back(scores(i, j));
    }
    if (pos.empty() || neg.empty()) continue;
    std::size_t bad = 0;
    for (double u : pos) {
      for (double v : neg) {
        if (u <= v) ++bad;
      }
    }
    total += static_cast<double>(bad) / static_cast<double>(pos.size() * neg.size());
    ++eligible;
  }
  if (eligible == 0) {
    throw DegenerateInputError("ranking loss: no bag has both relevant and irrelevant labels");
  }
  return total / static_cast<double>(eligible);
}

// Average precision of one label's bag ranking; nullopt if it has no positive.
inline std::optional<double> label_average_precision(const Matrix& scores, const Matrix& truth,
                                                     Eigen::Index label) {
  std::vector<Eigen::Index> order(static_cast<std::size_t>(scores.rows()));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  std::stable_sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) {
    return scores(a, label) > scores(b, label);
  });
  double sum = 0.0;
  std::size_t hits = 0;
  for (std::size_t r = 0; r < order.size(); ++r) {
    if (truth(order[r], label) > 0.5) {
      ++hits;
      sum += static_cast<double>(hits) / static_cast<double>(r + 1);
    }
  }
  if (hits == 0) return std::nullopt;
  return sum / static_cast<double>(hits);
}

inline double macro_average_precision(const Matrix& scores, const Matrix& truth) {
  detail::same_shape(scores, truth);
  double total = 0.0;
  std::size_t eligible = 0;
  for (Eigen::Index j = 0; j < scores.cols(); ++j) {
    if (auto ap = label_average_precision(scores, truth, j)) {
      total += *ap;
      ++eligible;
    }
  }
  if (eligible == 0) {
    throw DegenerateInputError("macro average precision: no label has a positive bag");
  }
  return total / static_cast<double>(eligible);
}

inline std::vector<double> per_label_f1(const Matrix& pred, const Matrix& truth) {
  detail::same_shape(pred, truth);
  std::vector<double> f1(static_cast<std::size_t>(pred.cols()), 0.0);
  for (Eigen::Index j = 0; j < pred.cols(); ++j) {
    double tp = 0, fp = 0, fn = 0;
    for (Eigen::Index i = 0; i < pred.rows(); ++i) {
      const bool p = pred(i, j) > 0.5;
      const bool t = truth(i, j) > 0.5;
      tp += (p && t) ? 1 : 0;
      fp += (p && !t) ? 1 : 0;
      fn += (!p && t) ? 1 : 0;
    }
    const double denom = 2 * tp + fp + fn;
    f1[static_cast<std::size_t>(j)] = denom > 0 ? 2 * tp / denom : 0.0;
  }
  return f1;
}

inline double macro_f1(const Matrix& pred, const Matrix& truth) {
  const auto f1 = per_label_f1(pred, truth);
  require_shape(!f1.empty(), "no labels");
  return std::accumulate(f1.begin(), f1.end(), 0.0) / static_cast<double>(f1.size());
}

// All four metrics from probabilities: binarized at `threshold` for HL and
// Ma-F1, raw for RL and mAP.
inline MetricsReport evaluate_predictions(const Matrix& probs, const Matrix& truth,
                                          double threshold = 0.5) {
  detail::same_shape(probs, truth);
  const Matrix pred = (probs.array() > threshold).cast<double>().matrix();
  MetricsReport r;
  r.hamming_loss = hamming_loss(pred, truth);
  r.ranking_loss = ranking_loss(probs, truth);
  r.macro_avg_precision = macro_average_precision(probs, truth);
  r.per_label_f1 = per_label_f1(pred, truth);
  r.macro_f1 = macro_f1(pred, truth);
  for (Eigen::Index j = 0; j < probs.cols(); ++j) {
    r.per_label_ap.push_back(label_average_precision(probs, truth, j));
  }
  return r;
}

// ---------------------------------------------------------------------------
// Rank aggregation across methods

enum class Direction { lower_better, higher_better };

using ScoreGrid = std::vector<std::vector<std::optional<double>>>;  // method x column

// Per-cell ranks: 1 is best; ties share the minimum rank; a missing cell
// takes the worst rank (the number of methods).
inline std::vector<std::vector<int>> rank_columns(const ScoreGrid& grid,
                                                  const std::vector<Direction>& directions) {
  if (grid.empty() || grid.front().empty()) {
    throw DegenerateInputError("rank table is empty");
  }
  const std::size_t methods = grid.size();
  const std::size_t cols = grid.front().size();
  require_shape(directions.size() == cols, "one direction per column required");
  for (const auto& row : grid) {
    require_shape(row.size() == cols, "ragged rank table");
  }
  std::vector<std::vector<int>> ranks(methods, std::vector<int>(cols, 0));
  for (std::size_t c = 0; c < cols; ++c) {
    for (std::size_t m = 0; m < methods; ++m) {
      if (!grid[m][c]) {
        ranks[m][c] = static_cast<int>(methods);
        continue;
      }
      const double x = *grid[m][c];
      int better = 0;
      for (std::size_t o = 0; o < methods; ++o) {
        if (!grid[o][c]) continue;
        const double y = *grid[o][c];
        if (directions[c] == Direction::lower_better ? y < x : y > x) ++better;
      }
      ranks[m][c] = better + 1;
    }
  }
  return ranks;
}

inline std::vector<double> average_rank(const ScoreGrid& grid,
                                        const std::vector<Direction>& directions) {
  const auto ranks = rank_columns(grid, directions);
  std::vector<double> mean;
  mean.reserve(ranks.size());
  for (const auto& row : ranks) {
    mean.push_back(std::accumulate(row.begin(), row.end(), 0.0) / static_cast<double>(row.size()));
  }
  return mean;
}

}  // namespace glemiml::metrics
