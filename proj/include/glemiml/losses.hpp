#pragma once

// Training objectives for the enhancer and the classifier. Every loss comes
// in two forms: a plain value function and a `*_grad` variant returning the
// value together with the gradient with respect to its differentiable input.

#include "glemiml/data.hpp"

#include <string>
#include <vector>

namespace glemiml::loss {

template <class T>
struct WithGrad {
  double value = 0.0;
  T grad;
};

struct LossWeights {
  double beta1 = 1.0 / 3.0;  // interaction (classifier guidance)
  double beta2 = 1.0 / 3.0;  // bag similarity
  double beta3 = 1.0 / 3.0;  // threshold
  double rho = 0.5;          // logical BCE vs distribution loss
  double gamma_pos = 0.0;
  double gamma_neg = 4.0;

  void validate() const {
    if (beta1 < 0 || beta2 < 0 || beta3 < 0) {
      throw ConfigError("beta weights must be >= 0");
    }
    if (std::abs(beta1 + beta2 + beta3 - 1.0) > 1e-12) {
      throw ConfigError("beta weights must sum to 1");
    }
    if (!(rho >= 0.0 && rho <= 1.0)) {
      throw ConfigError("rho must lie in [0, 1]");
    }
    if (gamma_pos < 0 || gamma_neg < 0) {
      throw ConfigError("focusing exponents must be >= 0");
    }
  }
};

namespace detail {
// Derivative of clamp_prob: zero outside the clamp interval.
inline bool inside_clamp(double p) { return p > kProbClamp && p < 1.0 - kProbClamp; }
}  // namespace detail

// ---------------------------------------------------------------------------
// Asymmetric interaction loss. `p` is the classifier probability (a constant
// here), `p_star` the enhancer confidence; the gradient is with respect to
// p_star.

inline WithGrad<Vector> asymmetric_interaction_loss_grad(const Vector& p, const Vector& p_star,
                                                         const Vector& labels, double gamma_pos,
                                                         double gamma_neg) {
  require_shape(p.size() == p_star.size() && p.size() == labels.size() && p.size() > 0,
                "interaction loss inputs must share a nonzero length");
  const auto k = static_cast<double>(p.size());
  WithGrad<Vector> out{0.0, Vector::Zero(p.size())};
  for (Eigen::Index j = 0; j < p.size(); ++j) {
    const double pj = clamp_prob(p[j]);
    const double qj = clamp_prob(p_star[j]);
    const bool live = detail::inside_clamp(p_star[j]);
    if (labels[j] > 0.5) {
      const double w = std::pow(1.0 - pj, gamma_pos);
      out.value -= w * std::log(qj);
      if (live) out.grad[j] = -w / qj / k;
    } else {
      const double w = std::pow(pj, gamma_neg);
      out.value -= w * std::log(1.0 - qj);
      if (live) out.grad[j] = w / (1.0 - qj) / k;
    }
  }
  out.value /= k;
  return out;
}

inline double asymmetric_interaction_loss(const Vector& p, const Vector& p_star,
                                          const Vector& labels, double gamma_pos,
                                          double gamma_neg) {
  return asymmetric_interaction_loss_grad(p, p_star, labels, gamma_pos, gamma_neg).value;
}

// Mean of the per-bag loss over the rows of a batch; gradient w.r.t. P*.
inline WithGrad<Matrix> interaction_loss_batch(const Matrix& p, const Matrix& p_star,
                                               const Matrix& labels, double gamma_pos,
                                               double gamma_neg) {
  require_shape(p.rows() == p_star.rows() && p.rows() == labels.rows() && p.rows() > 0,
                "interaction loss batch shape mismatch");
  const auto b = static_cast<double>(p.rows());
  WithGrad<Matrix> out{0.0, Matrix::Zero(p.rows(), p.cols())};
  for (Eigen::Index i = 0; i < p.rows(); ++i) {
    auto row = asymmetric_interaction_loss_grad(p.row(i).transpose(), p_star.row(i).transpose(),
                                                labels.row(i).transpose(), gamma_pos, gamma_neg);
    out.value += row.value / b;
    out.grad.row(i) = row.grad.transpose() / b;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Bag similarity

struct SimilarityPair {
  Matrix z;  // cosine of mean-pooled bag features
  Matrix a;  // cosine of label distributions
};

// Pairwise cosine of the rows; zero vectors have similarity 0 with everything.
inline Matrix cosine_matrix(const Matrix& rows) {
  const Eigen::Index n = rows.rows();
  const Vector norms = rows.rowwise().norm();
  Matrix out = Matrix::Zero(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) {
      if (norms[i] > 0.0 && norms[j] > 0.0) {
        out(i, j) = rows.row(i).dot(rows.row(j)) / (norms[i] * norms[j]);
      }
    }
  }
  return out;
}

// Gradient of a scalar w.r.t. `rows` given its gradient w.r.t. cosine_matrix(rows).
inline Matrix cosine_backward(const Matrix& rows, const Matrix& cos, const Matrix& grad_cos) {
  const Eigen::Index n = rows.rows();
  const Vector norms = rows.rowwise().norm();
  Matrix grad = Matrix::Zero(n, rows.cols());
  for (Eigen::Index i = 0; i < n; ++i) {
    if (!(norms[i] > 0.0)) continue;
    for (Eigen::Index j = 0; j < n; ++j) {
      if (i == j || !(norms[j] > 0.0)) continue;
      const double g = grad_cos(i, j) + grad_cos(j, i);
      // d cos(u, v) / du = v / (|u||v|) - cos * u / |u|^2
      grad.row(i) += g * (rows.row(j) / (norms[i] * norms[j]) -
                          cos(i, j) * rows.row(i) / (norms[i] * norms[i]));
    }
  }
  return grad;
}

inline Matrix pooled_features(const BagRefs& bags) {
  require_shape(!bags.empty(), "no bags");
  Matrix out(static_cast<Eigen::Index>(bags.size()), bags.front()->feature_dim());
  for (std::size_t i = 0; i < bags.size(); ++i) {
    out.row(static_cast<Eigen::Index>(i)) = bags[i]->instances.colwise().mean();
  }
  return out;
}

inline SimilarityPair similarity_matrices(const BagRefs& bags, const Matrix& distributions) {
  if (bags.size() < 2) {
    throw ConfigError("similarity needs at least 2 bags");
  }
  require_shape(distributions.rows() == static_cast<Eigen::Index>(bags.size()),
                "one distribution row per bag required");
  return {cosine_matrix(pooled_features(bags)), cosine_matrix(distributions)};
}

inline SimilarityPair similarity_matrices(const std::vector<Bag>& bags, const Matrix& distributions) {
  return similarity_matrices(refs_of(bags), distributions);
}

enum class SimilarityMode { mse, literal };

inline SimilarityMode similarity_mode_from_string(const std::string& s) {
  if (s == "mse") return SimilarityMode::mse;
  if (s == "literal") return SimilarityMode::literal;
  throw ConfigError("unknown similarity mode '" + s + "' (expected mse or literal)");
}

inline std::string to_string(SimilarityMode m) {
  return m == SimilarityMode::mse ? "mse" : "literal";
}

// mse:     (1/B^2) sum_ij (Z_ij - A_ij)^2
// literal: (sum_ij (Z_ij - A_ij) / B)^2   (signed sum; deviations can cancel)
// Gradient is with respect to A.
inline WithGrad<Matrix> similarity_loss_grad(const SimilarityPair& sp, SimilarityMode mode) {
  require_shape(sp.z.rows() == sp.z.cols() && sp.z.rows() == sp.a.rows() &&
                    sp.a.rows() == sp.a.cols(),
                "similarity matrices must be square and equal-sized");
  const auto b = static_cast<double>(sp.z.rows());
  const Matrix dev = sp.z - sp.a;
  WithGrad<Matrix> out;
  if (mode == SimilarityMode::mse) {
    out.value = dev.squaredNorm() / (b * b);
    out.grad = -2.0 * dev / (b * b);
  } else {
    const double s = dev.sum() / b;
    out.value = s * s;
    out.grad = Matrix::Constant(sp.a.rows(), sp.a.cols(), -2.0 * s / b);
  }
  return out;
}

inline double similarity_loss(const SimilarityPair& sp, SimilarityMode mode = SimilarityMode::mse) {
  return similarity_loss_grad(sp, mode).value;
}

// ---------------------------------------------------------------------------
// Threshold loss: every relevant label must out-describe every irrelevant one.

struct ThresholdResult {
  double value = 0.0;
  Matrix grad;  // w.r.t. distributions
  std::size_t used = 0;
  std::size_t skipped = 0;
};

// Non-throwing form; `used == 0` means the batch carried no signal.
inline ThresholdResult threshold_loss_detail(const Matrix& distributions, const Matrix& logical) {
  require_shape(distributions.rows() == logical.rows() && distributions.cols() == logical.cols(),
                "threshold loss shape mismatch");
  ThresholdResult out;
  out.grad = Matrix::Zero(distributions.rows(), distributions.cols());
  std::vector<std::pair<Eigen::Index, Eigen::Index>> active;  // (argmax neg, argmin pos)
  std::vector<Eigen::Index> active_rows;
  for (Eigen::Index i = 0; i < distributions.rows(); ++i) {
    Eigen::Index max_neg = -1;
    Eigen::Index min_pos = -1;
    for (Eigen::Index j = 0; j < distributions.cols(); ++j) {
      const double v = distributions(i, j);
      if (logical(i, j) > 0.5) {
        if (min_pos < 0 || v < distributions(i, min_pos)) min_pos = j;
      } else {
        if (max_neg < 0 || v > distributions(i, max_neg)) max_neg = j;
      }
    }
    if (min_pos < 0 || max_neg < 0) {
      ++out.skipped;
      continue;
    }
    ++out.used;
    const double gap = distributions(i, max_neg) - distributions(i, min_pos);
    if (gap > 0.0) {
      out.value += gap;
      active.emplace_back(max_neg, min_pos);
      active_rows.push_back(i);
    }
  }
  if (out.used > 0) {
    const auto m = static_cast<double>(out.used);
    out.value /= m;
    for (std::size_t r = 0; r < active.size(); ++r) {
      out.grad(active_rows[r], active[r].first) += 1.0 / m;
      out.grad(active_rows[r], active[r].second) -= 1.0 / m;
    }
  }
  return out;
}

inline double threshold_loss(const Matrix& distributions, const Matrix& logical) {
  auto r = threshold_loss_detail(distributions, logical);
  if (r.used == 0) {
    throw DegenerateInputError("threshold loss: every bag lacks a positive or a negative label");
  }
  return r.value;
}

inline double enhancer_total_loss(const LossWeights& w, double l_cl, double l_sim, double l_thr) {
  w.validate();
  return w.beta1 * l_cl + w.beta2 * l_sim + w.beta3 * l_thr;
}

// ---------------------------------------------------------------------------
// Classifier losses

// (1/B) sum_i sum_j d_ij * log(sum_u exp(s_iu - s_ij)); gradient w.r.t. S.
inline WithGrad<Matrix> distribution_loss_grad(const Matrix& d, const Matrix& s) {
  require_shape(d.rows() == s.rows() && d.cols() == s.cols() && d.rows() > 0,
                "distribution loss shape mismatch");
  if (!s.allFinite()) {
    throw NumericError("distribution loss: non-finite logits");
  }
  const auto b = static_cast<double>(d.rows());
  WithGrad<Matrix> out{0.0, Matrix::Zero(d.rows(), d.cols())};
  for (Eigen::Index i = 0; i < d.rows(); ++i) {
    const double mx = s.row(i).maxCoeff();
    const RowVector e = s.row(i).unaryExpr([mx](double v) { return std::exp(v - mx); });
    const double lse = mx + std::log(e.sum());
    const RowVector soft = e / e.sum();
    for (Eigen::Index j = 0; j < d.cols(); ++j) {
      out.value += d(i, j) * (lse - s(i, j));
    }
    out.grad.row(i) = (soft * d.row(i).sum() - d.row(i)) / b;
  }
  out.value /= b;
  if (!std::isfinite(out.value)) {
    throw NumericError("distribution loss is not finite");
  }
  return out;
}

inline double distribution_loss(const Matrix& d, const Matrix& s) {
  return distribution_loss_grad(d, s).value;
}

// Negated mean binary cross-entropy; gradient w.r.t. P.
inline WithGrad<Matrix> logical_bce_loss_grad(const Matrix& p, const Matrix& logical) {
  require_shape(p.rows() == logical.rows() && p.cols() == logical.cols() && p.size() > 0,
                "BCE shape mismatch");
  const auto n = static_cast<double>(p.size());
  WithGrad<Matrix> out{0.0, Matrix::Zero(p.rows(), p.cols())};
  for (Eigen::Index i = 0; i < p.rows(); ++i) {
    for (Eigen::Index j = 0; j < p.cols(); ++j) {
      const double q = clamp_prob(p(i, j));
      const bool live = detail::inside_clamp(p(i, j));
      if (logical(i, j) > 0.5) {
        out.value -= std::log(q);
        if (live) out.grad(i, j) = -1.0 / q / n;
      } else {
        out.value -= std::log(1.0 - q);
        if (live) out.grad(i, j) = 1.0 / (1.0 - q) / n;
      }
    }
  }
  out.value /= n;
  return out;
}

inline double logical_bce_loss(const Matrix& p, const Matrix& logical) {
  return logical_bce_loss_grad(p, logical).value;
}

inline double classifier_total_loss(double rho, double l_lc, double l_dc) {
  if (!(rho >= 0.0 && rho <= 1.0)) {
    throw ConfigError("rho must lie in [0, 1]");
  }
  return rho * l_lc + (1.0 - rho) * l_dc;
}

}  // namespace glemiml::loss
