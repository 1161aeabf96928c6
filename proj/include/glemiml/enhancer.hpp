#pragma once

// Graph-based label enhancement.
//
// For a bag with instance rows X and logical labels l the base logits are
//
//   e = omega1(mean(X)) + omega2(mean(A * sigma(X))) + omega3(l)
//
// where A is the mutual-KNN Gaussian adjacency over the embedded instances.
// A batch of base logits S is then refined once by a label graph built on
// the columns of softmax(S):  R = S + S * Ahat.  Distributions are
// softmax(R) and confidences sigmoid(R).

#include "glemiml/data.hpp"
#include "glemiml/graph.hpp"
#include "glemiml/nn.hpp"

#include <algorithm>
#include <cstdint>
#include <vector>

namespace glemiml {

struct EnhancerModel {
  nn::FeedForwardNet sigma;   // d -> p
  nn::FeedForwardNet omega1;  // d -> t
  nn::FeedForwardNet omega2;  // p -> t
  nn::FeedForwardNet omega3;  // t -> t
  Eigen::Index instance_k = graph::kDefaultInstanceK;
  Eigen::Index label_k = 3;
  bool use_instance_graph = true;

  Eigen::Index feature_dim() const { return sigma.input_dim(); }
  Eigen::Index embed_dim() const { return sigma.output_dim(); }
  Eigen::Index label_count() const { return omega3.output_dim(); }

  Eigen::Index parameter_count() const {
    return sigma.parameter_count() + omega1.parameter_count() + omega2.parameter_count() +
           omega3.parameter_count();
  }

  friend bool operator==(const EnhancerModel&, const EnhancerModel&) = default;
};

inline void validate(const EnhancerModel& m) {
  for (const auto* net : {&m.sigma, &m.omega1, &m.omega2, &m.omega3}) {
    nn::validate(*net);
  }
  const Eigen::Index t = m.omega3.output_dim();
  require_shape(m.omega1.output_dim() == t && m.omega2.output_dim() == t &&
                    m.omega3.input_dim() == t,
                "omega1/omega2/omega3 must all map to the label count");
  require_shape(m.sigma.output_dim() == m.omega2.input_dim(),
                "sigma output must feed omega2 input");
  require_shape(m.sigma.input_dim() == m.omega1.input_dim(),
                "sigma and omega1 must share the feature dim");
  if (m.instance_k < 1 || m.label_k < 1) {
    throw ConfigError("graph neighbor counts must be >= 1");
  }
}

struct EnhancerOptions {
  Eigen::Index embed_dim = 8;
  Eigen::Index instance_k = graph::kDefaultInstanceK;
  Eigen::Index label_k = 3;
  bool use_instance_graph = true;
};

// Each branch is a two-layer tanh net of hidden width max(16, 2t).
inline EnhancerModel init_enhancer(Eigen::Index feature_dim, Eigen::Index label_count,
                                   const EnhancerOptions& opt, std::uint64_t seed) {
  if (label_count < 2) {
    throw ConfigError("label enhancement needs at least 2 labels");
  }
  const Eigen::Index h = std::max<Eigen::Index>(16, 2 * label_count);
  const auto sub = [seed](std::uint64_t i) { return seed * 0x9E3779B97F4A7C15ULL + i; };
  using nn::Activation;
  EnhancerModel m;
  m.sigma = nn::init_net({feature_dim, h, opt.embed_dim}, Activation::tanh, sub(1));
  m.omega1 = nn::init_net({feature_dim, h, label_count}, Activation::tanh, sub(2));
  m.omega2 = nn::init_net({opt.embed_dim, h, label_count}, Activation::tanh, sub(3));
  m.omega3 = nn::init_net({label_count, h, label_count}, Activation::tanh, sub(4));
  m.instance_k = opt.instance_k;
  m.label_k = opt.label_k;
  m.use_instance_graph = opt.use_instance_graph;
  validate(m);
  return m;
}

inline Vector to_vector(const EnhancerModel& m) {
  Vector v(m.parameter_count());
  v << nn::to_vector(m.sigma), nn::to_vector(m.omega1), nn::to_vector(m.omega2),
      nn::to_vector(m.omega3);
  return v;
}

inline void from_vector(EnhancerModel& m, const Vector& v) {
  require_shape(v.size() == m.parameter_count(), "enhancer parameter vector length mismatch");
  Eigen::Index p = 0;
  for (auto* net : {&m.sigma, &m.omega1, &m.omega2, &m.omega3}) {
    const Eigen::Index n = net->parameter_count();
    nn::from_vector(*net, v.segment(p, n));
    p += n;
  }
}

inline Matrix embed_instances(const EnhancerModel& m, const Bag& bag) {
  require_shape(bag.feature_dim() == m.feature_dim(),
                "bag feature dim " + std::to_string(bag.feature_dim()) + " != enhancer input " +
                    std::to_string(m.feature_dim()));
  return nn::forward_batch(m.sigma, bag.instances);
}

// Forward state for one bag, kept for the reverse pass.
struct BagTrace {
  nn::Trace omega1;
  nn::Trace omega2;
  nn::Trace omega3;
  bool graph_used = false;
  nn::Trace sigma;
  graph::MedianGraph instance_graph;
  Vector logits;
};

inline BagTrace recover_logits_traced(const EnhancerModel& m, const Bag& bag) {
  require_shape(bag.feature_dim() == m.feature_dim(),
                "bag feature dim " + std::to_string(bag.feature_dim()) + " != enhancer input " +
                    std::to_string(m.feature_dim()));
  require_shape(bag.label_count() == m.label_count(), "bag label count != enhancer label count");
  BagTrace tr;
  tr.omega1 = nn::forward_trace(m.omega1, bag.instances.colwise().mean());
  RowVector pooled = RowVector::Zero(m.embed_dim());
  if (m.use_instance_graph) {
    tr.graph_used = true;
    tr.sigma = nn::forward_trace(m.sigma, bag.instances);
    const Matrix& emb = tr.sigma.output();
    tr.instance_graph = graph::mutual_knn_median(emb, m.instance_k);
    pooled = graph::propagate_embeddings(emb, tr.instance_graph.graph).colwise().mean();
  }
  tr.omega2 = nn::forward_trace(m.omega2, pooled);
  tr.omega3 = nn::forward_trace(m.omega3, bag.labels.transpose());
  tr.logits = (tr.omega1.output() + tr.omega2.output() + tr.omega3.output()).row(0).transpose();
  return tr;
}

inline Vector recover_logits(const EnhancerModel& m, const Bag& bag) {
  return recover_logits_traced(m, bag).logits;
}

// Parameter gradient (canonical enhancer order) of a scalar whose gradient
// with respect to this bag's base logits is `grad_logits`.
inline Vector recover_logits_backward(const EnhancerModel& m, const BagTrace& tr,
                                      const Vector& grad_logits) {
  const RowVector up = grad_logits.transpose();
  const nn::Gradients g1 = nn::backward(m.omega1, tr.omega1, up);
  const nn::Gradients g2 = nn::backward(m.omega2, tr.omega2, up);
  const nn::Gradients g3 = nn::backward(m.omega3, tr.omega3, up);
  Vector gs = Vector::Zero(m.sigma.parameter_count());
  if (tr.graph_used) {
    const Matrix& emb = tr.sigma.output();
    const auto& g = tr.instance_graph.graph;
    const Eigen::Index n = emb.rows();
    // pooled = (1/n) 1^T A E
    const Matrix grad_prop = Matrix::Ones(n, 1) * (g2.input.row(0) / static_cast<double>(n));
    Matrix grad_emb = g.adjacency.transpose() * grad_prop;
    const Matrix grad_adj = grad_prop * emb.transpose();
    grad_emb += graph::adjacency_backward(emb, g, &tr.instance_graph.width, grad_adj);
    gs = nn::backward(m.sigma, tr.sigma, grad_emb).params;
  }
  Vector out(m.parameter_count());
  out << gs, g1.params, g2.params, g3.params;
  return out;
}

struct EnhancedBatch {
  Matrix base_logits;    // B x t, before label-graph refinement
  Matrix logits;         // B x t, refined e_i
  Matrix distributions;  // B x t, softmax rows
  Matrix confidences;    // B x t, sigmoid
};

struct LabelGraphTrace {
  Matrix column_softmax;  // softmax(S), B x t
  graph::MedianGraph label_graph;  // nodes are the t columns
  Matrix normalized;      // Ahat
  Vector row_sums;
};

inline EnhancedBatch refine_with_label_graph(const EnhancerModel& m, const Matrix& base_logits,
                                             LabelGraphTrace* trace = nullptr) {
  if (base_logits.rows() < 1) {
    throw ConfigError("label-graph refinement needs at least one bag");
  }
  if (base_logits.cols() < 2) {
    throw ConfigError("label-graph refinement needs at least 2 labels");
  }
  LabelGraphTrace local;
  LabelGraphTrace& tr = trace != nullptr ? *trace : local;
  tr.column_softmax = row_softmax(base_logits);
  tr.label_graph = graph::mutual_knn_median(tr.column_softmax.transpose(), m.label_k);
  const Matrix& a = tr.label_graph.graph.adjacency;
  tr.row_sums = a.rowwise().sum();
  tr.normalized = a;
  for (Eigen::Index j = 0; j < a.rows(); ++j) {
    if (tr.row_sums[j] > 1.0) {
      tr.normalized.row(j) /= tr.row_sums[j];
    }
  }
  EnhancedBatch out;
  out.base_logits = base_logits;
  out.logits = base_logits + base_logits * tr.normalized;
  out.distributions = row_softmax(out.logits);
  out.confidences = sigmoid(out.logits);
  return out;
}

// dLoss/dS given dLoss/dR.
inline Matrix refine_backward(const Matrix& base_logits, const LabelGraphTrace& tr,
                              const Matrix& grad_refined) {
  const Matrix& ahat = tr.normalized;
  Matrix grad_s = grad_refined + grad_refined * ahat.transpose();
  const Matrix grad_ahat = base_logits.transpose() * grad_refined;  // t x t
  Matrix grad_a = grad_ahat;
  for (Eigen::Index j = 0; j < ahat.rows(); ++j) {
    const double r = tr.row_sums[j];
    if (r > 1.0) {
      const double inner = grad_ahat.row(j).dot(ahat.row(j));
      grad_a.row(j) = (grad_ahat.row(j).array() - inner).matrix() / r;
    }
  }
  const Matrix points = tr.column_softmax.transpose();
  const Matrix grad_q =
      graph::adjacency_backward(points, tr.label_graph.graph, &tr.label_graph.width, grad_a)
          .transpose();
  const Matrix& q = tr.column_softmax;
  const Vector inner = grad_q.cwiseProduct(q).rowwise().sum();
  grad_s += q.cwiseProduct(grad_q - inner * RowVector::Ones(q.cols()));
  return grad_s;
}

// A complete forward pass over a batch with everything needed for backward.
struct EnhancerPass {
  EnhancedBatch batch;
  std::vector<BagTrace> bags;
  LabelGraphTrace label;
  std::size_t instance_graphs_built = 0;
};

inline EnhancerPass enhance_forward(const EnhancerModel& m, const BagRefs& bags) {
  if (bags.empty()) {
    throw ConfigError("enhance_batch needs a nonempty batch");
  }
  EnhancerPass pass;
  pass.bags.reserve(bags.size());
  Matrix base(static_cast<Eigen::Index>(bags.size()), m.label_count());
  for (std::size_t i = 0; i < bags.size(); ++i) {
    pass.bags.push_back(recover_logits_traced(m, *bags[i]));
    if (pass.bags.back().graph_used) {
      ++pass.instance_graphs_built;
    }
    base.row(static_cast<Eigen::Index>(i)) = pass.bags.back().logits.transpose();
  }
  // Exactly one refinement pass per batch.
  pass.batch = refine_with_label_graph(m, base, &pass.label);
  return pass;
}

inline EnhancedBatch enhance_batch(const EnhancerModel& m, const BagRefs& bags) {
  return enhance_forward(m, bags).batch;
}

inline EnhancedBatch enhance_batch(const EnhancerModel& m, const std::vector<Bag>& bags) {
  return enhance_batch(m, refs_of(bags));
}

// dLoss/dR from gradients with respect to the two batch outputs.
inline Matrix output_backward(const EnhancedBatch& b, const Matrix& grad_distributions,
                              const Matrix& grad_confidences) {
  const Matrix& d = b.distributions;
  const Vector inner = grad_distributions.cwiseProduct(d).rowwise().sum();
  Matrix g = d.cwiseProduct(grad_distributions - inner * RowVector::Ones(d.cols()));
  const Matrix& c = b.confidences;
  g += grad_confidences.cwiseProduct(c.cwiseProduct((1.0 - c.array()).matrix()));
  return g;
}

// Parameter gradient given dLoss/dR for the refined logits.
inline Vector enhance_backward(const EnhancerModel& m, const EnhancerPass& pass,
                               const Matrix& grad_refined) {
  const Matrix grad_base = refine_backward(pass.batch.base_logits, pass.label, grad_refined);
  Vector grad = Vector::Zero(m.parameter_count());
  for (std::size_t i = 0; i < pass.bags.size(); ++i) {
    grad += recover_logits_backward(m, pass.bags[i],
                                    grad_base.row(static_cast<Eigen::Index>(i)).transpose());
  }
  return grad;
}

inline nlohmann::json to_json(const EnhancerModel& m) {
  return {{"sigma", nn::to_json(m.sigma)},
          {"omega1", nn::to_json(m.omega1)},
          {"omega2", nn::to_json(m.omega2)},
          {"omega3", nn::to_json(m.omega3)},
          {"instance_k", m.instance_k},
          {"label_k", m.label_k},
          {"use_instance_graph", m.use_instance_graph}};
}

inline EnhancerModel enhancer_from_json(const nlohmann::json& j) {
  try {
    EnhancerModel m;
    m.sigma = nn::net_from_json(j.at("sigma"));
    m.omega1 = nn::net_from_json(j.at("omega1"));
    m.omega2 = nn::net_from_json(j.at("omega2"));
    m.omega3 = nn::net_from_json(j.at("omega3"));
    m.instance_k = j.at("instance_k").get<Eigen::Index>();
    m.label_k = j.at("label_k").get<Eigen::Index>();
    m.use_instance_graph = j.at("use_instance_graph").get<bool>();
    validate(m);
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("malformed enhancer checkpoint: ") + e.what());
  }
}

}  // namespace glemiml
