#pragma once

// Pooled MIML classifier: per-instance transform, elementwise max over the
// bag, affine head producing label logits.

#include "glemiml/data.hpp"
#include "glemiml/nn.hpp"

#include <optional>
#include <vector>

namespace glemiml {

struct ClassifierModel {
  int depth = 2;  // affine layers including the head
  std::optional<nn::FeedForwardNet> instance_net;  // absent when depth == 1
  nn::FeedForwardNet head;

  Eigen::Index feature_dim() const {
    return instance_net ? instance_net->input_dim() : head.input_dim();
  }
  Eigen::Index label_count() const { return head.output_dim(); }
  Eigen::Index parameter_count() const {
    return (instance_net ? instance_net->parameter_count() : 0) + head.parameter_count();
  }

  friend bool operator==(const ClassifierModel&, const ClassifierModel&) = default;
};

inline void validate(const ClassifierModel& m) {
  if (m.depth < 1 || m.depth > 3) {
    throw ConfigError("classifier depth must be 1, 2 or 3");
  }
  nn::validate(m.head);
  const std::size_t hidden = m.instance_net ? m.instance_net->layers.size() : 0;
  if (static_cast<int>(hidden) + 1 != m.depth) {
    throw ConfigError("classifier depth does not match its layer count");
  }
  if (m.instance_net) {
    nn::validate(*m.instance_net);
    require_shape(m.instance_net->output_dim() == m.head.input_dim(),
                  "instance net output must feed the head");
  }
}

// Hidden width max(32, 2t), relu instance layers, identity head.
inline ClassifierModel init_classifier(Eigen::Index feature_dim, Eigen::Index label_count,
                                       int depth, std::uint64_t seed) {
  if (depth < 1 || depth > 3) {
    throw ConfigError("classifier depth must be 1, 2 or 3");
  }
  const Eigen::Index h = std::max<Eigen::Index>(32, 2 * label_count);
  ClassifierModel m;
  m.depth = depth;
  const std::uint64_t base = seed * 0xD1B54A32D192ED03ULL;
  if (depth == 1) {
    m.head = nn::init_net({feature_dim, label_count}, nn::Activation::identity, base + 1);
  } else {
    std::vector<Eigen::Index> dims(static_cast<std::size_t>(depth), h);
    dims.front() = feature_dim;
    m.instance_net = nn::init_net(dims, nn::Activation::relu, base + 2, nn::Activation::relu);
    m.head = nn::init_net({h, label_count}, nn::Activation::identity, base + 3);
  }
  validate(m);
  return m;
}

inline Vector to_vector(const ClassifierModel& m) {
  Vector v(m.parameter_count());
  const Eigen::Index n_inst = m.instance_net ? m.instance_net->parameter_count() : 0;
  if (m.instance_net) {
    v.head(n_inst) = nn::to_vector(*m.instance_net);
  }
  v.tail(m.head.parameter_count()) = nn::to_vector(m.head);
  return v;
}

inline void from_vector(ClassifierModel& m, const Vector& v) {
  require_shape(v.size() == m.parameter_count(), "classifier parameter vector length mismatch");
  const Eigen::Index n_inst = m.instance_net ? m.instance_net->parameter_count() : 0;
  if (m.instance_net) {
    nn::from_vector(*m.instance_net, v.head(n_inst));
  }
  nn::from_vector(m.head, v.tail(m.head.parameter_count()));
}

struct ClassifierTrace {
  nn::Trace instance;
  Matrix hidden;  // per-instance features entering the pool
  std::vector<Eigen::Index> argmax;  // winning instance per pooled coordinate
  nn::Trace head;
  Vector logits;
  Vector probs;
};

inline ClassifierTrace predict_bag_traced(const ClassifierModel& m, const Bag& bag) {
  require_shape(bag.feature_dim() == m.feature_dim(),
                "bag feature dim " + std::to_string(bag.feature_dim()) + " != classifier input " +
                    std::to_string(m.feature_dim()));
  ClassifierTrace tr;
  if (m.instance_net) {
    tr.instance = nn::forward_trace(*m.instance_net, bag.instances);
    tr.hidden = tr.instance.output();
  } else {
    tr.hidden = bag.instances;
  }
  const Eigen::Index cols = tr.hidden.cols();
  RowVector pooled(cols);
  tr.argmax.assign(static_cast<std::size_t>(cols), 0);
  for (Eigen::Index c = 0; c < cols; ++c) {
    Eigen::Index best = 0;
    for (Eigen::Index k = 1; k < tr.hidden.rows(); ++k) {
      if (tr.hidden(k, c) > tr.hidden(best, c)) best = k;
    }
    tr.argmax[static_cast<std::size_t>(c)] = best;
    pooled[c] = tr.hidden(best, c);
  }
  tr.head = nn::forward_trace(m.head, pooled);
  tr.logits = tr.head.output().row(0).transpose();
  tr.probs = tr.logits.unaryExpr([](double v) { return sigmoid(v); });
  return tr;
}

struct BagPrediction {
  Vector logits;
  Vector probs;
};

inline BagPrediction predict_bag(const ClassifierModel& m, const Bag& bag) {
  auto tr = predict_bag_traced(m, bag);
  return {std::move(tr.logits), std::move(tr.probs)};
}

// Parameter gradient given dLoss/dlogits for one bag.
inline Vector predict_bag_backward(const ClassifierModel& m, const ClassifierTrace& tr,
                                   const Vector& grad_logits) {
  const nn::Gradients gh = nn::backward(m.head, tr.head, grad_logits.transpose());
  Vector out(m.parameter_count());
  if (m.instance_net) {
    Matrix grad_hidden = Matrix::Zero(tr.hidden.rows(), tr.hidden.cols());
    for (Eigen::Index c = 0; c < tr.hidden.cols(); ++c) {
      grad_hidden(tr.argmax[static_cast<std::size_t>(c)], c) = gh.input(0, c);
    }
    const nn::Gradients gi = nn::backward(*m.instance_net, tr.instance, grad_hidden);
    out << gi.params, gh.params;
  } else {
    out = gh.params;
  }
  return out;
}

struct DatasetPrediction {
  Matrix logits;  // B x t
  Matrix probs;   // B x t
};

inline DatasetPrediction predict_bags(const ClassifierModel& m, const BagRefs& bags) {
  DatasetPrediction out;
  out.logits.resize(static_cast<Eigen::Index>(bags.size()), m.label_count());
  out.probs.resize(out.logits.rows(), out.logits.cols());
  for (std::size_t i = 0; i < bags.size(); ++i) {
    const auto p = predict_bag(m, *bags[i]);
    out.logits.row(static_cast<Eigen::Index>(i)) = p.logits.transpose();
    out.probs.row(static_cast<Eigen::Index>(i)) = p.probs.transpose();
  }
  return out;
}

inline DatasetPrediction predict_dataset(const ClassifierModel& m, const MIMLDataset& ds) {
  require_shape(ds.label_count == m.label_count(), "dataset label count != classifier output");
  return predict_bags(m, refs_of(ds.bags));
}

// Entry is 1 iff prob > threshold (ties go negative).
inline Matrix binarize(const Matrix& probs, double threshold = 0.5) {
  if (!(threshold > 0.0 && threshold < 1.0)) {
    throw ConfigError("decision threshold must lie in (0, 1)");
  }
  return (probs.array() > threshold).cast<double>().matrix();
}

inline nlohmann::json to_json(const ClassifierModel& m) {
  return {{"depth", m.depth},
          {"pooling", "max"},
          {"instance_net", m.instance_net ? nn::to_json(*m.instance_net) : nlohmann::json(nullptr)},
          {"head", nn::to_json(m.head)}};
}

inline ClassifierModel classifier_from_json(const nlohmann::json& j) {
  try {
    ClassifierModel m;
    m.depth = j.at("depth").get<int>();
    if (j.at("pooling").get<std::string>() != "max") {
      throw ConfigError("only max pooling is supported");
    }
    if (!j.at("instance_net").is_null()) {
      m.instance_net = nn::net_from_json(j.at("instance_net"));
    }
    m.head = nn::net_from_json(j.at("head"));
    validate(m);
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("malformed classifier checkpoint: ") + e.what());
  }
}

}  // namespace glemiml
