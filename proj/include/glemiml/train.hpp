#pragma once

// Matching-interaction training. Each mini-batch runs
//   1. enhancer forward  -> distributions D, confidences P*
//   2. classifier forward -> logits S, probabilities P (held constant)
//   3. one optimizer step on the enhancer objective
//        beta1 * L_CL(P, P*) + beta2 * L_Sim(D) + beta3 * L_thr(D)
//   4. enhancer re-evaluated with its new parameters, D held constant,
//      one optimizer step on the classifier objective
//        rho * L_LC(P) + (1 - rho) * L_DC(D, S)
// Cross-model signals are constants during the other model's step.

#include "glemiml/classifier.hpp"
#include "glemiml/data.hpp"
#include "glemiml/enhancer.hpp"
#include "glemiml/losses.hpp"
#include "glemiml/metrics.hpp"

#include <cstdint>
#include <numeric>
#include <optional>
#include <random>
#include <string>
#include <vector>

namespace glemiml {

enum class OptimizerKind { sgd, adam };

inline OptimizerKind optimizer_from_string(const std::string& s) {
  if (s == "sgd") return OptimizerKind::sgd;
  if (s == "adam") return OptimizerKind::adam;
  throw ConfigError("unknown optimizer '" + s + "' (expected sgd or adam)");
}

inline std::string to_string(OptimizerKind k) { return k == OptimizerKind::sgd ? "sgd" : "adam"; }

class Optimizer {
 public:
  Optimizer(OptimizerKind kind, double learning_rate) : kind_(kind), lr_(learning_rate) {}

  void step(Vector& params, const Vector& grad) {
    require_shape(params.size() == grad.size(), "optimizer: gradient length mismatch");
    if (kind_ == OptimizerKind::sgd) {
      params -= lr_ * grad;
      return;
    }
    if (m_.size() != params.size()) {
      m_ = Vector::Zero(params.size());
      v_ = Vector::Zero(params.size());
    }
    ++t_;
    m_ = beta1_ * m_ + (1.0 - beta1_) * grad;
    v_ = beta2_ * v_ + (1.0 - beta2_) * grad.cwiseProduct(grad);
    const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
    params.array() -= lr_ * (m_.array() / c1) / ((v_.array() / c2).sqrt() + eps_);
  }

  long steps() const { return t_; }

 private:
  OptimizerKind kind_;
  double lr_;
  double beta1_ = 0.9;
  double beta2_ = 0.999;
  double eps_ = 1e-8;
  Vector m_, v_;
  long t_ = 0;
};

enum class Variant { full, A, B, C };

inline Variant variant_from_string(const std::string& s) {
  if (s == "full" || s == "GLEMIML") return Variant::full;
  if (s == "A") return Variant::A;
  if (s == "B") return Variant::B;
  if (s == "C") return Variant::C;
  throw ConfigError("unknown ablation variant '" + s + "' (expected full, A, B or C)");
}

inline std::string to_string(Variant v) {
  switch (v) {
    case Variant::full: return "full";
    case Variant::A: return "A";
    case Variant::B: return "B";
    case Variant::C: return "C";
  }
  return "full";
}

inline std::string variant_label(Variant v) {
  return v == Variant::full ? "GLEMIML" : "GLEMIML-" + to_string(v);
}

struct TrainConfig {
  std::size_t epochs = 200;
  std::size_t batch_size = 32;
  double learning_rate = 1e-3;
  OptimizerKind optimizer = OptimizerKind::adam;
  loss::LossWeights weights;
  Eigen::Index instance_k = 3;
  Eigen::Index label_k = 3;
  Eigen::Index embed_dim = 8;
  int classifier_depth = 2;
  loss::SimilarityMode similarity_mode = loss::SimilarityMode::mse;
  std::uint64_t seed = 7;
  Variant ablation = Variant::full;

  void validate() const {
    if (epochs < 1) throw ConfigError("epochs must be >= 1");
    if (batch_size < 2) throw ConfigError("batch_size must be >= 2");
    if (!(learning_rate > 0.0)) throw ConfigError("learning_rate must be > 0");
    if (instance_k < 1 || label_k < 1) throw ConfigError("neighbor counts must be >= 1");
    if (embed_dim < 1) throw ConfigError("embed_dim must be >= 1");
    if (classifier_depth < 1 || classifier_depth > 3) {
      throw ConfigError("classifier depth must be 1, 2 or 3");
    }
    weights.validate();
  }

  // The single dimension each ablation variant changes.
  int effective_depth() const {
    switch (ablation) {
      case Variant::A: return 1;
      case Variant::B: return 3;
      default: return classifier_depth;
    }
  }
  bool uses_instance_graph() const { return ablation != Variant::C; }
};

struct EpochRecord {
  std::size_t epoch = 0;  // 1-based
  double l_cl = 0, l_sim = 0, l_thr = 0, l_cle = 0;
  double l_lc = 0, l_dc = 0, l_c = 0;
  std::size_t enhancer_steps = 0;
  std::size_t classifier_steps = 0;
  std::optional<metrics::MetricsReport> validation;
};

struct TrainHistory {
  std::vector<EpochRecord> epochs;
  std::size_t instance_graphs_built = 0;
};

// ---------------------------------------------------------------------------
// Objectives with gradients (also used directly by gradient checks).

struct EnhancerObjective {
  double l_cl = 0, l_sim = 0, l_thr = 0, total = 0;
  Vector grad;  // enhancer parameters
  std::size_t instance_graphs_built = 0;
};

inline EnhancerObjective enhancer_objective(const EnhancerModel& enh, const BagRefs& batch,
                                            const Matrix& classifier_probs,
                                            const loss::LossWeights& w,
                                            loss::SimilarityMode mode) {
  const Matrix labels = [&] {
    Matrix l(static_cast<Eigen::Index>(batch.size()), enh.label_count());
    for (std::size_t i = 0; i < batch.size(); ++i) {
      l.row(static_cast<Eigen::Index>(i)) = batch[i]->labels.transpose();
    }
    return l;
  }();
  const EnhancerPass pass = enhance_forward(enh, batch);
  const Matrix& d = pass.batch.distributions;

  const auto cl = loss::interaction_loss_batch(classifier_probs, pass.batch.confidences, labels,
                                               w.gamma_pos, w.gamma_neg);
  const loss::SimilarityPair sp{loss::cosine_matrix(loss::pooled_features(batch)),
                                loss::cosine_matrix(d)};
  const auto sim = loss::similarity_loss_grad(sp, mode);
  const auto thr = loss::threshold_loss_detail(d, labels);

  EnhancerObjective out;
  out.l_cl = cl.value;
  out.l_sim = sim.value;
  out.l_thr = thr.used > 0 ? thr.value : 0.0;
  out.total = loss::enhancer_total_loss(w, out.l_cl, out.l_sim, out.l_thr);
  out.instance_graphs_built = pass.instance_graphs_built;

  const Matrix grad_d = w.beta2 * loss::cosine_backward(d, sp.a, sim.grad) + w.beta3 * thr.grad;
  const Matrix grad_conf = w.beta1 * cl.grad;
  out.grad = enhance_backward(enh, pass, output_backward(pass.batch, grad_d, grad_conf));
  return out;
}

struct ClassifierObjective {
  double l_lc = 0, l_dc = 0, total = 0;
  Vector grad;  // classifier parameters
};

inline ClassifierObjective classifier_objective(const ClassifierModel& clf, const BagRefs& batch,
                                                const Matrix& distributions, double rho) {
  const auto b = static_cast<Eigen::Index>(batch.size());
  std::vector<ClassifierTrace> traces;
  traces.reserve(batch.size());
  Matrix s(b, clf.label_count()), p(b, clf.label_count()), labels(b, clf.label_count());
  for (Eigen::Index i = 0; i < b; ++i) {
    traces.push_back(predict_bag_traced(clf, *batch[static_cast<std::size_t>(i)]));
    s.row(i) = traces.back().logits.transpose();
    p.row(i) = traces.back().probs.transpose();
    labels.row(i) = batch[static_cast<std::size_t>(i)]->labels.transpose();
  }
  const auto lc = loss::logical_bce_loss_grad(p, labels);
  const auto dc = loss::distribution_loss_grad(distributions, s);
  ClassifierObjective out;
  out.l_lc = lc.value;
  out.l_dc = dc.value;
  out.total = loss::classifier_total_loss(rho, lc.value, dc.value);
  const Matrix grad_s =
      rho * lc.grad.cwiseProduct(p.cwiseProduct((1.0 - p.array()).matrix())) + (1.0 - rho) * dc.grad;
  out.grad = Vector::Zero(clf.parameter_count());
  for (Eigen::Index i = 0; i < b; ++i) {
    out.grad += predict_bag_backward(clf, traces[static_cast<std::size_t>(i)],
                                     grad_s.row(i).transpose());
  }
  return out;
}

// ---------------------------------------------------------------------------

inline metrics::MetricsReport evaluate(const EnhancerModel& enh, const ClassifierModel& clf,
                                       const MIMLDataset& ds) {
  validate(enh);
  validate(clf);
  require_shape(enh.feature_dim() == ds.feature_dim && clf.feature_dim() == ds.feature_dim,
                "model feature dim does not match dataset");
  require_shape(enh.label_count() == ds.label_count && clf.label_count() == ds.label_count,
                "model label count does not match dataset");
  const auto pred = predict_dataset(clf, ds);
  return metrics::evaluate_predictions(pred.probs, ds.label_matrix());
}

struct TrainResult {
  EnhancerModel enhancer;
  ClassifierModel classifier;
  TrainHistory history;
};

class Trainer {
 public:
  Trainer(const MIMLDataset& train_set, const TrainConfig& cfg)
      : data_(train_set), cfg_(cfg),
        enh_opt_(cfg.optimizer, cfg.learning_rate),
        clf_opt_(cfg.optimizer, cfg.learning_rate),
        rng_(cfg.seed ^ 0x5DEECE66DULL) {
    cfg_.validate();
    validate_dataset(data_);
    if (data_.size() < 2) {
      throw ConfigError("training needs at least 2 bags");
    }
    EnhancerOptions opt;
    opt.embed_dim = cfg_.embed_dim;
    opt.instance_k = cfg_.instance_k;
    opt.label_k = cfg_.label_k;
    opt.use_instance_graph = cfg_.uses_instance_graph();
    enhancer_ = init_enhancer(data_.feature_dim, data_.label_count, opt, cfg_.seed);
    classifier_ = init_classifier(data_.feature_dim, data_.label_count, cfg_.effective_depth(),
                                  cfg_.seed + 1);
  }

  const EnhancerModel& enhancer() const { return enhancer_; }
  const ClassifierModel& classifier() const { return classifier_; }
  const TrainHistory& history() const { return history_; }

  // Steps (1)-(3): one enhancer update; classifier outputs are constants.
  EnhancerObjective enhancer_step(const BagRefs& batch) {
    const Matrix probs = predict_bags(classifier_, batch).probs;
    EnhancerObjective obj =
        enhancer_objective(enhancer_, batch, probs, cfg_.weights, cfg_.similarity_mode);
    Vector theta = to_vector(enhancer_);
    enh_opt_.step(theta, obj.grad);
    from_vector(enhancer_, theta);
    history_.instance_graphs_built += obj.instance_graphs_built;
    return obj;
  }

  // Step (4): re-evaluate the enhancer, hold its distributions constant and
  // update the classifier.
  ClassifierObjective classifier_step(const BagRefs& batch) {
    const EnhancerPass pass = enhance_forward(enhancer_, batch);
    history_.instance_graphs_built += pass.instance_graphs_built;
    ClassifierObjective obj =
        classifier_objective(classifier_, batch, pass.batch.distributions, cfg_.weights.rho);
    Vector phi = to_vector(classifier_);
    clf_opt_.step(phi, obj.grad);
    from_vector(classifier_, phi);
    return obj;
  }

  // Contiguous slices of a shuffled index list; a final slice smaller than
  // 2 is dropped.
  std::vector<BagRefs> epoch_batches() {
    std::vector<std::size_t> order(data_.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::shuffle(order.begin(), order.end(), rng_);
    std::vector<BagRefs> batches;
    for (std::size_t start = 0; start < order.size(); start += cfg_.batch_size) {
      const std::size_t end = std::min(order.size(), start + cfg_.batch_size);
      if (end - start < 2) break;
      BagRefs b;
      for (std::size_t i = start; i < end; ++i) b.push_back(&data_.bags[order[i]]);
      batches.push_back(std::move(b));
    }
    return batches;
  }

  const EpochRecord& run_epoch(const MIMLDataset* validation = nullptr) {
    EpochRecord rec;
    rec.epoch = history_.epochs.size() + 1;
    const auto batches = epoch_batches();
    for (std::size_t bi = 0; bi < batches.size(); ++bi) {
      EnhancerObjective e;
      ClassifierObjective c;
      try {
        e = enhancer_step(batches[bi]);
        check_finite(e.total, "enhancer");
        ++rec.enhancer_steps;
        c = classifier_step(batches[bi]);
        check_finite(c.total, "classifier");
        ++rec.classifier_steps;
      } catch (const NumericError& err) {
        throw NumericError("training diverged at epoch " + std::to_string(rec.epoch) + ", batch " +
                           std::to_string(bi) + ": " + err.what());
      }
      rec.l_cl += e.l_cl;
      rec.l_sim += e.l_sim;
      rec.l_thr += e.l_thr;
      rec.l_cle += e.total;
      rec.l_lc += c.l_lc;
      rec.l_dc += c.l_dc;
      rec.l_c += c.total;
    }
    const double n = static_cast<double>(std::max<std::size_t>(1, batches.size()));
    for (double* v : {&rec.l_cl, &rec.l_sim, &rec.l_thr, &rec.l_cle, &rec.l_lc, &rec.l_dc, &rec.l_c}) {
      *v /= n;
    }
    if (validation != nullptr && !validation->bags.empty()) {
      try {
        rec.validation = evaluate(enhancer_, classifier_, *validation);
      } catch (const DegenerateInputError&) {
        rec.validation.reset();
      }
    }
    history_.epochs.push_back(std::move(rec));
    return history_.epochs.back();
  }

  TrainResult run(const MIMLDataset* validation = nullptr) {
    for (std::size_t e = 0; e < cfg_.epochs; ++e) {
      run_epoch(validation);
    }
    return {enhancer_, classifier_, history_};
  }

 private:
  static void check_finite(double v, const char* side) {
    if (!std::isfinite(v)) throw NumericError(std::string(side) + " loss is not finite");
  }

  MIMLDataset data_;
  TrainConfig cfg_;
  EnhancerModel enhancer_;
  ClassifierModel classifier_;
  Optimizer enh_opt_;
  Optimizer clf_opt_;
  std::mt19937_64 rng_;
  TrainHistory history_;
};

inline TrainResult train(const MIMLDataset& train_set, const TrainConfig& cfg,
                         const MIMLDataset* validation = nullptr) {
  Trainer t(train_set, cfg);
  return t.run(validation);
}

// ---------------------------------------------------------------------------
// Ablation grid

struct AblationRow {
  Variant variant = Variant::full;
  int classifier_depth = 2;
  bool instance_graph = true;
  std::size_t instance_graphs_built = 0;
  metrics::MetricsReport report;
};

inline std::vector<AblationRow> run_ablation(
    const MIMLDataset& train_set, const MIMLDataset& eval_set, const TrainConfig& base,
    const std::vector<Variant>& variants = {Variant::full, Variant::A, Variant::B, Variant::C}) {
  std::vector<AblationRow> rows;
  for (Variant v : variants) {
    TrainConfig cfg = base;
    cfg.ablation = v;
    TrainResult r = train(train_set, cfg);
    AblationRow row;
    row.variant = v;
    row.classifier_depth = cfg.effective_depth();
    row.instance_graph = cfg.uses_instance_graph();
    row.instance_graphs_built = r.history.instance_graphs_built;
    row.report = evaluate(r.enhancer, r.classifier, eval_set);
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace glemiml
