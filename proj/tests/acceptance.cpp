// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any
// failure. Tolerances are fixed here, not taken from the command line.

#include "support.hpp"

#include "glemiml/cli.hpp"

#include <chrono>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <random>
#include <sstream>

namespace fs = std::filesystem;
using namespace glemiml;

namespace {

constexpr double kGradTol = 1e-4;
constexpr double kGradEps = 1e-6;
constexpr int kGradConfigs = 50;
constexpr double kMetricTol = 1e-12;
constexpr double kRowSumTol = 1e-10;
constexpr double kPsdTol = -1e-10;
constexpr double kEnergyTol = 1e-9;
constexpr double kCosineMargin = 0.02;
constexpr std::size_t kRecoveryEpochs = 200;
constexpr std::size_t kAblateEpochs = 20;

struct Outcome {
  bool pass = true;
  std::string detail;
};

std::string num(double v) {
  std::ostringstream os;
  os.precision(4);
  os << v;
  return os.str();
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

fs::path scratch(const std::string& tag) {
  std::random_device rd;
  const fs::path p = fs::temp_directory_path() / ("glemiml-accept-" + tag + "-" + std::to_string(rd()));
  fs::create_directories(p);
  return p;
}

// ---------------------------------------------------------------------------
// 1. Gradient fidelity of every loss composed with the networks feeding it.

Outcome gradient_fidelity() {
  gt::Gen g(101);
  struct Case {
    std::string name;
    double worst = 0;
  };
  std::vector<Case> cases = {{"interaction"}, {"similarity-mse"}, {"similarity-literal"}, {"threshold"},
                             {"enhancer-total"}, {"bce"},          {"distribution"},        {"classifier-total"}};
  for (int trial = 0; trial < kGradConfigs; ++trial) {
    const Eigen::Index d = g.integer(2, 4), t = g.integer(3, 5);
    const auto bags = g.bags(static_cast<std::size_t>(g.integer(2, 5)), d, t, 1, 4);
    const BagRefs refs = refs_of(bags);
    const auto b = static_cast<Eigen::Index>(bags.size());
    const auto enh = gt::random_enhancer(g, d, t);
    const Matrix probs = g.uniform_matrix(b, t, 0.05, 0.95);
    loss::LossWeights w;
    w.gamma_pos = g.uniform(0, 2);
    w.gamma_neg = g.uniform(0, 4);

    auto enhancer_case = [&](double b1, double b2, double b3, loss::SimilarityMode mode) {
      loss::LossWeights ww = w;
      ww.beta1 = b1;
      ww.beta2 = b2;
      ww.beta3 = b3;
      auto fn = [&](const Vector& theta) {
        auto m = enh;
        from_vector(m, theta);
        const auto o = enhancer_objective(m, refs, probs, ww, mode);
        return std::make_pair(o.total, o.grad);
      };
      return nn::grad_check(fn, to_vector(enh), kGradEps);
    };
    const double r1 = g.uniform(0.1, 1), r2 = g.uniform(0.1, 1), r3 = g.uniform(0.1, 1);
    const double rs = r1 + r2 + r3;
    const double errs_e[] = {
        enhancer_case(1, 0, 0, loss::SimilarityMode::mse),
        enhancer_case(0, 1, 0, loss::SimilarityMode::mse),
        enhancer_case(0, 1, 0, loss::SimilarityMode::literal),
        enhancer_case(0, 0, 1, loss::SimilarityMode::mse),
        enhancer_case(r1 / rs, r2 / rs, 1.0 - r1 / rs - r2 / rs,
                      trial % 2 == 0 ? loss::SimilarityMode::mse : loss::SimilarityMode::literal),
    };
    for (int k = 0; k < 5; ++k) cases[static_cast<std::size_t>(k)].worst = std::max(cases[static_cast<std::size_t>(k)].worst, errs_e[k]);

    const auto clf = gt::random_classifier(g, d, t, static_cast<int>(g.integer(1, 3)));
    const Matrix dist = row_softmax(g.normal_matrix(b, t));
    auto classifier_case = [&](double rho) {
      auto fn = [&](const Vector& phi) {
        auto m = clf;
        from_vector(m, phi);
        const auto o = classifier_objective(m, refs, dist, rho);
        return std::make_pair(o.total, o.grad);
      };
      return nn::grad_check(fn, to_vector(clf), kGradEps);
    };
    cases[5].worst = std::max(cases[5].worst, classifier_case(1.0));
    cases[6].worst = std::max(cases[6].worst, classifier_case(0.0));
    cases[7].worst = std::max(cases[7].worst, classifier_case(g.uniform(0.05, 0.95)));
  }
  Outcome o;
  for (const auto& c : cases) {
    if (!(c.worst < kGradTol)) o.pass = false;
    o.detail += c.name + "=" + num(c.worst) + " ";
  }
  o.detail += "(max rel err < " + num(kGradTol) + ", " + std::to_string(kGradConfigs) + " configs each)";
  return o;
}

// ---------------------------------------------------------------------------
// 2. Metric oracle equivalence.

Outcome metric_oracles() {
  gt::Gen g(202);
  double worst = 0;
  int ties = 0, skips = 0;
  for (int trial = 0; trial < 100; ++trial) {
    Matrix truth = g.binary_matrix(20, 6, g.uniform(0.1, 0.6));
    if (trial % 3 == 0) {
      truth.row(0).setOnes();   // RL skip
      truth.row(1).setZero();   // RL skip
      truth.col(5).setZero();   // mAP skip
    }
    const Matrix scores = trial % 2 == 0 ? g.tied_scores(20, 6, 4) : g.uniform_matrix(20, 6);
    const Matrix pred = (scores.array() > 0.5).cast<double>().matrix();
    for (Eigen::Index i = 0; i < 20; ++i) {
      const double s = truth.row(i).sum();
      if (s == 0 || s == 6) ++skips;
    }
    if (trial % 2 == 0) ++ties;
    worst = std::max({worst, std::abs(metrics::hamming_loss(pred, truth) - gt::oracle_hamming(pred, truth)),
                      std::abs(metrics::ranking_loss(scores, truth) - gt::oracle_ranking(scores, truth)),
                      std::abs(metrics::macro_average_precision(scores, truth) - gt::oracle_map(scores, truth)),
                      std::abs(metrics::macro_f1(pred, truth) - gt::oracle_macro_f1(pred, truth))});
  }
  Outcome o;
  o.pass = worst <= kMetricTol && ties > 0 && skips > 0;
  o.detail = "max |lib - oracle| = " + num(worst) + " over 100 instances (" + std::to_string(ties) +
             " with ties, " + std::to_string(skips) + " skipped bags; tol " + num(kMetricTol) + ")";
  return o;
}

// ---------------------------------------------------------------------------
// 3. Graph invariants.

Outcome graph_invariants() {
  gt::Gen g(303);
  bool symmetric = true;
  double worst_row = 0, worst_quad = 0, worst_energy = 0;
  for (int k = 0; k < 100; ++k) {
    const auto wg = gt::random_graph(g);
    const Matrix& a = wg.adjacency;
    symmetric = symmetric && a == a.transpose() && a.diagonal().isZero(0);
    const auto lap = graph::laplacian(wg);
    worst_row = std::max(worst_row, lap.matrix.rowwise().sum().cwiseAbs().maxCoeff());
    for (int v = 0; v < 1000; ++v) {
      Vector x = g.normal_matrix(wg.size(), 1).col(0);
      x /= std::max(1e-12, x.norm());
      worst_quad = std::min(worst_quad, x.dot(lap.matrix * x));
    }
    const Matrix emb = g.normal_matrix(wg.size(), g.integer(1, 5));
    worst_energy = std::max(worst_energy, std::abs(graph::smoothness_energy(emb, lap) - gt::oracle_energy(emb, a)));
  }
  Outcome o;
  o.pass = symmetric && worst_row < kRowSumTol && worst_quad >= kPsdTol && worst_energy <= kEnergyTol;
  o.detail = std::string("symmetric+zero diag=") + (symmetric ? "yes" : "no") + ", max |row sum|=" +
             num(worst_row) + " (< " + num(kRowSumTol) + "), min x'Lx=" + num(worst_quad) + " (>= " +
             num(kPsdTol) + "), max energy gap=" + num(worst_energy) + " (<= " + num(kEnergyTol) + ")";
  return o;
}

// ---------------------------------------------------------------------------
// 4. Synthetic recovery on the default generator.

double mean_row_cosine(const Matrix& a, const Matrix& b) {
  double s = 0;
  for (Eigen::Index i = 0; i < a.rows(); ++i) s += gt::oracle_cosine(a.row(i).transpose(), b.row(i).transpose());
  return s / static_cast<double>(a.rows());
}

Outcome synthetic_recovery() {
  const auto start = std::chrono::steady_clock::now();
  const SynthConfig sc;  // 500 bags, d=10, t=6, 2-5 instances, seed 7
  const SyntheticData syn = generate_synthetic(sc);
  const DatasetSplit split = split_dataset(syn.dataset, SplitSpec{0.7, 0.2, 0.1, 7});
  TrainConfig cfg;
  cfg.epochs = kRecoveryEpochs;
  cfg.seed = 7;
  const TrainResult r = train(split.train, cfg);

  Matrix truth(static_cast<Eigen::Index>(split.train_indices.size()), sc.label_count);
  for (std::size_t i = 0; i < split.train_indices.size(); ++i) {
    truth.row(static_cast<Eigen::Index>(i)) = syn.truth[split.train_indices[i]].transpose();
  }
  const Matrix recovered = enhance_batch(r.enhancer, split.train.bags).distributions;
  Matrix logical = split.train.label_matrix();
  for (Eigen::Index i = 0; i < logical.rows(); ++i) logical.row(i) /= logical.row(i).sum();
  const double cos_rec = mean_row_cosine(recovered, truth);
  const double cos_log = mean_row_cosine(logical, truth);

  const Matrix test_labels = split.test.label_matrix();
  const double rl_half = metrics::ranking_loss(Matrix::Constant(test_labels.rows(), test_labels.cols(), 0.5), test_labels);
  const double rl_trained = evaluate(r.enhancer, r.classifier, split.test).ranking_loss;
  const double thr_first = r.history.epochs.front().l_thr, thr_last = r.history.epochs.back().l_thr;
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

  Outcome o;
  const bool a = cos_rec - cos_log >= kCosineMargin;
  const bool b = rl_trained < rl_half;
  const bool c = thr_last < thr_first;
  o.pass = a && b && c && secs < 300;
  o.detail = "(a) cosine recovered " + num(cos_rec) + " vs logical " + num(cos_log) + " (margin >= " +
             num(kCosineMargin) + ")" + (a ? "" : " FAILED") + "; (b) test RL " + num(rl_trained) +
             " < untrained " + num(rl_half) + (b ? "" : " FAILED") + "; (c) L_thr " + num(thr_first) + " -> " +
             num(thr_last) + (c ? "" : " FAILED") + "; " + std::to_string(kRecoveryEpochs) + " epochs in " +
             num(secs) + " s";
  return o;
}

// ---------------------------------------------------------------------------
// 5. Ablation harness through the command line.

int invoke(const std::vector<std::string>& args, std::string* err_text = nullptr) {
  std::ostringstream out, err;
  const int code = cli::run(args, out, err);
  if (err_text != nullptr) *err_text = err.str();
  return code;
}

Outcome ablation_harness() {
  const fs::path dir = scratch("ablate");
  std::string err;
  const int code = invoke({"ablate", "--synth", "default", "--epochs", std::to_string(kAblateEpochs), "--out",
                           (dir / "out").string()},
                          &err);
  Outcome o;
  if (code != 0) {
    o.pass = false;
    o.detail = "ablate exited " + std::to_string(code) + ": " + err;
    fs::remove_all(dir);
    return o;
  }
  const auto j = nlohmann::json::parse(slurp(dir / "out" / "ablation.json"));
  const std::string text = slurp(dir / "out" / "ablation.txt");
  fs::remove_all(dir);

  const std::vector<std::string> names = {"GLEMIML", "GLEMIML-A", "GLEMIML-B", "GLEMIML-C"};
  const std::vector<int> depth = {2, 1, 3, 2};
  const std::vector<bool> graph_on = {true, true, true, false};
  bool shape = j["variants"].size() == 4;
  bool dims = true;
  std::size_t c_graphs = 1;
  int cells = 0;
  for (std::size_t v = 0; shape && v < 4; ++v) {
    const auto& row = j["variants"][v];
    shape = shape && row["variant"] == names[v];
    for (const char* k : {"hamming_loss", "ranking_loss", "macro_avg_precision", "macro_f1"}) {
      const double x = row["metrics"][k].get<double>();
      if (std::isfinite(x) && x >= 0 && x <= 1) ++cells;
    }
    dims = dims && row["classifier_depth"] == depth[v] && row["instance_graph"] == graph_on[v];
    const auto built = row["instance_graphs_built"].get<std::size_t>();
    if (v == 3) c_graphs = built;
    else dims = dims && built > 0;
  }
  int metric_rows = 0;
  for (const char* label : {"HL↓", "RL↓", "mAP↑", "Ma-F1↑"}) {
    for (std::size_t p = text.find(label); p != std::string::npos; p = text.find(label, p + 1)) ++metric_rows;
  }
  o.pass = shape && cells == 16 && metric_rows == 16 && c_graphs == 0 && dims;
  o.detail = std::to_string(j["variants"].size()) + " variants, " + std::to_string(cells) +
             " finite metric cells, " + std::to_string(metric_rows) + " table rows; variant C instance graphs built=" +
             std::to_string(c_graphs) + "; depths 2/1/3/2 and graph on/on/on/off " + (dims ? "as documented" : "MISMATCH");
  return o;
}

// ---------------------------------------------------------------------------
// 6. Determinism: whole output trees compared byte for byte.

std::map<std::string, std::string> tree(const fs::path& root) {
  std::map<std::string, std::string> files;
  for (const auto& e : fs::recursive_directory_iterator(root)) {
    if (e.is_regular_file()) files[fs::relative(e.path(), root).string()] = slurp(e.path());
  }
  return files;
}

Outcome determinism() {
  const fs::path dir = scratch("determinism");
  const std::vector<std::string> args = {"train", "--synth", "default", "--epochs", "10", "--seed", "11",
                                         "--checkpoint-every", "5", "--export-distributions"};
  std::vector<std::map<std::string, std::string>> runs;
  std::string err;
  for (const char* root : {"r1", "r2"}) {
    ::setenv(cli::kOutputRootEnv, (dir / root).c_str(), 1);
    const int code = invoke(args, &err);
    ::unsetenv(cli::kOutputRootEnv);
    if (code != 0) {
      fs::remove_all(dir);
      return {false, "train exited " + std::to_string(code) + ": " + err};
    }
    runs.push_back(tree(dir / root));
  }
  fs::remove_all(dir);
  Outcome o;
  bool has_report = false, has_ckpt = false;
  for (const auto& [name, _] : runs[0]) {
    has_report = has_report || name.find("report.json") != std::string::npos;
    has_ckpt = has_ckpt || name.find("checkpoints") != std::string::npos;
  }
  o.pass = runs[0] == runs[1] && has_report && has_ckpt;
  o.detail = std::to_string(runs[0].size()) + " files per run, trees " +
             (runs[0] == runs[1] ? "byte-identical" : "DIFFER");
  return o;
}

// ---------------------------------------------------------------------------
// 7. The published comparison values are documented as context only.

Outcome non_reproducibility(const fs::path& readme, const fs::path& self) {
  const std::string doc = slurp(readme);
  Outcome o;
  const std::vector<std::string> phrases = {"not published", "not asserted", "K, δ, β, ρ, γ±, epochs"};
  std::string missing;
  for (const auto& p : phrases)
    if (doc.find(p) == std::string::npos) missing += "'" + p + "' ";
  // Assemble published values at run time so this file never contains them.
  const std::string src = slurp(self);
  std::string found;
  for (const char* tail : {"1650", "1590", "7091", "6747", "0235", "0097"}) {
    const std::string v = std::string("0.") + tail;
    if (src.find(v) != std::string::npos) found += v + " ";
  }
  o.pass = !doc.empty() && !src.empty() && missing.empty() && found.empty();
  o.detail = doc.empty() ? "README not found at " + readme.string()
             : !missing.empty() ? "README lacks " + missing
             : !found.empty()   ? "acceptance source asserts published values: " + found
                                : "README states datasets and hyperparameters are unpublished; no published value asserted";
  return o;
}

}  // namespace

int main(int argc, char** argv) {
  fs::path readme = fs::path(GLEMIML_SOURCE_DIR) / "README.md";
  fs::path self = fs::path(GLEMIML_SOURCE_DIR) / "tests" / "acceptance.cpp";
  if (argc > 1) readme = argv[1];
  if (argc > 2) self = argv[2];

  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"gradient fidelity", gradient_fidelity},
      {"metric oracle equivalence", metric_oracles},
      {"graph invariants", graph_invariants},
      {"synthetic recovery", synthetic_recovery},
      {"ablation harness", ablation_harness},
      {"determinism", determinism},
      {"non-reproducibility statement", [&] { return non_reproducibility(readme, self); }},
  };
  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Outcome o;
    const auto t0 = std::chrono::steady_clock::now();
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (!o.pass) ++failures;
    std::cout << (o.pass ? "PASS" : "FAIL") << " criterion " << (i + 1) << " " << criteria[i].first << ": "
              << o.detail << " [" << num(secs) << " s]" << std::endl;
  }
  return failures == 0 ? 0 : 1;
}
