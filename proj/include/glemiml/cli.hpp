#pragma once

// Command-line front end. Subcommands: train, ablate, evaluate, synth, report.
//
// Exit codes: 0 success, 1 configuration error, 2 data error, 3 numeric
// divergence. Options may also come from an INI file given by --config whose
// section names match the subcommands; flags on the command line win.

#include "glemiml/report.hpp"
#include "glemiml/train.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <charconv>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

namespace glemiml::cli {

namespace fs = std::filesystem;

inline constexpr const char* kVersion = "1.0.0";
inline constexpr const char* kOutputRootEnv = "GLEMIML_OUTPUT_ROOT";

enum ExitCode : int { kOk = 0, kConfigFailure = 1, kDataFailure = 2, kNumericFailure = 3 };

struct DataSource {
  std::string path;
  std::string synth;  // "default": the built-in generator, tuned by synth_cfg
  SynthConfig synth_cfg;

  bool synthetic() const { return !synth.empty(); }

  void validate() const {
    if (path.empty() == synth.empty()) {
      throw ConfigError("exactly one data source required: --data FILE or --synth default");
    }
    if (synthetic() && synth != "default") {
      throw ConfigError("--synth accepts only 'default' (tune it with the --synth-* options)");
    }
    synth_cfg.validate();
  }
};

struct ExportFlags {
  std::size_t checkpoint_every = 0;  // 0 writes only the final checkpoint
  bool distributions = false;
  long dump_graph = -1;  // dataset bag index, -1 disables
};

struct ExperimentConfig {
  DataSource data;
  SplitSpec split{0.7, 0.2, 0.1, 7};
  TrainConfig train;
  std::string optimizer = "adam";
  std::string similarity = "mse";
  std::string variant = "full";
  std::string out_dir;
  std::string method = "GLEMIML";
  ExportFlags exports;

  // Copies the string-typed options into `train` and checks everything.
  void resolve() {
    train.optimizer = optimizer_from_string(optimizer);
    train.similarity_mode = loss::similarity_mode_from_string(similarity);
    train.ablation = variant_from_string(variant);
    data.validate();
    split.validate();
    train.validate();
  }
};

struct EvaluateArgs {
  std::string enhancer;
  std::string classifier;
  std::string split = "test";
};

struct SynthArgs {
  SynthConfig cfg;
  std::string out;
  std::string truth;
};

struct ReportArgs {
  std::vector<std::string> inputs;
  std::string out;
  std::string json;
};

// ---------------------------------------------------------------------------
// Resolved configuration as INI text

using KeyValues = std::vector<std::pair<std::string, std::string>>;

inline std::string fmt(double v) {
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}
inline std::string fmt(bool v) { return v ? "true" : "false"; }
inline std::string fmt(const std::string& s) { return "\"" + s + "\""; }
template <typename Int>
  requires std::is_integral_v<Int>
inline std::string fmt(Int v) {
  return std::to_string(v);
}

inline void add_synth_keys(KeyValues& kv, const SynthConfig& s) {
  kv.emplace_back("synth-bags", fmt(s.num_bags));
  kv.emplace_back("synth-dim", fmt(s.feature_dim));
  kv.emplace_back("synth-labels", fmt(s.label_count));
  kv.emplace_back("synth-min-instances", fmt(s.instances_min));
  kv.emplace_back("synth-max-instances", fmt(s.instances_max));
  kv.emplace_back("synth-seed", fmt(s.seed));
}

inline void add_data_keys(KeyValues& kv, const ExperimentConfig& c) {
  if (!c.data.path.empty()) kv.emplace_back("data", fmt(c.data.path));
  if (!c.data.synth.empty()) {
    kv.emplace_back("synth", fmt(c.data.synth));
    add_synth_keys(kv, c.data.synth_cfg);
  }
  kv.emplace_back("train-frac", fmt(c.split.train_frac));
  kv.emplace_back("test-frac", fmt(c.split.test_frac));
  kv.emplace_back("val-frac", fmt(c.split.val_frac));
  kv.emplace_back("split-seed", fmt(c.split.seed));
}

inline void add_train_keys(KeyValues& kv, const ExperimentConfig& c, bool with_variant) {
  const TrainConfig& t = c.train;
  kv.emplace_back("epochs", fmt(t.epochs));
  kv.emplace_back("batch-size", fmt(t.batch_size));
  kv.emplace_back("lr", fmt(t.learning_rate));
  kv.emplace_back("optimizer", fmt(c.optimizer));
  kv.emplace_back("beta1", fmt(t.weights.beta1));
  kv.emplace_back("beta2", fmt(t.weights.beta2));
  kv.emplace_back("beta3", fmt(t.weights.beta3));
  kv.emplace_back("rho", fmt(t.weights.rho));
  kv.emplace_back("gamma-pos", fmt(t.weights.gamma_pos));
  kv.emplace_back("gamma-neg", fmt(t.weights.gamma_neg));
  kv.emplace_back("instance-k", fmt(t.instance_k));
  kv.emplace_back("label-k", fmt(t.label_k));
  kv.emplace_back("embed-dim", fmt(t.embed_dim));
  kv.emplace_back("depth", fmt(t.classifier_depth));
  kv.emplace_back("similarity", fmt(c.similarity));
  kv.emplace_back("seed", fmt(t.seed));
  if (with_variant) kv.emplace_back("variant", fmt(c.variant));
}

inline std::string render_ini(const std::string& section, const KeyValues& kv) {
  std::string s = "[" + section + "]\n";
  for (const auto& [k, v] : kv) s += k + "=" + v + "\n";
  return s;
}

// The hashed part excludes output locations and export switches, so the
// same experiment written to two directories carries the same hash.
struct ResolvedConfig {
  std::string section;
  KeyValues experiment;
  KeyValues output;

  std::string experiment_ini() const { return render_ini(section, experiment); }
  std::string full_ini() const {
    KeyValues all = experiment;
    all.insert(all.end(), output.begin(), output.end());
    return render_ini(section, all);
  }
  // What a run records about itself: everything but the directory it was
  // written to, so replays land wherever --out or the output root says.
  std::string saved_ini() const {
    KeyValues all = experiment;
    for (const auto& kv : output)
      if (kv.first != "out") all.push_back(kv);
    return render_ini(section, all);
  }
  std::string hash() const { return report::hex64(report::fnv1a(experiment_ini())); }
};

inline ResolvedConfig resolved_train(const ExperimentConfig& c) {
  ResolvedConfig rc{"train", {}, {}};
  add_data_keys(rc.experiment, c);
  add_train_keys(rc.experiment, c, true);
  rc.output = {{"checkpoint-every", fmt(c.exports.checkpoint_every)},
               {"export-distributions", fmt(c.exports.distributions)},
               {"dump-graph", fmt(c.exports.dump_graph)},
               {"method", fmt(c.method)}};
  if (!c.out_dir.empty()) rc.output.emplace_back("out", fmt(c.out_dir));
  return rc;
}

inline ResolvedConfig resolved_ablate(const ExperimentConfig& c, const std::vector<std::string>& only) {
  ResolvedConfig rc{"ablate", {}, {}};
  add_data_keys(rc.experiment, c);
  add_train_keys(rc.experiment, c, false);
  if (!only.empty()) {
    std::string list;
    for (const auto& v : only) list += (list.empty() ? "" : ",") + fmt(v);
    rc.experiment.emplace_back("only", "[" + list + "]");
  }
  if (!c.out_dir.empty()) rc.output.emplace_back("out", fmt(c.out_dir));
  return rc;
}

inline ResolvedConfig resolved_evaluate(const ExperimentConfig& c, const EvaluateArgs& a) {
  ResolvedConfig rc{"evaluate", {}, {}};
  add_data_keys(rc.experiment, c);
  rc.experiment.emplace_back("enhancer", fmt(a.enhancer));
  rc.experiment.emplace_back("classifier", fmt(a.classifier));
  rc.experiment.emplace_back("split", fmt(a.split));
  rc.output = {{"method", fmt(c.method)}};
  if (!c.out_dir.empty()) rc.output.emplace_back("out", fmt(c.out_dir));
  return rc;
}

inline ResolvedConfig resolved_synth(const SynthArgs& a) {
  ResolvedConfig rc{"synth", {}, {}};
  add_synth_keys(rc.experiment, a.cfg);
  if (!a.out.empty()) rc.output.emplace_back("out", fmt(a.out));
  if (!a.truth.empty()) rc.output.emplace_back("truth", fmt(a.truth));
  return rc;
}

// ---------------------------------------------------------------------------
// Filesystem helpers

inline fs::path output_root() {
  const char* env = std::getenv(kOutputRootEnv);
  return (env != nullptr && *env != '\0') ? fs::path(env) : fs::path("runs");
}

inline fs::path prepare_output_dir(const std::string& requested, const std::string& fallback_name) {
  const fs::path dir = requested.empty() ? output_root() / fallback_name : fs::path(requested);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) {
    throw ConfigError("cannot create output directory " + dir.string() +
                      (ec ? ": " + ec.message() : std::string()));
  }
  return dir;
}

// One experiment per output directory at a time.
class OutputLock {
 public:
  explicit OutputLock(const fs::path& dir) : path_(dir / ".glemiml.lock") {
    std::FILE* f = std::fopen(path_.c_str(), "wx");
    if (f == nullptr) {
      throw ConfigError("output directory is in use (lockfile " + path_.string() + " exists)");
    }
    std::fclose(f);
  }
  ~OutputLock() {
    std::error_code ec;
    fs::remove(path_, ec);
  }
  OutputLock(const OutputLock&) = delete;
  OutputLock& operator=(const OutputLock&) = delete;

 private:
  fs::path path_;
};

inline void write_file(const fs::path& path, const std::function<void(std::ostream&)>& body) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write " + path.string());
  body(out);
  if (!out) throw ConfigError("write failed for " + path.string());
}

inline void write_json(const fs::path& path, const nlohmann::json& j) {
  write_file(path, [&](std::ostream& o) { o << j.dump(2) << '\n'; });
}

inline nlohmann::json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw DataError("malformed JSON in " + path.string() + ": " + e.what());
  }
}

inline MIMLDataset load_source(const DataSource& src) {
  if (src.synthetic()) return generate_synthetic(src.synth_cfg).dataset;
  return load_dataset(fs::path(src.path));
}

inline std::string base_name(const std::string& name) {
  const auto slash = name.find('/');
  return slash == std::string::npos ? name : name.substr(0, slash);
}

inline nlohmann::json manifest(const ResolvedConfig& rc, const ExperimentConfig& c) {
  return {{"tool", "glemiml"},
          {"version", kVersion},
          {"command", rc.section},
          {"config", rc.saved_ini()},
          {"config_hash", rc.hash()},
          {"seed", c.train.seed},
          {"split_seed", c.split.seed},
          {"data", c.data.synthetic() ? "synth:" + c.data.synth : c.data.path},
          {"replay", "glemiml --config config.ini " + rc.section}};
}

inline nlohmann::json run_report(const std::string& method, const std::string& dataset,
                                 const std::string& split, const metrics::MetricsReport& m,
                                 const std::string& hash) {
  return {{"method", method},
          {"dataset", dataset},
          {"split", split},
          {"metrics", report::to_json(m)},
          {"config_hash", hash}};
}

inline void print_metrics(std::ostream& out, const metrics::MetricsReport& m) {
  for (const auto& c : report::metric_columns()) {
    out << "  " << report::pad(c.label, 8) << report::fixed4(report::metric_value(m, c.key)) << '\n';
  }
}

inline void write_checkpoint(const fs::path& dir, const EnhancerModel& enh, const ClassifierModel& clf) {
  fs::create_directories(dir);
  write_json(dir / "enhancer.json", to_json(enh));
  write_json(dir / "classifier.json", to_json(clf));
}

inline void export_distributions(const fs::path& dir, const EnhancerModel& enh,
                                 const DatasetSplit& split) {
  struct Part {
    const char* name;
    const MIMLDataset* ds;
    const std::vector<std::size_t>* ids;
  };
  const Part parts[] = {{"train", &split.train, &split.train_indices},
                        {"test", &split.test, &split.test_indices},
                        {"val", &split.val, &split.val_indices}};
  for (const auto& p : parts) {
    if (p.ds->bags.empty()) continue;
    const Matrix d = enhance_batch(enh, p.ds->bags).distributions;
    write_file(dir / (std::string("distributions_") + p.name + ".csv"),
               [&](std::ostream& o) { report::write_matrix_csv(o, d, "bag", "label", p.ids); });
  }
}

inline void dump_instance_graph(const fs::path& dir, const EnhancerModel& enh, const MIMLDataset& ds,
                                long bag_index) {
  if (bag_index < 0 || static_cast<std::size_t>(bag_index) >= ds.size()) {
    throw ConfigError("--dump-graph index " + std::to_string(bag_index) + " out of range");
  }
  const Matrix emb = embed_instances(enh, ds.bags[static_cast<std::size_t>(bag_index)]);
  const auto g = graph::mutual_knn_median(emb, enh.instance_k);
  const auto lap = graph::laplacian(g.graph);
  const std::string stem = "graph_bag" + std::to_string(bag_index);
  write_file(dir / (stem + "_adjacency.csv"),
             [&](std::ostream& o) { report::write_matrix_csv(o, g.graph.adjacency, "instance", "i"); });
  write_file(dir / (stem + "_laplacian.csv"),
             [&](std::ostream& o) { report::write_matrix_csv(o, lap.matrix, "instance", "i"); });
}

// ---------------------------------------------------------------------------
// Commands

inline int cmd_train(ExperimentConfig c, std::ostream& out) {
  c.resolve();
  const ResolvedConfig rc = resolved_train(c);
  const MIMLDataset ds = load_source(c.data);
  const DatasetSplit split = split_dataset(ds, c.split);
  if (c.exports.dump_graph >= static_cast<long>(ds.size())) {
    throw ConfigError("--dump-graph index " + std::to_string(c.exports.dump_graph) + " out of range");
  }
  const fs::path dir = prepare_output_dir(c.out_dir, "train-" + rc.hash().substr(0, 8));
  OutputLock lock(dir);
  write_file(dir / "config.ini", [&](std::ostream& o) { o << rc.saved_ini(); });
  write_json(dir / "manifest.json", manifest(rc, c));

  Trainer trainer(split.train, c.train);
  for (std::size_t e = 1; e <= c.train.epochs; ++e) {
    trainer.run_epoch(&split.val);
    if (c.exports.checkpoint_every > 0 && e % c.exports.checkpoint_every == 0) {
      std::ostringstream name;
      name << "epoch-" << std::setw(4) << std::setfill('0') << e;
      write_checkpoint(dir / "checkpoints" / name.str(), trainer.enhancer(), trainer.classifier());
    }
  }
  write_checkpoint(dir, trainer.enhancer(), trainer.classifier());
  write_file(dir / "losses.csv", [&](std::ostream& o) { report::write_loss_csv(o, trainer.history()); });
  write_file(dir / "validation.csv",
             [&](std::ostream& o) { report::write_validation_csv(o, trainer.history()); });

  const auto m = evaluate(trainer.enhancer(), trainer.classifier(), split.test);
  write_json(dir / "report.json", run_report(c.method, ds.name, "test", m, rc.hash()));
  if (c.exports.distributions) export_distributions(dir, trainer.enhancer(), split);
  if (c.exports.dump_graph >= 0) dump_instance_graph(dir, trainer.enhancer(), ds, c.exports.dump_graph);

  out << "trained " << c.method << " on " << ds.name << " (" << split.train.size() << " train bags, "
      << c.train.epochs << " epochs); test metrics:\n";
  print_metrics(out, m);
  out << "outputs in " << dir.string() << '\n';
  return kOk;
}

inline int cmd_ablate(ExperimentConfig c, const std::vector<std::string>& only, std::ostream& out) {
  c.resolve();
  std::vector<Variant> variants;
  for (const auto& v : only) variants.push_back(variant_from_string(v));
  if (variants.empty()) variants = {Variant::full, Variant::A, Variant::B, Variant::C};
  const ResolvedConfig rc = resolved_ablate(c, only);

  const MIMLDataset ds = load_source(c.data);
  const DatasetSplit split = split_dataset(ds, c.split);
  const fs::path dir = prepare_output_dir(c.out_dir, "ablate-" + rc.hash().substr(0, 8));
  OutputLock lock(dir);
  write_file(dir / "config.ini", [&](std::ostream& o) { o << rc.saved_ini(); });
  write_json(dir / "manifest.json", manifest(rc, c));

  const auto rows = run_ablation(split.train, split.test, c.train, variants);
  write_file(dir / "ablation.txt",
             [&](std::ostream& o) { report::write_ablation_text(o, rows, ds.name, rc.hash()); });
  write_json(dir / "ablation.json", report::ablation_to_json(rows, ds.name, rc.hash()));
  report::write_ablation_text(out, rows, ds.name, rc.hash());
  out << "outputs in " << dir.string() << '\n';
  return kOk;
}

inline int cmd_evaluate(ExperimentConfig c, const EvaluateArgs& a, std::ostream& out) {
  c.data.validate();
  c.split.validate();
  if (a.split != "train" && a.split != "test" && a.split != "val" && a.split != "all") {
    throw ConfigError("--split must be train, test, val or all");
  }
  const ResolvedConfig rc = resolved_evaluate(c, a);

  const EnhancerModel enh = enhancer_from_json(read_json(a.enhancer));
  const ClassifierModel clf = classifier_from_json(read_json(a.classifier));
  const MIMLDataset ds = load_source(c.data);
  if (enh.feature_dim() != ds.feature_dim || clf.feature_dim() != ds.feature_dim ||
      enh.label_count() != ds.label_count || clf.label_count() != ds.label_count) {
    throw DataError("checkpoint dimensions do not match dataset " + ds.name);
  }
  MIMLDataset target = ds;
  if (a.split != "all") {
    DatasetSplit split = split_dataset(ds, c.split);
    target = a.split == "train" ? std::move(split.train)
             : a.split == "test" ? std::move(split.test)
                                 : std::move(split.val);
  }
  const auto m = evaluate(enh, clf, target);
  const fs::path dir = prepare_output_dir(c.out_dir, "evaluate-" + rc.hash().substr(0, 8));
  OutputLock lock(dir);
  write_json(dir / "report.json", run_report(c.method, ds.name, a.split, m, rc.hash()));
  out << c.method << " on " << ds.name << " (" << a.split << ", " << target.size() << " bags):\n";
  print_metrics(out, m);
  out << "outputs in " << dir.string() << '\n';
  return kOk;
}

inline int cmd_synth(const SynthArgs& a, std::ostream& out) {
  a.cfg.validate();
  const SyntheticData s = generate_synthetic(a.cfg);
  const fs::path path = a.out.empty() ? output_root() / (s.dataset.name + ".jsonl") : fs::path(a.out);
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  write_dataset(path, s.dataset);
  if (!a.truth.empty()) {
    write_file(a.truth, [&](std::ostream& o) { report::write_matrix_csv(o, s.truth_matrix(), "bag", "label"); });
  }
  out << "wrote " << s.dataset.size() << " bags to " << path.string() << '\n';
  return kOk;
}

inline int cmd_report(const ReportArgs& a, std::ostream& out) {
  if (a.inputs.empty()) throw ConfigError("report needs at least one report JSON file");
  std::vector<report::RunSummary> runs;
  for (const auto& path : a.inputs) {
    const auto j = read_json(path);
    try {
      runs.push_back({j.at("method").get<std::string>(), base_name(j.at("dataset").get<std::string>()),
                      report::metrics_from_json(j.at("metrics"))});
    } catch (const nlohmann::json::exception& e) {
      throw DataError("not a run report: " + path + ": " + e.what());
    }
  }
  const auto table = report::build_comparison(runs);
  report::write_comparison_text(out, table);
  if (!a.out.empty()) {
    write_file(a.out, [&](std::ostream& o) { report::write_comparison_text(o, table); });
  }
  if (!a.json.empty()) write_json(a.json, report::comparison_to_json(table));
  return kOk;
}

// ---------------------------------------------------------------------------
// Option registration

inline void add_synth_options(CLI::App* sub, SynthConfig& s) {
  sub->add_option("--synth-bags", s.num_bags, "Synthetic bag count")->capture_default_str();
  sub->add_option("--synth-dim", s.feature_dim, "Synthetic feature dimension")->capture_default_str();
  sub->add_option("--synth-labels", s.label_count, "Synthetic label count")->capture_default_str();
  sub->add_option("--synth-min-instances", s.instances_min, "Fewest instances per bag")
      ->capture_default_str();
  sub->add_option("--synth-max-instances", s.instances_max, "Most instances per bag")
      ->capture_default_str();
  sub->add_option("--synth-seed", s.seed, "Generator seed")->capture_default_str();
}

inline void add_data_options(CLI::App* sub, ExperimentConfig& c) {
  sub->add_option("--data", c.data.path, "Dataset file (JSON lines)");
  sub->add_option("--synth", c.data.synth, "Use the synthetic generator ('default')");
  add_synth_options(sub, c.data.synth_cfg);
  sub->add_option("--train-frac", c.split.train_frac)->capture_default_str();
  sub->add_option("--test-frac", c.split.test_frac)->capture_default_str();
  sub->add_option("--val-frac", c.split.val_frac)->capture_default_str();
  sub->add_option("--split-seed", c.split.seed)->capture_default_str();
}

inline void add_train_options(CLI::App* sub, ExperimentConfig& c, bool with_variant) {
  TrainConfig& t = c.train;
  sub->add_option("--epochs", t.epochs)->capture_default_str();
  sub->add_option("--batch-size", t.batch_size)->capture_default_str();
  sub->add_option("--lr", t.learning_rate, "Step size")->capture_default_str();
  sub->add_option("--optimizer", c.optimizer, "adam or sgd")->capture_default_str();
  sub->add_option("--beta1", t.weights.beta1, "Weight of the interaction loss")->capture_default_str();
  sub->add_option("--beta2", t.weights.beta2, "Weight of the similarity loss")->capture_default_str();
  sub->add_option("--beta3", t.weights.beta3, "Weight of the threshold loss")->capture_default_str();
  sub->add_option("--rho", t.weights.rho, "Classifier trade-off")->capture_default_str();
  sub->add_option("--gamma-pos", t.weights.gamma_pos)->capture_default_str();
  sub->add_option("--gamma-neg", t.weights.gamma_neg)->capture_default_str();
  sub->add_option("--instance-k", t.instance_k, "Neighbors in the instance graph")
      ->capture_default_str();
  sub->add_option("--label-k", t.label_k, "Neighbors in the label graph")->capture_default_str();
  sub->add_option("--embed-dim", t.embed_dim)->capture_default_str();
  sub->add_option("--depth", t.classifier_depth, "Classifier depth (1-3)")->capture_default_str();
  sub->add_option("--similarity", c.similarity, "mse or literal")->capture_default_str();
  sub->add_option("--seed", t.seed, "Training seed")->capture_default_str();
  if (with_variant) {
    sub->add_option("--variant", c.variant, "full, A, B or C")->capture_default_str();
  }
}

// ---------------------------------------------------------------------------

inline int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Graph-based label enhancement for multi-instance multi-label learning", "glemiml"};
  app.set_config("--config", "", "INI file; [train], [ablate], ... sections hold subcommand options");
  app.set_version_flag("--version", kVersion);
  app.require_subcommand(1);

  ExperimentConfig train_cfg, ablate_cfg, eval_cfg;
  bool print_config = false;

  auto* train = app.add_subcommand("train", "Split, train, evaluate on the test split");
  add_data_options(train, train_cfg);
  add_train_options(train, train_cfg, true);
  train->add_option("--out", train_cfg.out_dir, "Output directory");
  train->add_option("--checkpoint-every", train_cfg.exports.checkpoint_every,
                    "Also checkpoint every N epochs");
  train->add_flag("--export-distributions", train_cfg.exports.distributions,
                  "Write recovered distributions per split as CSV");
  train->add_option("--dump-graph", train_cfg.exports.dump_graph,
                    "Write instance adjacency and Laplacian of this bag as CSV");
  train->add_option("--method", train_cfg.method, "Method name recorded in the report")
      ->capture_default_str();
  train->add_flag("--print-config", print_config, "Print the resolved configuration and exit");

  std::vector<std::string> only;
  auto* ablate = app.add_subcommand("ablate", "Train the full model and variants A, B, C");
  add_data_options(ablate, ablate_cfg);
  add_train_options(ablate, ablate_cfg, false);
  ablate->add_option("--out", ablate_cfg.out_dir, "Output directory");
  ablate->add_option("--only", only, "Restrict to these variants (full, A, B, C)");
  ablate->add_flag("--print-config", print_config, "Print the resolved configuration and exit");

  EvaluateArgs eval_args;
  auto* evaluate_cmd = app.add_subcommand("evaluate", "Score saved checkpoints on a dataset split");
  add_data_options(evaluate_cmd, eval_cfg);
  evaluate_cmd->add_option("--enhancer", eval_args.enhancer, "Enhancer checkpoint")->required();
  evaluate_cmd->add_option("--classifier", eval_args.classifier, "Classifier checkpoint")->required();
  evaluate_cmd->add_option("--split", eval_args.split, "train, test, val or all")->capture_default_str();
  evaluate_cmd->add_option("--out", eval_cfg.out_dir, "Output directory");
  evaluate_cmd->add_option("--method", eval_cfg.method)->capture_default_str();
  evaluate_cmd->add_flag("--print-config", print_config, "Print the resolved configuration and exit");

  SynthArgs synth_args;
  auto* synth = app.add_subcommand("synth", "Write a synthetic dataset with ground truth");
  add_synth_options(synth, synth_args.cfg);
  synth->add_option("--out", synth_args.out, "Dataset file (JSON lines)");
  synth->add_option("--truth", synth_args.truth, "Ground-truth distributions (CSV)");
  synth->add_flag("--print-config", print_config, "Print the resolved configuration and exit");

  ReportArgs report_args;
  auto* report_cmd = app.add_subcommand("report", "Rank methods across datasets from report JSON files");
  report_cmd->add_option("inputs", report_args.inputs, "report.json files");
  report_cmd->add_option("--out", report_args.out, "Also write the table here");
  report_cmd->add_option("--json", report_args.json, "Write ranks as JSON");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kConfigFailure;
  }

  try {
    if (print_config) {
      const ResolvedConfig rc = train->parsed()          ? resolved_train(train_cfg)
                                : ablate->parsed()       ? resolved_ablate(ablate_cfg, only)
                                : evaluate_cmd->parsed() ? resolved_evaluate(eval_cfg, eval_args)
                                                         : resolved_synth(synth_args);
      out << rc.full_ini();
      return kOk;
    }
    if (train->parsed()) return cmd_train(train_cfg, out);
    if (ablate->parsed()) return cmd_ablate(ablate_cfg, only, out);
    if (evaluate_cmd->parsed()) return cmd_evaluate(eval_cfg, eval_args, out);
    if (synth->parsed()) return cmd_synth(synth_args, out);
    return cmd_report(report_args, out);
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return kConfigFailure;
  } catch (const NumericError& e) {
    err << "numeric error: " << e.what() << '\n';
    return kNumericFailure;
  } catch (const DataError& e) {
    err << "data error: " << e.what() << '\n';
    return kDataFailure;
  } catch (const ShapeError& e) {
    err << "data error: " << e.what() << '\n';
    return kDataFailure;
  } catch (const DegenerateInputError& e) {
    err << "data error: " << e.what() << '\n';
    return kDataFailure;
  } catch (const fs::filesystem_error& e) {
    err << "config error: " << e.what() << '\n';
    return kConfigFailure;
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return kConfigFailure;
  }
}

inline int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  std::vector<const char*> argv;
  argv.reserve(args.size() + 1);
  argv.push_back("glemiml");
  for (const auto& a : args) argv.push_back(a.c_str());
  return run(static_cast<int>(argv.size()), argv.data(), out, err);
}

}  // namespace glemiml::cli
