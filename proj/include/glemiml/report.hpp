#pragma once

// Serialization of metric reports, training history and comparison tables.

#include "glemiml/metrics.hpp"
#include "glemiml/train.hpp"

#include <json.hpp>

#include <cstdint>
#include <iomanip>
#include <map>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

namespace glemiml::report {

struct MetricInfo {
  const char* key;
  const char* label;
  metrics::Direction direction;
};

inline const std::vector<MetricInfo>& metric_columns() {
  static const std::vector<MetricInfo> cols = {
      {"hamming_loss", "HL↓", metrics::Direction::lower_better},
      {"ranking_loss", "RL↓", metrics::Direction::lower_better},
      {"macro_avg_precision", "mAP↑", metrics::Direction::higher_better},
      {"macro_f1", "Ma-F1↑", metrics::Direction::higher_better},
  };
  return cols;
}

inline double metric_value(const metrics::MetricsReport& r, const std::string& key) {
  if (key == "hamming_loss") return r.hamming_loss;
  if (key == "ranking_loss") return r.ranking_loss;
  if (key == "macro_avg_precision") return r.macro_avg_precision;
  if (key == "macro_f1") return r.macro_f1;
  throw ConfigError("unknown metric '" + key + "'");
}

inline nlohmann::json to_json(const metrics::MetricsReport& r) {
  nlohmann::json ap = nlohmann::json::array();
  for (const auto& v : r.per_label_ap) {
    ap.push_back(v ? nlohmann::json(*v) : nlohmann::json(nullptr));
  }
  return {{"hamming_loss", r.hamming_loss},
          {"ranking_loss", r.ranking_loss},
          {"macro_avg_precision", r.macro_avg_precision},
          {"macro_f1", r.macro_f1},
          {"map_reading", r.map_reading},
          {"per_label_f1", r.per_label_f1},
          {"per_label_ap", ap}};
}

inline metrics::MetricsReport metrics_from_json(const nlohmann::json& j) {
  metrics::MetricsReport r;
  r.hamming_loss = j.at("hamming_loss").get<double>();
  r.ranking_loss = j.at("ranking_loss").get<double>();
  r.macro_avg_precision = j.at("macro_avg_precision").get<double>();
  r.macro_f1 = j.at("macro_f1").get<double>();
  r.map_reading = j.value("map_reading", std::string("label-wise"));
  return r;
}

// 64-bit FNV-1a; a stable fingerprint for run provenance.
inline std::uint64_t fnv1a(const std::string& text) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline std::string hex64(std::uint64_t v) {
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << v;
  return os.str();
}

inline std::string fixed4(double v) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(4) << v;
  return os.str();
}

// Column widths computed on the number of code points, so the arrows line up.
inline std::size_t display_width(const std::string& s) {
  std::size_t n = 0;
  for (unsigned char c : s) {
    if ((c & 0xC0) != 0x80) ++n;
  }
  return n;
}

inline std::string pad(const std::string& s, std::size_t width) {
  const std::size_t w = display_width(s);
  return s + std::string(width > w ? width - w : 0, ' ');
}

inline void write_aligned(std::ostream& out, const std::vector<std::vector<std::string>>& rows) {
  std::vector<std::size_t> widths;
  for (const auto& r : rows) {
    if (widths.size() < r.size()) widths.resize(r.size(), 0);
    for (std::size_t c = 0; c < r.size(); ++c) {
      widths[c] = std::max(widths[c], display_width(r[c]));
    }
  }
  for (const auto& r : rows) {
    std::string line;
    for (std::size_t c = 0; c < r.size(); ++c) {
      line += c + 1 == r.size() ? r[c] : pad(r[c], widths[c] + 2);
    }
    while (!line.empty() && line.back() == ' ') line.pop_back();
    out << line << '\n';
  }
}

// ---------------------------------------------------------------------------
// Training history

inline void write_loss_csv(std::ostream& out, const TrainHistory& h) {
  out << "epoch,L_CL,L_Sim,L_thr,L_CLE,L_LC,L_DC,L_C\n";
  out << std::setprecision(12);
  for (const auto& e : h.epochs) {
    out << e.epoch << ',' << e.l_cl << ',' << e.l_sim << ',' << e.l_thr << ',' << e.l_cle << ','
        << e.l_lc << ',' << e.l_dc << ',' << e.l_c << '\n';
  }
}

inline void write_validation_csv(std::ostream& out, const TrainHistory& h) {
  out << "epoch,hamming_loss,ranking_loss,macro_avg_precision,macro_f1\n";
  out << std::setprecision(12);
  for (const auto& e : h.epochs) {
    if (!e.validation) continue;
    out << e.epoch << ',' << e.validation->hamming_loss << ',' << e.validation->ranking_loss << ','
        << e.validation->macro_avg_precision << ',' << e.validation->macro_f1 << '\n';
  }
}

// Rows are labelled by `row_ids` when given, else by position.
inline void write_matrix_csv(std::ostream& out, const Matrix& m, const std::string& row_name,
                             const std::string& col_prefix,
                             const std::vector<std::size_t>* row_ids = nullptr) {
  require_shape(row_ids == nullptr || row_ids->size() == static_cast<std::size_t>(m.rows()),
                "one row id per matrix row required");
  out << row_name;
  for (Eigen::Index j = 0; j < m.cols(); ++j) out << ',' << col_prefix << j;
  out << '\n' << std::setprecision(12);
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    out << (row_ids ? (*row_ids)[static_cast<std::size_t>(i)] : static_cast<std::size_t>(i));
    for (Eigen::Index j = 0; j < m.cols(); ++j) out << ',' << m(i, j);
    out << '\n';
  }
}

// ---------------------------------------------------------------------------
// Method comparison table: metric rows grouped by dataset, method columns,
// "value(rank)" cells, N/A for missing runs, Avg. Rank footer.

struct RunSummary {
  std::string method;
  std::string dataset;
  metrics::MetricsReport metrics;
};

struct ComparisonTable {
  std::vector<std::string> methods;
  std::vector<std::string> datasets;
  metrics::ScoreGrid grid;  // method x (dataset, metric)
  std::vector<std::vector<int>> ranks;
  std::vector<double> average_rank;
};

inline ComparisonTable build_comparison(const std::vector<RunSummary>& runs) {
  if (runs.empty()) {
    throw DegenerateInputError("no reports to compare");
  }
  ComparisonTable t;
  std::map<std::pair<std::string, std::string>, const RunSummary*> cell;
  for (const auto& r : runs) {
    if (std::find(t.methods.begin(), t.methods.end(), r.method) == t.methods.end()) {
      t.methods.push_back(r.method);
    }
    if (std::find(t.datasets.begin(), t.datasets.end(), r.dataset) == t.datasets.end()) {
      t.datasets.push_back(r.dataset);
    }
    cell[{r.method, r.dataset}] = &r;
  }
  const auto& cols = metric_columns();
  std::vector<metrics::Direction> dirs;
  for (std::size_t d = 0; d < t.datasets.size(); ++d) {
    for (const auto& c : cols) dirs.push_back(c.direction);
  }
  for (const auto& m : t.methods) {
    std::vector<std::optional<double>> row;
    for (const auto& d : t.datasets) {
      auto it = cell.find({m, d});
      for (const auto& c : cols) {
        if (it == cell.end()) {
          row.emplace_back(std::nullopt);
        } else {
          row.emplace_back(metric_value(it->second->metrics, c.key));
        }
      }
    }
    t.grid.push_back(std::move(row));
  }
  t.ranks = metrics::rank_columns(t.grid, dirs);
  t.average_rank = metrics::average_rank(t.grid, dirs);
  return t;
}

inline void write_comparison_text(std::ostream& out, const ComparisonTable& t) {
  std::vector<std::vector<std::string>> rows;
  std::vector<std::string> header = {"Dataset", "Metrics"};
  header.insert(header.end(), t.methods.begin(), t.methods.end());
  rows.push_back(header);
  const auto& cols = metric_columns();
  for (std::size_t d = 0; d < t.datasets.size(); ++d) {
    for (std::size_t c = 0; c < cols.size(); ++c) {
      const std::size_t col = d * cols.size() + c;
      std::vector<std::string> r = {c == 0 ? t.datasets[d] : "", cols[c].label};
      for (std::size_t m = 0; m < t.methods.size(); ++m) {
        const auto& v = t.grid[m][col];
        r.push_back((v ? fixed4(*v) : std::string("N/A")) + "(" + std::to_string(t.ranks[m][col]) + ")");
      }
      rows.push_back(std::move(r));
    }
  }
  std::vector<std::string> footer = {"Avg. Rank", ""};
  for (double a : t.average_rank) {
    std::ostringstream os;
    os << std::fixed << std::setprecision(2) << a;
    footer.push_back(os.str());
  }
  rows.push_back(std::move(footer));
  write_aligned(out, rows);
}

inline nlohmann::json comparison_to_json(const ComparisonTable& t) {
  nlohmann::json methods = nlohmann::json::array();
  for (std::size_t m = 0; m < t.methods.size(); ++m) {
    methods.push_back({{"method", t.methods[m]}, {"average_rank", t.average_rank[m]}, {"ranks", t.ranks[m]}});
  }
  return {{"datasets", t.datasets}, {"methods", methods}};
}

// ---------------------------------------------------------------------------
// Ablation table: one block of four metric rows per variant.

inline void write_ablation_text(std::ostream& out, const std::vector<AblationRow>& rows,
                                const std::string& dataset, const std::string& config_hash) {
  out << "# config_hash " << config_hash << '\n';
  std::vector<std::vector<std::string>> table;
  table.push_back({"Scenario", "Metrics", dataset});
  for (const auto& row : rows) {
    bool first = true;
    for (const auto& c : metric_columns()) {
      table.push_back({first ? variant_label(row.variant) : "", c.label,
                       fixed4(metric_value(row.report, c.key))});
      first = false;
    }
  }
  write_aligned(out, table);
}

inline nlohmann::json ablation_to_json(const std::vector<AblationRow>& rows,
                                       const std::string& dataset, const std::string& config_hash) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& r : rows) {
    arr.push_back({{"variant", variant_label(r.variant)},
                   {"classifier_depth", r.classifier_depth},
                   {"instance_graph", r.instance_graph},
                   {"instance_graphs_built", r.instance_graphs_built},
                   {"metrics", to_json(r.report)}});
  }
  return {{"dataset", dataset}, {"config_hash", config_hash}, {"variants", arr}};
}

}  // namespace glemiml::report
