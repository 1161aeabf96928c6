#pragma once

// MIML data model: bags of instances with logical labels, JSON-lines
// persistence, seeded splitting and a synthetic generator with known
// label distributions.

#include "glemiml/common.hpp"

#include <json.hpp>

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>
#include <string>
#include <vector>

namespace glemiml {

struct Bag {
  Matrix instances;  // n_i x d
  Vector labels;     // length t, entries in {0, 1}

  Eigen::Index size() const { return instances.rows(); }
  Eigen::Index feature_dim() const { return instances.cols(); }
  Eigen::Index label_count() const { return labels.size(); }

  Vector mean_instance() const { return instances.colwise().mean().transpose(); }
  bool has_positive() const { return (labels.array() > 0.5).any(); }
  bool has_negative() const { return (labels.array() < 0.5).any(); }

  friend bool operator==(const Bag& a, const Bag& b) {
    return a.instances.rows() == b.instances.rows() && a.instances.cols() == b.instances.cols() &&
           a.instances == b.instances && a.labels.size() == b.labels.size() && a.labels == b.labels;
  }
};

struct MIMLDataset {
  std::string name;
  Eigen::Index feature_dim = 0;
  Eigen::Index label_count = 0;
  std::vector<Bag> bags;

  std::size_t size() const { return bags.size(); }

  // B x t matrix of logical labels.
  Matrix label_matrix() const {
    Matrix out(static_cast<Eigen::Index>(bags.size()), label_count);
    for (std::size_t i = 0; i < bags.size(); ++i) {
      out.row(static_cast<Eigen::Index>(i)) = bags[i].labels.transpose();
    }
    return out;
  }

  friend bool operator==(const MIMLDataset&, const MIMLDataset&) = default;
};

// Non-owning view of a batch of bags.
using BagRefs = std::vector<const Bag*>;

inline BagRefs refs_of(const std::vector<Bag>& bags) {
  BagRefs out;
  out.reserve(bags.size());
  for (const auto& b : bags) {
    out.push_back(&b);
  }
  return out;
}

inline void validate_bag(const Bag& bag, Eigen::Index d, Eigen::Index t, std::size_t index) {
  if (bag.instances.rows() < 1) {
    throw DimensionError(index, "bag has no instances");
  }
  if (bag.instances.cols() != d) {
    throw DimensionError(index, "instance has " + std::to_string(bag.instances.cols()) +
                                    " entries, expected " + std::to_string(d));
  }
  if (bag.labels.size() != t) {
    throw DimensionError(index, "label vector has " + std::to_string(bag.labels.size()) +
                                    " entries, expected " + std::to_string(t));
  }
  for (Eigen::Index j = 0; j < t; ++j) {
    if (bag.labels[j] != 0.0 && bag.labels[j] != 1.0) {
      throw DimensionError(index, "logical labels must be 0 or 1");
    }
  }
}

inline void validate_dataset(const MIMLDataset& ds) {
  if (ds.feature_dim < 1 || ds.label_count < 1) {
    throw DataError("feature_dim and label_count must be positive");
  }
  if (ds.bags.empty()) {
    throw DataError("dataset has no bags");
  }
  for (std::size_t i = 0; i < ds.bags.size(); ++i) {
    validate_bag(ds.bags[i], ds.feature_dim, ds.label_count, i);
  }
}

// ---------------------------------------------------------------------------
// JSON-lines format: header line, then one bag per line.

inline nlohmann::json bag_to_json(const Bag& bag) {
  nlohmann::json rows = nlohmann::json::array();
  for (Eigen::Index k = 0; k < bag.instances.rows(); ++k) {
    nlohmann::json row = nlohmann::json::array();
    for (Eigen::Index c = 0; c < bag.instances.cols(); ++c) {
      row.push_back(bag.instances(k, c));
    }
    rows.push_back(std::move(row));
  }
  nlohmann::json labels = nlohmann::json::array();
  for (Eigen::Index j = 0; j < bag.labels.size(); ++j) {
    labels.push_back(static_cast<int>(bag.labels[j]));
  }
  return {{"instances", std::move(rows)}, {"labels", std::move(labels)}};
}

inline void write_dataset(std::ostream& out, const MIMLDataset& ds) {
  nlohmann::json header = {
      {"name", ds.name}, {"feature_dim", ds.feature_dim}, {"label_count", ds.label_count}};
  out << header.dump() << '\n';
  for (const auto& bag : ds.bags) {
    out << bag_to_json(bag).dump() << '\n';
  }
}

inline void write_dataset(const std::filesystem::path& path, const MIMLDataset& ds) {
  std::ofstream out(path);
  if (!out) {
    throw DataError("cannot open " + path.string() + " for writing");
  }
  write_dataset(out, ds);
}

namespace detail {

inline Eigen::Index positive_int(const nlohmann::json& obj, const char* key, std::size_t line) {
  if (!obj.contains(key) || !obj[key].is_number_integer() || obj[key].get<long long>() < 1) {
    throw ParseError(line, std::string("header field '") + key + "' must be a positive integer");
  }
  return static_cast<Eigen::Index>(obj[key].get<long long>());
}

inline Bag parse_bag(const nlohmann::json& obj, Eigen::Index d, Eigen::Index t, std::size_t line,
                     std::size_t bag_index) {
  if (!obj.is_object() || !obj.contains("instances") || !obj.contains("labels") ||
      !obj["instances"].is_array() || !obj["labels"].is_array()) {
    throw ParseError(line, "bag record needs 'instances' and 'labels' arrays");
  }
  const auto& rows = obj["instances"];
  const auto& labels = obj["labels"];
  if (rows.empty()) {
    throw DimensionError(bag_index, "bag has no instances");
  }
  Bag bag;
  bag.instances.resize(static_cast<Eigen::Index>(rows.size()), d);
  for (std::size_t k = 0; k < rows.size(); ++k) {
    if (!rows[k].is_array()) {
      throw ParseError(line, "instance " + std::to_string(k) + " is not an array");
    }
    if (static_cast<Eigen::Index>(rows[k].size()) != d) {
      throw DimensionError(bag_index, "instance " + std::to_string(k) + " has " +
                                          std::to_string(rows[k].size()) + " entries, expected " +
                                          std::to_string(d));
    }
    for (std::size_t c = 0; c < rows[k].size(); ++c) {
      if (!rows[k][c].is_number()) {
        throw ParseError(line, "non-numeric feature value");
      }
      bag.instances(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(c)) =
          rows[k][c].get<double>();
    }
  }
  if (static_cast<Eigen::Index>(labels.size()) != t) {
    throw DimensionError(bag_index, "label vector has " + std::to_string(labels.size()) +
                                        " entries, expected " + std::to_string(t));
  }
  bag.labels.resize(t);
  for (std::size_t j = 0; j < labels.size(); ++j) {
    if (!labels[j].is_number_integer()) {
      throw ParseError(line, "labels must be integers 0 or 1");
    }
    bag.labels[static_cast<Eigen::Index>(j)] = static_cast<double>(labels[j].get<long long>());
  }
  validate_bag(bag, d, t, bag_index);
  return bag;
}

}  // namespace detail

inline MIMLDataset load_dataset(std::istream& in) {
  MIMLDataset ds;
  std::string text;
  std::size_t line_no = 0;
  bool have_header = false;
  while (std::getline(in, text)) {
    ++line_no;
    if (text.find_first_not_of(" \t\r") == std::string::npos) {
      continue;
    }
    nlohmann::json obj;
    try {
      obj = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
      throw ParseError(line_no, std::string("malformed JSON: ") + e.what());
    }
    if (!have_header) {
      if (!obj.is_object()) {
        throw ParseError(line_no, "header must be a JSON object");
      }
      ds.feature_dim = detail::positive_int(obj, "feature_dim", line_no);
      ds.label_count = detail::positive_int(obj, "label_count", line_no);
      ds.name = obj.value("name", std::string{});
      have_header = true;
      continue;
    }
    ds.bags.push_back(
        detail::parse_bag(obj, ds.feature_dim, ds.label_count, line_no, ds.bags.size()));
  }
  if (!have_header) {
    throw ParseError(line_no, "missing header line");
  }
  if (ds.bags.empty()) {
    throw DataError("dataset has no bags");
  }
  return ds;
}

inline MIMLDataset load_dataset(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw DataError("cannot open dataset file " + path.string());
  }
  return load_dataset(in);
}

// ---------------------------------------------------------------------------
// Splitting

struct SplitSpec {
  double train_frac = 0.7;
  double test_frac = 0.2;
  double val_frac = 0.1;
  std::uint64_t seed = 0;

  void validate() const {
    if (!(train_frac > 0 && test_frac > 0 && val_frac > 0)) {
      throw ConfigError("split fractions must be positive");
    }
    if (std::abs(train_frac + test_frac + val_frac - 1.0) > 1e-12) {
      throw ConfigError("split fractions must sum to 1");
    }
  }
};

struct DatasetSplit {
  MIMLDataset train, test, val;
  std::vector<std::size_t> train_indices, test_indices, val_indices;
};

inline MIMLDataset subset(const MIMLDataset& ds, const std::vector<std::size_t>& indices,
                          const std::string& suffix) {
  MIMLDataset out;
  out.name = ds.name + suffix;
  out.feature_dim = ds.feature_dim;
  out.label_count = ds.label_count;
  out.bags.reserve(indices.size());
  for (auto i : indices) {
    out.bags.push_back(ds.bags.at(i));
  }
  return out;
}

// Sizes: test and val take floor(n * frac); the remainder goes to train.
inline DatasetSplit split_dataset(const MIMLDataset& ds, const SplitSpec& spec) {
  spec.validate();
  const std::size_t n = ds.size();
  if (n < 10) {
    throw ConfigError("split needs at least 10 bags, got " + std::to_string(n));
  }
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::mt19937_64 rng(spec.seed);
  std::shuffle(order.begin(), order.end(), rng);

  const auto n_test = static_cast<std::size_t>(std::floor(static_cast<double>(n) * spec.test_frac + 1e-9));
  const auto n_val = static_cast<std::size_t>(std::floor(static_cast<double>(n) * spec.val_frac + 1e-9));
  const std::size_t n_train = n - n_test - n_val;

  DatasetSplit out;
  out.train_indices.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_train));
  out.test_indices.assign(order.begin() + static_cast<std::ptrdiff_t>(n_train),
                          order.begin() + static_cast<std::ptrdiff_t>(n_train + n_test));
  out.val_indices.assign(order.begin() + static_cast<std::ptrdiff_t>(n_train + n_test), order.end());
  out.train = subset(ds, out.train_indices, "/train");
  out.test = subset(ds, out.test_indices, "/test");
  out.val = subset(ds, out.val_indices, "/val");
  return out;
}

// ---------------------------------------------------------------------------
// Synthetic data with ground-truth label distributions.

struct SynthConfig {
  std::size_t num_bags = 500;
  Eigen::Index feature_dim = 10;
  Eigen::Index label_count = 6;
  Eigen::Index instances_min = 2;
  Eigen::Index instances_max = 5;
  std::uint64_t seed = 7;
  double logit_scale = 1.5;       // sd of the Gaussian draws behind each distribution
  double prototype_scale = 3.0;   // norm of each latent label prototype
  double instance_jitter = 0.3;   // log-normal jitter of per-instance mixture weights
  double noise = 0.05;            // additive feature noise sd

  void validate() const {
    if (num_bags < 1 || feature_dim < 1) {
      throw ConfigError("synthetic data needs num_bags >= 1 and feature_dim >= 1");
    }
    if (label_count < 2) {
      throw ConfigError("synthetic data needs label_count >= 2");
    }
    if (instances_min < 1 || instances_max < instances_min) {
      throw ConfigError("synthetic data needs 1 <= instances_min <= instances_max");
    }
  }
};

struct SyntheticData {
  MIMLDataset dataset;
  std::vector<Vector> truth;  // one simplex vector per bag

  Matrix truth_matrix() const {
    Matrix m(static_cast<Eigen::Index>(truth.size()), dataset.label_count);
    for (std::size_t i = 0; i < truth.size(); ++i) m.row(static_cast<Eigen::Index>(i)) = truth[i].transpose();
    return m;
  }
};

inline SyntheticData generate_synthetic(const SynthConfig& cfg) {
  cfg.validate();
  const Eigen::Index d = cfg.feature_dim;
  const Eigen::Index t = cfg.label_count;
  std::mt19937_64 rng(cfg.seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_int_distribution<Eigen::Index> count(cfg.instances_min, cfg.instances_max);

  // Latent prototypes, one row per label; orthonormal when d >= t.
  Matrix raw(d, t);
  for (Eigen::Index c = 0; c < t; ++c) {
    for (Eigen::Index r = 0; r < d; ++r) {
      raw(r, c) = gauss(rng);
    }
  }
  Matrix prototypes(t, d);
  if (d >= t) {
    Eigen::HouseholderQR<Matrix> qr(raw);
    prototypes = (qr.householderQ() * Matrix::Identity(d, t)).transpose();
  } else {
    prototypes = raw.transpose();
    for (Eigen::Index j = 0; j < t; ++j) {
      prototypes.row(j).normalize();
    }
  }
  prototypes *= cfg.prototype_scale;

  const double threshold = 1.0 / (2.0 * static_cast<double>(t));
  SyntheticData out;
  out.dataset.name = "synthetic-seed" + std::to_string(cfg.seed);
  out.dataset.feature_dim = d;
  out.dataset.label_count = t;
  out.dataset.bags.reserve(cfg.num_bags);
  out.truth.reserve(cfg.num_bags);

  for (std::size_t i = 0; i < cfg.num_bags; ++i) {
    Vector dist(t);
    Vector labels(t);
    for (;;) {
      Vector z(t);
      for (Eigen::Index j = 0; j < t; ++j) {
        z[j] = cfg.logit_scale * gauss(rng);
      }
      dist = (z.array() - z.maxCoeff()).exp().matrix();
      dist /= dist.sum();
      for (Eigen::Index j = 0; j < t; ++j) {
        labels[j] = dist[j] > threshold ? 1.0 : 0.0;
      }
      const double positives = labels.sum();
      if (positives >= 1.0 && positives <= static_cast<double>(t) - 1.0) {
        break;
      }
    }
    const Eigen::Index n = count(rng);
    Bag bag;
    bag.labels = labels;
    bag.instances.resize(n, d);
    for (Eigen::Index k = 0; k < n; ++k) {
      Vector w(t);
      for (Eigen::Index j = 0; j < t; ++j) {
        w[j] = dist[j] * std::exp(cfg.instance_jitter * gauss(rng));
      }
      w /= w.sum();
      RowVector x = w.transpose() * prototypes;
      for (Eigen::Index c = 0; c < d; ++c) {
        x[c] += cfg.noise * gauss(rng);
      }
      bag.instances.row(k) = x;
    }
    out.dataset.bags.push_back(std::move(bag));
    out.truth.push_back(std::move(dist));
  }
  return out;
}

}  // namespace glemiml
