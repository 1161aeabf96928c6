#pragma once

// Dense feed-forward networks with hand-derived reverse-mode gradients and a
// central-difference gradient checker.

#include "glemiml/common.hpp"

#include <json.hpp>

#include <cstdint>
#include <functional>
#include <random>
#include <string>
#include <utility>
#include <vector>

namespace glemiml::nn {

enum class Activation { identity, relu, tanh, sigmoid };

inline std::string to_string(Activation a) {
  switch (a) {
    case Activation::identity: return "identity";
    case Activation::relu: return "relu";
    case Activation::tanh: return "tanh";
    case Activation::sigmoid: return "sigmoid";
  }
  return "identity";
}

inline Activation activation_from_string(const std::string& s) {
  if (s == "identity") return Activation::identity;
  if (s == "relu") return Activation::relu;
  if (s == "tanh") return Activation::tanh;
  if (s == "sigmoid") return Activation::sigmoid;
  throw ConfigError("unknown activation '" + s + "'");
}

struct DenseLayer {
  Matrix weights;  // out x in
  Vector bias;     // out
  Activation activation = Activation::identity;

  Eigen::Index in_dim() const { return weights.cols(); }
  Eigen::Index out_dim() const { return weights.rows(); }

  friend bool operator==(const DenseLayer& a, const DenseLayer& b) {
    return a.activation == b.activation && a.weights.rows() == b.weights.rows() &&
           a.weights.cols() == b.weights.cols() && a.weights == b.weights && a.bias == b.bias;
  }
};

struct FeedForwardNet {
  std::vector<DenseLayer> layers;

  Eigen::Index input_dim() const { return layers.front().in_dim(); }
  Eigen::Index output_dim() const { return layers.back().out_dim(); }

  Eigen::Index parameter_count() const {
    Eigen::Index n = 0;
    for (const auto& l : layers) {
      n += l.weights.size() + l.bias.size();
    }
    return n;
  }

  friend bool operator==(const FeedForwardNet&, const FeedForwardNet&) = default;
};

inline void validate(const FeedForwardNet& net) {
  if (net.layers.empty()) {
    throw ConfigError("network needs at least one layer");
  }
  for (std::size_t i = 0; i < net.layers.size(); ++i) {
    const auto& l = net.layers[i];
    require_shape(l.bias.size() == l.out_dim(), "bias length must equal layer output size");
    if (i > 0) {
      require_shape(l.in_dim() == net.layers[i - 1].out_dim(), "layer shapes do not chain");
    }
  }
}

namespace detail {

inline void activate(Matrix& z, Activation a) {
  switch (a) {
    case Activation::identity: break;
    case Activation::relu: z = z.cwiseMax(0.0); break;
    case Activation::tanh: z = z.unaryExpr([](double v) { return std::tanh(v); }); break;
    case Activation::sigmoid: z = sigmoid(z); break;
  }
}

// dy/dz expressed through the post-activation value y.
inline Matrix activation_slope(const Matrix& y, Activation a) {
  switch (a) {
    case Activation::identity: return Matrix::Ones(y.rows(), y.cols());
    case Activation::relu: return (y.array() > 0.0).cast<double>().matrix();
    case Activation::tanh: return (1.0 - y.array().square()).matrix();
    case Activation::sigmoid: return (y.array() * (1.0 - y.array())).matrix();
  }
  return Matrix::Ones(y.rows(), y.cols());
}

}  // namespace detail

// Per-layer inputs and outputs of a batched forward pass (one sample per row).
struct Trace {
  std::vector<Matrix> inputs;
  std::vector<Matrix> outputs;

  const Matrix& output() const { return outputs.back(); }
};

inline Trace forward_trace(const FeedForwardNet& net, const Matrix& input) {
  require_shape(input.cols() == net.input_dim(),
                "input width " + std::to_string(input.cols()) + " != network input " +
                    std::to_string(net.input_dim()));
  Trace tr;
  tr.inputs.reserve(net.layers.size());
  tr.outputs.reserve(net.layers.size());
  Matrix x = input;
  for (const auto& l : net.layers) {
    tr.inputs.push_back(x);
    // Row by row so a sample's output never depends on its batch position.
    Matrix z(x.rows(), l.weights.rows());
    for (Eigen::Index r = 0; r < x.rows(); ++r) {
      const Vector xr = x.row(r).transpose();
      const Vector zr = l.weights * xr + l.bias;
      z.row(r) = zr.transpose();
    }
    detail::activate(z, l.activation);
    tr.outputs.push_back(z);
    x = std::move(z);
  }
  return tr;
}

inline Matrix forward_batch(const FeedForwardNet& net, const Matrix& input) {
  return forward_trace(net, input).output();
}

inline Vector forward(const FeedForwardNet& net, const Vector& input) {
  require_shape(input.size() == net.input_dim(),
                "input length " + std::to_string(input.size()) + " != network input " +
                    std::to_string(net.input_dim()));
  return forward_batch(net, input.transpose()).row(0).transpose();
}

struct Gradients {
  Vector params;  // canonical ParameterVector order, summed over batch rows
  Matrix input;   // one row per sample
};

inline Gradients backward(const FeedForwardNet& net, const Trace& tr, const Matrix& upstream) {
  require_shape(upstream.rows() == tr.output().rows() && upstream.cols() == net.output_dim(),
                "upstream gradient shape mismatch");
  Gradients g;
  g.params = Vector::Zero(net.parameter_count());
  // Offsets of each layer's block in the canonical ordering.
  std::vector<Eigen::Index> offset(net.layers.size());
  Eigen::Index pos = 0;
  for (std::size_t i = 0; i < net.layers.size(); ++i) {
    offset[i] = pos;
    pos += net.layers[i].weights.size() + net.layers[i].bias.size();
  }
  Matrix delta = upstream;
  for (std::size_t li = net.layers.size(); li-- > 0;) {
    const auto& l = net.layers[li];
    delta = delta.cwiseProduct(detail::activation_slope(tr.outputs[li], l.activation));
    const Matrix gw = delta.transpose() * tr.inputs[li];  // out x in
    Eigen::Index p = offset[li];
    for (Eigen::Index r = 0; r < gw.rows(); ++r) {
      for (Eigen::Index c = 0; c < gw.cols(); ++c) {
        g.params[p++] = gw(r, c);
      }
    }
    g.params.segment(p, l.bias.size()) = delta.colwise().sum().transpose();
    delta = delta * l.weights;
  }
  g.input = std::move(delta);
  return g;
}

inline std::pair<Vector, Vector> backward(const FeedForwardNet& net, const Vector& input,
                                          const Vector& upstream) {
  require_shape(upstream.size() == net.output_dim(), "upstream gradient length mismatch");
  const Trace tr = forward_trace(net, input.transpose());
  Gradients g = backward(net, tr, upstream.transpose());
  return {std::move(g.params), g.input.row(0).transpose()};
}

// ParameterVector: per layer, weights row-major then bias.
inline Vector to_vector(const FeedForwardNet& net) {
  Vector v(net.parameter_count());
  Eigen::Index p = 0;
  for (const auto& l : net.layers) {
    for (Eigen::Index r = 0; r < l.weights.rows(); ++r) {
      for (Eigen::Index c = 0; c < l.weights.cols(); ++c) {
        v[p++] = l.weights(r, c);
      }
    }
    v.segment(p, l.bias.size()) = l.bias;
    p += l.bias.size();
  }
  return v;
}

inline void from_vector(FeedForwardNet& net, const Vector& v) {
  require_shape(v.size() == net.parameter_count(), "parameter vector length mismatch");
  Eigen::Index p = 0;
  for (auto& l : net.layers) {
    for (Eigen::Index r = 0; r < l.weights.rows(); ++r) {
      for (Eigen::Index c = 0; c < l.weights.cols(); ++c) {
        l.weights(r, c) = v[p++];
      }
    }
    l.bias = v.segment(p, l.bias.size());
    p += l.bias.size();
  }
}

inline void zero_parameters(FeedForwardNet& net) {
  for (auto& l : net.layers) {
    l.weights.setZero();
    l.bias.setZero();
  }
}

// Uniform fan-based initialization with zero biases. Hidden layers use
// `hidden`, the last layer uses `output`.
inline FeedForwardNet init_net(const std::vector<Eigen::Index>& dims, Activation hidden,
                               std::uint64_t seed, Activation output = Activation::identity) {
  if (dims.size() < 2) {
    throw ConfigError("network needs at least input and output dims");
  }
  for (auto d : dims) {
    if (d < 1) {
      throw ConfigError("network dims must be positive");
    }
  }
  std::mt19937_64 rng(seed);
  FeedForwardNet net;
  for (std::size_t i = 0; i + 1 < dims.size(); ++i) {
    const Eigen::Index in = dims[i];
    const Eigen::Index out = dims[i + 1];
    const double limit = std::sqrt(6.0 / static_cast<double>(in + out));
    std::uniform_real_distribution<double> uni(-limit, limit);
    DenseLayer l;
    l.weights.resize(out, in);
    for (Eigen::Index r = 0; r < out; ++r) {
      for (Eigen::Index c = 0; c < in; ++c) {
        l.weights(r, c) = uni(rng);
      }
    }
    l.bias = Vector::Zero(out);
    l.activation = (i + 2 == dims.size()) ? output : hidden;
    net.layers.push_back(std::move(l));
  }
  return net;
}

// ---------------------------------------------------------------------------
// Finite-difference checking

using LossAndGradient = std::function<std::pair<double, Vector>(const Vector&)>;

// Max over coordinates of |analytic - numeric| / max(1e-8, |analytic| + |numeric|)
// using central differences of width 2*eps.
inline double grad_check(const LossAndGradient& fn, const Vector& params, double eps = 1e-6) {
  const auto [value, analytic] = fn(params);
  if (!std::isfinite(value)) {
    throw NumericError("loss is not finite at the base point");
  }
  require_shape(analytic.size() == params.size(), "gradient length mismatch");
  double worst = 0.0;
  Vector p = params;
  for (Eigen::Index i = 0; i < params.size(); ++i) {
    p[i] = params[i] + eps;
    const double up = fn(p).first;
    p[i] = params[i] - eps;
    const double down = fn(p).first;
    p[i] = params[i];
    if (!std::isfinite(up) || !std::isfinite(down)) {
      throw NumericError("loss is not finite at a perturbed point");
    }
    const double numeric = (up - down) / (2.0 * eps);
    const double err = std::abs(analytic[i] - numeric) /
                       std::max(1e-8, std::abs(analytic[i]) + std::abs(numeric));
    worst = std::max(worst, err);
  }
  return worst;
}

// ---------------------------------------------------------------------------
// Checkpoint JSON

inline nlohmann::json to_json(const FeedForwardNet& net) {
  nlohmann::json dims = nlohmann::json::array();
  dims.push_back(net.input_dim());
  nlohmann::json layers = nlohmann::json::array();
  for (const auto& l : net.layers) {
    dims.push_back(l.out_dim());
    nlohmann::json w = nlohmann::json::array();
    for (Eigen::Index r = 0; r < l.weights.rows(); ++r) {
      nlohmann::json row = nlohmann::json::array();
      for (Eigen::Index c = 0; c < l.weights.cols(); ++c) {
        row.push_back(l.weights(r, c));
      }
      w.push_back(std::move(row));
    }
    nlohmann::json b = nlohmann::json::array();
    for (Eigen::Index r = 0; r < l.bias.size(); ++r) {
      b.push_back(l.bias[r]);
    }
    layers.push_back({{"activation", to_string(l.activation)}, {"weights", std::move(w)},
                      {"bias", std::move(b)}});
  }
  return {{"dims", std::move(dims)}, {"layers", std::move(layers)}};
}

inline FeedForwardNet net_from_json(const nlohmann::json& j) {
  try {
    FeedForwardNet net;
    for (const auto& lj : j.at("layers")) {
      DenseLayer l;
      l.activation = activation_from_string(lj.at("activation").get<std::string>());
      const auto& w = lj.at("weights");
      const auto rows = static_cast<Eigen::Index>(w.size());
      const auto cols = rows > 0 ? static_cast<Eigen::Index>(w[0].size()) : 0;
      l.weights.resize(rows, cols);
      for (Eigen::Index r = 0; r < rows; ++r) {
        require_shape(static_cast<Eigen::Index>(w[r].size()) == cols, "ragged weight matrix");
        for (Eigen::Index c = 0; c < cols; ++c) {
          l.weights(r, c) = w[r][c].get<double>();
        }
      }
      const auto& b = lj.at("bias");
      l.bias.resize(static_cast<Eigen::Index>(b.size()));
      for (std::size_t r = 0; r < b.size(); ++r) {
        l.bias[static_cast<Eigen::Index>(r)] = b[r].get<double>();
      }
      net.layers.push_back(std::move(l));
    }
    validate(net);
    return net;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("malformed network checkpoint: ") + e.what());
  }
}

}  // namespace glemiml::nn
