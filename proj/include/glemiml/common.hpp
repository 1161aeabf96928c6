#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <stdexcept>
#include <string>

namespace glemiml {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using RowVector = Eigen::RowVectorXd;

// Error hierarchy. The CLI maps each family to an exit code.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct ConfigError : Error {
  using Error::Error;
};
struct ShapeError : Error {
  using Error::Error;
};
struct NumericError : Error {
  using Error::Error;
};
struct DegenerateInputError : Error {
  using Error::Error;
};
struct DataError : Error {
  using Error::Error;
};
struct ParseError : DataError {
  ParseError(std::size_t line, const std::string& what)
      : DataError("line " + std::to_string(line) + ": " + what), line_number(line) {}
  std::size_t line_number;
};
struct DimensionError : DataError {
  DimensionError(std::size_t bag, const std::string& what)
      : DataError("bag " + std::to_string(bag) + ": " + what), bag_index(bag) {}
  std::size_t bag_index;
};

inline constexpr double kProbClamp = 1e-7;

inline double clamp_prob(double p) {
  return std::min(std::max(p, kProbClamp), 1.0 - kProbClamp);
}

inline double sigmoid(double x) {
  if (x >= 0) {
    return 1.0 / (1.0 + std::exp(-x));
  }
  const double e = std::exp(x);
  return e / (1.0 + e);
}

inline Matrix sigmoid(const Matrix& m) {
  return m.unaryExpr([](double v) { return sigmoid(v); });
}

// Row-wise softmax with max-shift.
inline Matrix row_softmax(const Matrix& logits) {
  Matrix out(logits.rows(), logits.cols());
  for (Eigen::Index i = 0; i < logits.rows(); ++i) {
    const double mx = logits.row(i).maxCoeff();
    RowVector e = logits.row(i).unaryExpr([mx](double v) { return std::exp(v - mx); });
    out.row(i) = e / e.sum();
  }
  return out;
}

inline void require_shape(bool ok, const std::string& what) {
  if (!ok) {
    throw ShapeError(what);
  }
}

inline bool all_finite(const Matrix& m) { return m.allFinite(); }

}  // namespace glemiml
