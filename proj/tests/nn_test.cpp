#include "support.hpp"

#include <gtest/gtest.h>

using namespace glemiml;
using namespace glemiml::nn;

namespace {

FeedForwardNet single(const Matrix& w, const Vector& b, Activation a) {
  FeedForwardNet net;
  net.layers.push_back(DenseLayer{w, b, a});
  return net;
}

}  // namespace

TEST(Forward, IdentityLayerIsIdentityMap) {
  const auto net = single(Matrix::Identity(3, 3), Vector::Zero(3), Activation::identity);
  Vector x(3);
  x << 1.5, -2, 7;
  EXPECT_EQ(forward(net, x), x);
}

TEST(Forward, ZeroSigmoidLayerGivesHalf) {
  const auto net = single(Matrix::Zero(4, 2), Vector::Zero(4), Activation::sigmoid);
  EXPECT_EQ(forward(net, Vector::Constant(2, 3.0)), Vector::Constant(4, 0.5));
}

TEST(Forward, ReluClipsNegative) {
  const auto net = single(Matrix::Constant(1, 1, -1.0), Vector::Zero(1), Activation::relu);
  EXPECT_EQ(forward(net, Vector::Constant(1, 2.0))[0], 0.0);
}

TEST(Forward, HandEvaluatedTwoLayerTanh) {
  FeedForwardNet net;
  Matrix w1(2, 1);
  w1 << 1, -2;
  Vector b1(2);
  b1 << 0.5, 0;
  net.layers.push_back(DenseLayer{w1, b1, Activation::tanh});
  Matrix w2(1, 2);
  w2 << 3, 1;
  net.layers.push_back(DenseLayer{w2, Vector::Zero(1), Activation::identity});
  const double x = 0.3;
  EXPECT_NEAR(forward(net, Vector::Constant(1, x))[0], 3 * std::tanh(x + 0.5) + std::tanh(-2 * x), 1e-15);
}

TEST(Forward, ShapeMismatch) {
  const auto net = init_net({3, 2}, Activation::tanh, 1);
  EXPECT_THROW(forward(net, Vector::Zero(2)), ShapeError);
  EXPECT_THROW(backward(net, Vector::Zero(3), Vector::Zero(3)), ShapeError);
}

TEST(Forward, Deterministic) {
  const auto net = init_net({5, 7, 3}, Activation::tanh, 9);
  gt::Gen g(1);
  const Vector x = g.normal_matrix(5, 1).col(0);
  EXPECT_EQ(forward(net, x), forward(net, x));
}

TEST(Backward, ZeroUpstreamGivesZeroGradients) {
  const auto net = init_net({4, 5, 3}, Activation::tanh, 2);
  const auto [gp, gx] = backward(net, Vector::Ones(4), Vector::Zero(3));
  EXPECT_EQ(gp, Vector::Zero(net.parameter_count()));
  EXPECT_EQ(gx, Vector::Zero(4));
}

TEST(Backward, LinearScalar) {
  const double w = 1.7, x = -0.4;
  const auto net = single(Matrix::Constant(1, 1, w), Vector::Zero(1), Activation::identity);
  const auto [gp, gx] = backward(net, Vector::Constant(1, x), Vector::Ones(1));
  EXPECT_DOUBLE_EQ(gp[0], x);   // dy/dw
  EXPECT_DOUBLE_EQ(gp[1], 1.0); // dy/db
  EXPECT_DOUBLE_EQ(gx[0], w);
}

TEST(Backward, MatchesFiniteDifferencesForEveryActivation) {
  gt::Gen g(3);
  for (Activation act : {Activation::identity, Activation::relu, Activation::tanh, Activation::sigmoid}) {
    for (int trial = 0; trial < 10; ++trial) {
      const Eigen::Index in = g.integer(1, 4), hid = g.integer(1, 5), out = g.integer(1, 3);
      FeedForwardNet net = init_net({in, hid, out}, act, static_cast<std::uint64_t>(trial), act);
      Vector theta = to_vector(net);
      for (Eigen::Index i = 0; i < theta.size(); ++i) theta[i] += g.normal(0.3);
      const Vector x = g.normal_matrix(in, 1).col(0);
      const Vector up = g.normal_matrix(out, 1).col(0);
      auto fn = [&](const Vector& p) {
        FeedForwardNet n = net;
        from_vector(n, p);
        const double v = forward(n, x).dot(up);
        return std::make_pair(v, backward(n, x, up).first);
      };
      EXPECT_LT(grad_check(fn, theta), 1e-4) << to_string(act);
      // Input gradient too.
      from_vector(net, theta);
      auto fx = [&](const Vector& xx) {
        return std::make_pair(forward(net, xx).dot(up), backward(net, xx, up).second);
      };
      EXPECT_LT(grad_check(fx, x), 1e-4) << to_string(act);
    }
  }
}

TEST(Backward, BatchGradientIsSumOfRows) {
  gt::Gen g(4);
  const auto net = init_net({3, 4, 2}, Activation::tanh, 5);
  const Matrix x = g.normal_matrix(5, 3), up = g.normal_matrix(5, 2);
  const auto batch = backward(net, forward_trace(net, x), up);
  Vector sum = Vector::Zero(net.parameter_count());
  for (Eigen::Index r = 0; r < 5; ++r) {
    const auto [gp, gx] = backward(net, x.row(r).transpose(), up.row(r).transpose());
    sum += gp;
    EXPECT_LT((gx.transpose() - batch.input.row(r)).cwiseAbs().maxCoeff(), 1e-14);
  }
  EXPECT_LT((sum - batch.params).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(GradCheck, QuadraticIsNearlyExact) {
  gt::Gen g(5);
  const Vector p = g.normal_matrix(20, 1).col(0);
  auto fn = [](const Vector& v) { return std::make_pair(0.5 * v.squaredNorm(), Vector(v)); };
  EXPECT_LT(grad_check(fn, p), 1e-7);
}

TEST(GradCheck, ConstantLossIsZero) {
  auto fn = [](const Vector& v) { return std::make_pair(3.0, Vector(Vector::Zero(v.size()))); };
  EXPECT_EQ(grad_check(fn, Vector::Ones(5)), 0.0);
}

TEST(GradCheck, DetectsWrongGradient) {
  auto fn = [](const Vector& v) { return std::make_pair(0.5 * v.squaredNorm(), Vector(2.0 * v)); };
  EXPECT_GT(grad_check(fn, Vector::Ones(3)), 0.3);
}

TEST(GradCheck, NonFiniteLossThrows) {
  auto fn = [](const Vector& v) {
    return std::make_pair(std::log(v[0]), Vector(Vector::Constant(1, 1.0 / v[0])));
  };
  EXPECT_THROW(grad_check(fn, Vector::Constant(1, -1.0)), NumericError);
  EXPECT_THROW(grad_check(fn, Vector::Constant(1, 5e-7)), NumericError);  // perturbation crosses 0
}

TEST(Init, ShapesAndZeroBias) {
  const auto net = init_net({3, 4, 2}, Activation::tanh, 1);
  ASSERT_EQ(net.layers.size(), 2u);
  EXPECT_EQ(net.layers[0].weights.rows(), 4);
  EXPECT_EQ(net.layers[0].weights.cols(), 3);
  EXPECT_EQ(net.layers[1].weights.rows(), 2);
  EXPECT_EQ(net.layers[1].weights.cols(), 4);
  for (const auto& l : net.layers) EXPECT_EQ(l.bias, Vector::Zero(l.bias.size()));
  EXPECT_EQ(net.layers[0].activation, Activation::tanh);
  EXPECT_EQ(net.layers[1].activation, Activation::identity);
}

TEST(Init, DeterministicAndBounded) {
  const auto a = init_net({6, 5, 4}, Activation::relu, 42);
  EXPECT_EQ(a, init_net({6, 5, 4}, Activation::relu, 42));
  EXPECT_NE(a, init_net({6, 5, 4}, Activation::relu, 43));
  EXPECT_LE(a.layers[0].weights.cwiseAbs().maxCoeff(), std::sqrt(6.0 / 11));
  EXPECT_LE(a.layers[1].weights.cwiseAbs().maxCoeff(), std::sqrt(6.0 / 9));
}

TEST(Init, RejectsBadDims) {
  EXPECT_THROW(init_net({3}, Activation::tanh, 1), ConfigError);
  EXPECT_THROW(init_net({3, 0, 2}, Activation::tanh, 1), ConfigError);
}

TEST(ParameterVector, RoundTripAndOrdering) {
  auto net = init_net({2, 3, 1}, Activation::tanh, 7);
  const Vector v = to_vector(net);
  ASSERT_EQ(v.size(), 2 * 3 + 3 + 3 * 1 + 1);
  // Weights row-major, then bias, per layer.
  EXPECT_EQ(v[0], net.layers[0].weights(0, 0));
  EXPECT_EQ(v[1], net.layers[0].weights(0, 1));
  EXPECT_EQ(v[2], net.layers[0].weights(1, 0));
  EXPECT_EQ(v[6], net.layers[0].bias[0]);
  gt::Gen g(1);
  const Vector w = g.normal_matrix(v.size(), 1).col(0);
  from_vector(net, w);
  EXPECT_EQ(to_vector(net), w);
  EXPECT_THROW(from_vector(net, Vector::Zero(3)), ShapeError);
}

TEST(Checkpoint, JsonRoundTrip) {
  gt::Gen g(2);
  auto net = init_net({4, 6, 3}, Activation::sigmoid, 3, Activation::relu);
  from_vector(net, g.normal_matrix(net.parameter_count(), 1).col(0));
  const auto back = net_from_json(nlohmann::json::parse(to_json(net).dump()));
  EXPECT_EQ(back, net);
}
