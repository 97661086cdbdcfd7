#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "nsn/graph.hpp"
#include "oracles.hpp"

namespace nsn {
namespace {

TEST(Dense, HandCase) {
  const DenseLayer<float> layer(Matrix{{1, 0, -1}, {2, 1, 0}}, Matrix{{0.5f, -1}});
  const Matrix out = dense_forward(Matrix{{1, 2, 3}}, layer);
  EXPECT_EQ(out, (Matrix{{-1.5f, 3}}));
}

TEST(Dense, ZeroInputGivesBias) {
  std::mt19937_64 gen(1);
  const DenseLayer<float> layer(oracle::random_matrix(5, 7, gen), oracle::random_matrix(1, 5, gen));
  const Matrix out = dense_forward(Matrix(3, 7), layer);
  for (std::size_t r = 0; r < 3; ++r)
    for (std::size_t c = 0; c < 5; ++c) EXPECT_EQ(out(r, c), layer.bias(0, c));
}

TEST(Dense, ShapeMismatch) { EXPECT_THROW(dense_forward(Matrix(2, 3), DenseLayer<float>(4, 5)), ShapeError); }

TEST(Relu, ForwardAndBackwardAtZero) {
  const Matrix z{{-1, 0, 2}};
  EXPECT_EQ(relu(z), (Matrix{{0, 0, 2}}));
  EXPECT_EQ(relu_backward(Matrix{{5, 5, 5}}, z), (Matrix{{0, 0, 5}}));
}

TEST(Dropout, KeepFractionAndScale) {
  Rng rng(42);
  const Matrix m = dropout_mask<float>(1000, 1000, 0.5, rng);
  std::size_t kept = 0;
  for (float v : m.values()) {
    ASSERT_TRUE(v == 0.0f || v == 2.0f);
    kept += v != 0.0f;
  }
  EXPECT_NEAR(static_cast<double>(kept) / 1e6, 0.5, 0.002);
  Rng rng2(42);
  EXPECT_TRUE(dropout_mask<float>(1000, 1000, 0.5, rng2).bitwise_equal(m));
  Rng rng3(1);
  const Matrix all = dropout_mask<float>(4, 4, 1.0, rng3);
  for (float v : all.values()) EXPECT_EQ(v, 1.0f);
  EXPECT_THROW(dropout_mask<float>(2, 2, 0.0, rng3), ConfigError);
  EXPECT_THROW(dropout_mask<float>(2, 2, 1.5, rng3), ConfigError);
}

TEST(LogSoftmax, MatchesOracleAndIsStable) {
  const Matrix z{{1, 2, 3}, {1000, 1000, 1000}, {-1000, 0, 1000}};
  const Matrix lp = log_softmax(z);
  const auto r0 = oracle::log_softmax_row64({1, 2, 3});
  for (int c = 0; c < 3; ++c) EXPECT_NEAR(lp(0, c), r0[c], 1e-6);
  for (int c = 0; c < 3; ++c) EXPECT_NEAR(lp(1, c), -std::log(3.0), 1e-6);
  EXPECT_NEAR(lp(2, 2), 0.0, 1e-6);
  EXPECT_TRUE(all_finite(lp));
  for (std::size_t r = 0; r < 3; ++r) {
    double s = 0.0;
    for (std::size_t c = 0; c < 3; ++c) s += std::exp(static_cast<double>(lp(r, c)));
    EXPECT_NEAR(s, 1.0, 1e-6);
  }
}

TEST(Nll, HandCase) {
  Matrix z(2, 10);
  z(0, 0) = 1;
  z(0, 1) = 2;
  const std::vector<std::uint8_t> y{1, 3};
  // float64 reference: 1.5994511797311375
  EXPECT_NEAR(nll_loss(log_softmax(z), y), 1.5994511797311375, 1e-6);
}

TEST(Nll, Errors) {
  const Matrix lp = log_softmax(Matrix(2, 10));
  EXPECT_THROW(nll_loss(lp, std::vector<std::uint8_t>{1, 10}), ValueError);
  EXPECT_THROW(nll_loss(lp, std::vector<std::uint8_t>{1}), ShapeError);
}

TEST(Backward, SoftmaxRegressionClosedForm) {
  std::mt19937_64 gen(3);
  const std::size_t in = 6, classes = 10, batch = 5;
  const DenseLayer<float> layer(oracle::random_matrix(classes, in, gen), oracle::random_matrix(1, classes, gen));
  const Matrix x = oracle::random_matrix(batch, in, gen);
  const std::vector<std::uint8_t> y{0, 3, 9, 3, 1};
  const LayerStack<float> stack{&layer};
  const auto cache = model_forward(ModelSpec{}, stack, x, Mode::kEval);
  const auto grads = model_backward(stack, cache, y);
  const auto ref = oracle::softmax_regression_grad(oracle::to64(layer.weight), oracle::to64(layer.bias),
                                                   oracle::to64(x), y, classes, in);
  ASSERT_EQ(grads.size(), 1u);
  for (std::size_t i = 0; i < ref.size(); ++i) EXPECT_NEAR(grads[0].weight.data()[i], ref[i], 1e-6);
}

TEST(Backward, ZeroInputGivesZeroWeightGradient) {
  std::mt19937_64 gen(4);
  const DenseLayer<float> layer(oracle::random_matrix(10, 4, gen), oracle::random_matrix(1, 10, gen));
  const LayerStack<float> stack{&layer};
  const auto cache = model_forward(ModelSpec{}, stack, Matrix(3, 4), Mode::kEval);
  const auto grads = model_backward(stack, cache, std::vector<std::uint8_t>{1, 2, 3});
  for (float v : grads[0].weight.values()) EXPECT_EQ(v, 0.0f);
}

TEST(Forward, TrainModeNeedsRng) {
  const DenseLayer<float> a(4, 4), b(10, 4);
  const LayerStack<float> stack{&a, &b};
  const ModelSpec spec{0.8, 0.5, 10};
  EXPECT_THROW(model_forward(spec, stack, Matrix(2, 4), Mode::kTrain), ConfigError);
  EXPECT_NO_THROW(model_forward(spec, stack, Matrix(2, 4), Mode::kEval));
}

TEST(Forward, ValidateChain) {
  const DenseLayer<float> a(5, 4), b(10, 6);
  EXPECT_THROW(validate(ModelSpec{}, LayerStack<float>{&a, &b}), ShapeError);
  const DenseLayer<float> c(7, 5);
  EXPECT_THROW(validate(ModelSpec{}, LayerStack<float>{&a, &c}), ShapeError);
}

TEST(CentralDifference, KnownFunction) {
  const auto f = [](std::span<const double> p) { return p[0] * p[0] * p[1] + std::sin(p[2]); };
  const auto g = central_difference(f, {1.5, -2.0, 0.3});
  EXPECT_NEAR(g[0], -6.0, 1e-8);
  EXPECT_NEAR(g[1], 2.25, 1e-8);
  EXPECT_NEAR(g[2], std::cos(0.3), 1e-8);
}

TEST(GradCheck, TwoHiddenLayersDouble) {
  std::mt19937_64 gen(5);
  std::vector<DenseLayer<double>> layers;
  const std::size_t dims[] = {20, 8, 8, 10};
  for (int l = 0; l < 3; ++l) {
    layers.emplace_back(oracle::random_matrix(dims[l + 1], dims[l], gen).cast<double>(),
                        oracle::random_matrix(1, dims[l + 1], gen, -0.1f, 0.1f).cast<double>());
  }
  const MatrixD x = oracle::random_matrix(4, 20, gen, 0.0f, 1.0f).cast<double>();
  const std::vector<std::uint8_t> y{2, 7, 0, 9};
  const auto stack = stack_of(layers);
  const auto cache = model_forward(ModelSpec{}, stack, x, Mode::kEval);
  const auto analytic = model_backward(stack, cache, y);
  const auto numeric = numerical_gradient(layers, x, y);
  EXPECT_LE(max_relative_error(analytic, numeric), 1e-4);
}

}  // namespace
}  // namespace nsn
