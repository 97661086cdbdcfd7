#include <gtest/gtest.h>

#include <cmath>

#include "nsn/optim.hpp"

namespace nsn {
namespace {

TEST(Momentum, StandardExample) {
  EXPECT_EQ(momentum_standard(Matrix{{1}}, Matrix{{2}}, 0.5f), (Matrix{{2.5f}}));
  EXPECT_EQ(momentum_standard(Matrix{{0}}, Matrix{{3}}, 0.9f), (Matrix{{3}}));
}

TEST(Momentum, NsnExample) {
  EXPECT_FLOAT_EQ(momentum_nsn(Matrix{{1}}, Matrix{{2}}, 0.5f)(0, 0), 1.5f);
  EXPECT_FLOAT_EQ(momentum_nsn(Matrix{{0}}, Matrix{{3}}, 0.9f)(0, 0), 0.3f);
}

TEST(Momentum, ShapeMismatch) { EXPECT_THROW(momentum_nsn(Matrix(1, 2), Matrix(2, 1), 0.9f), ShapeError); }

TEST(Update, Example) { EXPECT_FLOAT_EQ(apply_update(Matrix{{1}}, Matrix{{2}}, 0.3f)(0, 0), 0.4f); }

TEST(Schedule, StepDecay) {
  const Schedule s;
  EXPECT_DOUBLE_EQ(lr_at(s, 0), 0.3);
  EXPECT_DOUBLE_EQ(lr_at(s, 199), 0.3);
  EXPECT_DOUBLE_EQ(lr_at(s, 200), 0.1);
  EXPECT_NEAR(lr_at(s, 400), 0.1 / 3.0, 1e-15);
  EXPECT_NEAR(lr_at(s, 599), 0.1 / 3.0, 1e-15);
}

TEST(Schedule, Validate) {
  Schedule s;
  s.decay_every = 0;
  EXPECT_THROW(s.validate(), ConfigError);
  s = Schedule{};
  s.alpha = 1.0;
  EXPECT_THROW(s.validate(), ConfigError);
}

// V' = a V + (1-a) G with rate lr traces the same weights as V = a V + G with
// rate lr (1-a).
TEST(Momentum, FormatsAreEquivalentUnderRescaledRate) {
  const float alpha = 0.9f, lr = 0.05f;
  Matrix w1{{1, -2, 3}}, w2 = w1, v1(1, 3), v2(1, 3);
  for (int t = 0; t < 200; ++t) {
    const Matrix g1 = scale(2.0f, w1), g2 = scale(2.0f, w2);
    v1 = momentum_nsn(v1, g1, alpha);
    w1 = apply_update(w1, v1, lr);
    v2 = momentum_standard(v2, g2, alpha);
    w2 = apply_update(w2, v2, lr * (1 - alpha));
  }
  for (std::size_t i = 0; i < 3; ++i) EXPECT_NEAR(w1(0, i), w2(0, i), 1e-6);
}

TEST(L2, MatchesFiniteDifferenceOfPenalty) {
  const Matrix w{{0.5f, -1.5f, 2.0f}};
  const float lambda = 0.1f;
  const Matrix g = l2_gradient(lambda, w);
  for (std::size_t i = 0; i < 3; ++i) {
    const double eps = 1e-3;
    double norm_p = 0, norm_m = 0;
    for (std::size_t j = 0; j < 3; ++j) {
      const double v = w(0, j), d = (i == j) ? eps : 0.0;
      norm_p += (v + d) * (v + d);
      norm_m += (v - d) * (v - d);
    }
    const double fd = (0.5 * lambda * norm_p - 0.5 * lambda * norm_m) / (2 * eps);
    EXPECT_NEAR(g(0, i), fd, 1e-6);
  }
  EXPECT_THROW(l2_gradient(-1.0f, w), ConfigError);
}

TEST(L2, WeightsOnly) {
  const DenseLayer<float> layer(Matrix{{2, 4}}, Matrix{{8}});
  GradientSet<float> g{{Matrix(1, 2), Matrix(1, 1)}};
  add_l2(g, LayerStack<float>{&layer}, 0.5f);
  EXPECT_EQ(g[0].weight, (Matrix{{1, 2}}));
  EXPECT_EQ(g[0].bias(0, 0), 0.0f);
}

TEST(OptimizerStep, UpdatesEveryTensor) {
  std::vector<DenseLayer<float>> params{DenseLayer<float>(Matrix{{1}}, Matrix{{1}})};
  MomentumState state = MomentumState::zeros_like(params);
  GradientSet<float> g{{Matrix{{1}}, Matrix{{2}}}};
  optimizer_step(params, state, g, MomentumFormat::kStandard, 0.9f, 0.1f);
  EXPECT_FLOAT_EQ(params[0].weight(0, 0), 0.9f);
  EXPECT_FLOAT_EQ(params[0].bias(0, 0), 0.8f);
  optimizer_step(params, state, g, MomentumFormat::kStandard, 0.9f, 0.1f);
  EXPECT_FLOAT_EQ(params[0].weight(0, 0), 0.9f - 0.19f);
  EXPECT_THROW(optimizer_step(params, state, {}, MomentumFormat::kNsn, 0.9f, 0.1f), ConsistencyError);
}

}  // namespace
}  // namespace nsn
