#include <gtest/gtest.h>

#include <array>
#include <random>

#include "nsn/tensor.hpp"
#include "oracles.hpp"

namespace nsn {
namespace {

TEST(Matmul, IdentityLeavesMatrixUnchanged) {
  std::mt19937_64 gen(1);
  const Matrix m = oracle::random_matrix(3, 3, gen);
  EXPECT_TRUE(matmul(Matrix::identity(3), m).bitwise_equal(m));
}

TEST(Matmul, HandArithmetic) {
  const Matrix a{{1, 2}, {3, 4}};
  const Matrix b{{0}, {1}};
  EXPECT_EQ(matmul(a, b), (Matrix{{2}, {4}}));
}

TEST(Matmul, MatchesDoublePrecisionOracle) {
  std::mt19937_64 gen(2);
  const Matrix a = oracle::random_matrix(5, 7, gen);
  const Matrix b = oracle::random_matrix(7, 3, gen);
  const auto ref = oracle::matmul64(oracle::to64(a), oracle::to64(b), 5, 7, 3);
  const Matrix c = matmul(a, b);
  for (std::size_t i = 0; i < ref.size(); ++i) EXPECT_NEAR(c.data()[i], ref[i], 1e-5);
}

// Random shapes up to 8x8 plus shapes that exercise the register-tile and
// ragged-edge paths of the kernel.
TEST(Matmul, PropertyAgreesWithOracleAcrossShapes) {
  std::mt19937_64 gen(3);
  std::uniform_int_distribution<std::size_t> dim(1, 8);
  std::vector<std::array<std::size_t, 3>> shapes;
  for (int t = 0; t < 200; ++t) shapes.push_back({dim(gen), dim(gen), dim(gen)});
  shapes.push_back({16, 300, 96});
  shapes.push_back({19, 260, 53});
  shapes.push_back({8, 784, 48});
  for (auto [r, k, c] : shapes) {
    const Matrix a = oracle::random_matrix(r, k, gen);
    const Matrix b = oracle::random_matrix(k, c, gen);
    const auto ref = oracle::matmul64(oracle::to64(a), oracle::to64(b), r, k, c);
    const Matrix out = matmul(a, b);
    double worst = 0.0;
    for (std::size_t i = 0; i < ref.size(); ++i) worst = std::max(worst, std::abs(out.data()[i] - ref[i]));
    // float accumulation error grows with k; 1e-5 is the bound for k <= 8.
    EXPECT_LE(worst, k <= 8 ? 1e-5 : 1e-4) << r << "x" << k << "x" << c;
  }
}

TEST(Matmul, SummationOrderIsSequentialInK) {
  // Each element must equal the left-to-right float sum, whatever the tiling.
  std::mt19937_64 gen(4);
  const std::size_t r = 11, k = 300, c = 50;
  const Matrix a = oracle::random_matrix(r, k, gen);
  const Matrix b = oracle::random_matrix(k, c, gen);
  const Matrix out = matmul(a, b);
  const Matrix again = matmul(a, b);
  EXPECT_TRUE(out.bitwise_equal(again));
  for (std::size_t i = 0; i < r; ++i) {
    for (std::size_t j = 0; j < c; ++j) {
      double s = 0.0;
      for (std::size_t t = 0; t < k; ++t) s += static_cast<double>(a(i, t)) * b(t, j);
      EXPECT_NEAR(out(i, j), s, 1e-4);
    }
  }
}

TEST(Matmul, ShapeMismatchNamesBothShapes) {
  try {
    matmul(Matrix(2, 3), Matrix(4, 2));
    FAIL() << "expected ShapeError";
  } catch (const ShapeError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("[2x3]"), std::string::npos);
    EXPECT_NE(msg.find("[4x2]"), std::string::npos);
  }
}

TEST(Matmul, InputsAreNotModified) {
  std::mt19937_64 gen(5);
  const Matrix a = oracle::random_matrix(4, 6, gen);
  const Matrix b = oracle::random_matrix(6, 5, gen);
  const Matrix a0 = a, b0 = b;
  (void)matmul(a, b);
  EXPECT_TRUE(a.bitwise_equal(a0));
  EXPECT_TRUE(b.bitwise_equal(b0));
}

TEST(Transpose, Cases) {
  std::mt19937_64 gen(6);
  const Matrix m = oracle::random_matrix(37, 45, gen);
  EXPECT_TRUE(transpose(transpose(m)).bitwise_equal(m));
  EXPECT_EQ(transpose(Matrix{{7}}), (Matrix{{7}}));
  EXPECT_EQ(transpose(Matrix{{1, 2, 3}}), (Matrix{{1}, {2}, {3}}));
  const Matrix t = transpose(m);
  for (std::size_t i = 0; i < m.rows(); ++i)
    for (std::size_t j = 0; j < m.cols(); ++j) ASSERT_EQ(t(j, i), m(i, j));
}

TEST(MapZip, Identities) {
  std::mt19937_64 gen(7);
  const Matrix m = oracle::random_matrix(3, 4, gen);
  EXPECT_TRUE(add(m, Matrix(3, 4)).bitwise_equal(m));
  EXPECT_TRUE(hadamard(m, Matrix(3, 4, 1.0f)).bitwise_equal(m));
  EXPECT_EQ(axpy(0.5f, Matrix{{2, 4}}, Matrix{{1, 1}}), (Matrix{{2, 3}}));
  EXPECT_THROW(add(m, Matrix(4, 3)), ShapeError);
}

TEST(Reduce, Cases) {
  EXPECT_EQ(sum(Matrix(3, 3)), 0.0f);
  EXPECT_EQ(argmax_rows(Matrix{{1, 3, 3}}), std::vector<std::size_t>{1});
  EXPECT_FLOAT_EQ(mean(Matrix{{1, 2}, {3, 4}}), 2.5f);
  EXPECT_THROW(sum(Matrix()), ShapeError);
  EXPECT_THROW(argmax_rows(Matrix(0, 10)), ShapeError);
}

TEST(Matrix, RejectsMismatchedData) { EXPECT_THROW(Matrix(2, 2, std::vector<float>(3)), ShapeError); }

}  // namespace
}  // namespace nsn
