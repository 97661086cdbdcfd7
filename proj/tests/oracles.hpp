#pragma once

// Independent 64-bit reference routines used only by tests. Deliberately naive
// so they share no code path with the library kernels they check.

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include "nsn/tensor.hpp"

namespace nsn::oracle {

inline std::vector<double> matmul64(const std::vector<double>& a, const std::vector<double>& b, std::size_t r,
                                    std::size_t k, std::size_t c) {
  std::vector<double> out(r * c, 0.0);
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) {
      double s = 0.0;
      for (std::size_t t = 0; t < k; ++t) s += a[i * k + t] * b[t * c + j];
      out[i * c + j] = s;
    }
  return out;
}

inline std::vector<double> to64(const Matrix& m) { return {m.values().begin(), m.values().end()}; }

inline Matrix random_matrix(std::size_t rows, std::size_t cols, std::mt19937_64& gen, float lo = -1.0f,
                            float hi = 1.0f) {
  std::uniform_real_distribution<float> dist(lo, hi);
  Matrix m(rows, cols);
  for (float& v : m.values()) v = dist(gen);
  return m;
}

inline std::vector<double> log_softmax_row64(const std::vector<double>& z) {
  double mx = z[0];
  for (double v : z) mx = std::max(mx, v);
  double s = 0.0;
  for (double v : z) s += std::exp(v - mx);
  std::vector<double> out;
  for (double v : z) out.push_back(v - mx - std::log(s));
  return out;
}

/// dL/dW = (softmax(x W^T + b) - onehot)^T x / batch for softmax regression.
inline std::vector<double> softmax_regression_grad(const std::vector<double>& w, const std::vector<double>& b,
                                                   const std::vector<double>& x, const std::vector<std::uint8_t>& y,
                                                   std::size_t classes, std::size_t in) {
  const std::size_t batch = y.size();
  std::vector<double> g(classes * in, 0.0);
  for (std::size_t s = 0; s < batch; ++s) {
    std::vector<double> z(classes);
    for (std::size_t c = 0; c < classes; ++c) {
      z[c] = b[c];
      for (std::size_t i = 0; i < in; ++i) z[c] += w[c * in + i] * x[s * in + i];
    }
    const auto lp = log_softmax_row64(z);
    for (std::size_t c = 0; c < classes; ++c) {
      const double d = std::exp(lp[c]) - (c == y[s] ? 1.0 : 0.0);
      for (std::size_t i = 0; i < in; ++i) g[c * in + i] += d * x[s * in + i] / static_cast<double>(batch);
    }
  }
  return g;
}

}  // namespace nsn::oracle
