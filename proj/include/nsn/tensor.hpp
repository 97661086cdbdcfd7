#pragma once

#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

#include "nsn/error.hpp"

namespace nsn {

/// Dense row-major 2-D array. Training state uses `Matrix` (32-bit); the
/// gradient oracle runs on `MatrixD` (64-bit).
template <typename T>
class BasicMatrix {
 public:
  using value_type = T;

  BasicMatrix() = default;
  BasicMatrix(std::size_t rows, std::size_t cols, T fill = T{0})
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
  BasicMatrix(std::size_t rows, std::size_t cols, std::vector<T> data);
  BasicMatrix(std::initializer_list<std::initializer_list<T>> rows);

  static BasicMatrix identity(std::size_t n);

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  T& operator()(std::size_t r, std::size_t c) noexcept { return data_[r * cols_ + c]; }
  const T& operator()(std::size_t r, std::size_t c) const noexcept { return data_[r * cols_ + c]; }

  std::span<T> values() noexcept { return data_; }
  std::span<const T> values() const noexcept { return data_; }
  std::span<T> row(std::size_t r) noexcept { return {data_.data() + r * cols_, cols_}; }
  std::span<const T> row(std::size_t r) const noexcept { return {data_.data() + r * cols_, cols_}; }

  T* data() noexcept { return data_.data(); }
  const T* data() const noexcept { return data_.data(); }

  bool same_shape(const BasicMatrix& other) const noexcept {
    return rows_ == other.rows_ && cols_ == other.cols_;
  }
  std::string shape_string() const;

  void fill(T value);

  /// Bitwise comparison (distinguishes -0 from +0, NaN payloads compare by bits).
  bool bitwise_equal(const BasicMatrix& other) const noexcept;

  template <typename U>
  BasicMatrix<U> cast() const {
    BasicMatrix<U> out(rows_, cols_);
    for (std::size_t i = 0; i < data_.size(); ++i) out.data()[i] = static_cast<U>(data_[i]);
    return out;
  }

  friend bool operator==(const BasicMatrix&, const BasicMatrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<T> data_;
};

using Matrix = BasicMatrix<float>;
using MatrixD = BasicMatrix<double>;

template <typename T>
void require_same_shape(const BasicMatrix<T>& a, const BasicMatrix<T>& b, const char* what);

/// a[r x k] * b[k x c]. Each output element is accumulated over k in
/// ascending order, so results are bitwise reproducible.
template <typename T>
BasicMatrix<T> matmul(const BasicMatrix<T>& a, const BasicMatrix<T>& b);

template <typename T>
BasicMatrix<T> transpose(const BasicMatrix<T>& a);

template <typename T, typename F>
BasicMatrix<T> map_zip(const BasicMatrix<T>& a, const BasicMatrix<T>& b, F&& f) {
  require_same_shape(a, b, "map_zip");
  BasicMatrix<T> out(a.rows(), a.cols());
  const T* pa = a.data();
  const T* pb = b.data();
  T* po = out.data();
  for (std::size_t i = 0; i < a.size(); ++i) po[i] = f(pa[i], pb[i]);
  return out;
}

template <typename T, typename F>
BasicMatrix<T> map(const BasicMatrix<T>& a, F&& f) {
  BasicMatrix<T> out(a.rows(), a.cols());
  const T* pa = a.data();
  T* po = out.data();
  for (std::size_t i = 0; i < a.size(); ++i) po[i] = f(pa[i]);
  return out;
}

template <typename T>
BasicMatrix<T> add(const BasicMatrix<T>& a, const BasicMatrix<T>& b) {
  return map_zip(a, b, [](T x, T y) { return x + y; });
}

template <typename T>
BasicMatrix<T> subtract(const BasicMatrix<T>& a, const BasicMatrix<T>& b) {
  return map_zip(a, b, [](T x, T y) { return x - y; });
}

template <typename T>
BasicMatrix<T> hadamard(const BasicMatrix<T>& a, const BasicMatrix<T>& b) {
  return map_zip(a, b, [](T x, T y) { return x * y; });
}

/// alpha * x + y
template <typename T>
BasicMatrix<T> axpy(T alpha, const BasicMatrix<T>& x, const BasicMatrix<T>& y) {
  return map_zip(x, y, [alpha](T u, T v) { return alpha * u + v; });
}

template <typename T>
BasicMatrix<T> scale(T alpha, const BasicMatrix<T>& a) {
  return map(a, [alpha](T x) { return alpha * x; });
}

template <typename T>
T sum(const BasicMatrix<T>& a);

template <typename T>
T mean(const BasicMatrix<T>& a);

/// Per row, the smallest column index attaining the row maximum.
template <typename T>
std::vector<std::size_t> argmax_rows(const BasicMatrix<T>& a);

/// Sum over rows, giving a 1 x cols matrix.
template <typename T>
BasicMatrix<T> column_sums(const BasicMatrix<T>& a);

template <typename T>
bool all_finite(const BasicMatrix<T>& a) noexcept;

}  // namespace nsn
