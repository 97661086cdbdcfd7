#include "nsn/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <sstream>

namespace nsn {

template <typename T>
BasicMatrix<T>::BasicMatrix(std::size_t rows, std::size_t cols, std::vector<T> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
  if (data_.size() != rows * cols) {
    std::ostringstream msg;
    msg << "matrix data length " << data_.size() << " does not match shape [" << rows << "x" << cols
        << "]";
    throw ShapeError(msg.str());
  }
}

template <typename T>
BasicMatrix<T>::BasicMatrix(std::initializer_list<std::initializer_list<T>> rows) {
  rows_ = rows.size();
  cols_ = rows_ == 0 ? 0 : rows.begin()->size();
  data_.reserve(rows_ * cols_);
  for (const auto& r : rows) {
    if (r.size() != cols_) throw ShapeError("ragged initializer list for matrix");
    data_.insert(data_.end(), r.begin(), r.end());
  }
}

template <typename T>
BasicMatrix<T> BasicMatrix<T>::identity(std::size_t n) {
  BasicMatrix out(n, n);
  for (std::size_t i = 0; i < n; ++i) out(i, i) = T{1};
  return out;
}

template <typename T>
std::string BasicMatrix<T>::shape_string() const {
  return "[" + std::to_string(rows_) + "x" + std::to_string(cols_) + "]";
}

template <typename T>
void BasicMatrix<T>::fill(T value) {
  std::fill(data_.begin(), data_.end(), value);
}

template <typename T>
bool BasicMatrix<T>::bitwise_equal(const BasicMatrix& other) const noexcept {
  return same_shape(other) &&
         (data_.empty() || std::memcmp(data_.data(), other.data_.data(), data_.size() * sizeof(T)) == 0);
}

template <typename T>
void require_same_shape(const BasicMatrix<T>& a, const BasicMatrix<T>& b, const char* what) {
  if (!a.same_shape(b)) {
    throw ShapeError(std::string(what) + ": shape mismatch " + a.shape_string() + " vs " +
                     b.shape_string());
  }
}

namespace {

// Register tile: kRows rows of the output by kCols columns. The k loop is the
// outermost loop inside a tile so every output element sees a_0*b_0, a_1*b_1,
// ... in order; blocking only changes which elements are in flight.
template <typename T>
struct Tile {
  static constexpr std::size_t kRows = 8;
  static constexpr std::size_t kCols = 192 / sizeof(T);
};

template <typename T>
void tile_kernel(const T* a, std::size_t lda, const T* b, std::size_t ldb, T* c, std::size_t ldc,
                 std::size_t k_len) {
  constexpr std::size_t R = Tile<T>::kRows;
  constexpr std::size_t C = Tile<T>::kCols;
  T acc[R][C];
  for (std::size_t r = 0; r < R; ++r)
    for (std::size_t j = 0; j < C; ++j) acc[r][j] = c[r * ldc + j];
  for (std::size_t k = 0; k < k_len; ++k) {
    const T* brow = b + k * ldb;
    for (std::size_t r = 0; r < R; ++r) {
      const T av = a[r * lda + k];
      for (std::size_t j = 0; j < C; ++j) acc[r][j] += av * brow[j];
    }
  }
  for (std::size_t r = 0; r < R; ++r)
    for (std::size_t j = 0; j < C; ++j) c[r * ldc + j] = acc[r][j];
}

// Same accumulation order as tile_kernel for ragged edges.
template <typename T>
void edge_kernel(const T* a, std::size_t lda, const T* b, std::size_t ldb, T* c, std::size_t ldc,
                 std::size_t rows, std::size_t cols, std::size_t k_len) {
  for (std::size_t r = 0; r < rows; ++r) {
    T* crow = c + r * ldc;
    for (std::size_t k = 0; k < k_len; ++k) {
      const T av = a[r * lda + k];
      const T* brow = b + k * ldb;
      for (std::size_t j = 0; j < cols; ++j) crow[j] += av * brow[j];
    }
  }
}

}  // namespace

template <typename T>
BasicMatrix<T> matmul(const BasicMatrix<T>& a, const BasicMatrix<T>& b) {
  if (a.cols() != b.rows()) {
    throw ShapeError("matmul: inner dimensions differ, " + a.shape_string() + " x " +
                     b.shape_string());
  }
  const std::size_t m = a.rows();
  const std::size_t n = b.cols();
  const std::size_t kdim = a.cols();
  BasicMatrix<T> out(m, n);
  constexpr std::size_t R = Tile<T>::kRows;
  constexpr std::size_t C = Tile<T>::kCols;
  // k is split into ascending blocks; partial sums live in `out` between blocks.
  constexpr std::size_t kBlock = 256;
  const T* pa = a.data();
  const T* pb = b.data();
  T* pc = out.data();
  const std::size_t m_full = m - m % R;
  const std::size_t n_full = n - n % C;
  for (std::size_t k0 = 0; k0 < kdim; k0 += kBlock) {
    const std::size_t k_len = std::min(kBlock, kdim - k0);
    for (std::size_t j0 = 0; j0 < n_full; j0 += C) {
      for (std::size_t i0 = 0; i0 < m_full; i0 += R) {
        tile_kernel(pa + i0 * kdim + k0, kdim, pb + k0 * n + j0, n, pc + i0 * n + j0, n, k_len);
      }
      if (m_full < m) {
        edge_kernel(pa + m_full * kdim + k0, kdim, pb + k0 * n + j0, n, pc + m_full * n + j0, n,
                    m - m_full, C, k_len);
      }
    }
    if (n_full < n) {
      edge_kernel(pa + k0, kdim, pb + k0 * n + n_full, n, pc + n_full, n, m, n - n_full, k_len);
    }
  }
  return out;
}

template <typename T>
BasicMatrix<T> transpose(const BasicMatrix<T>& a) {
  BasicMatrix<T> out(a.cols(), a.rows());
  constexpr std::size_t B = 32;
  for (std::size_t i0 = 0; i0 < a.rows(); i0 += B) {
    for (std::size_t j0 = 0; j0 < a.cols(); j0 += B) {
      const std::size_t i1 = std::min(i0 + B, a.rows());
      const std::size_t j1 = std::min(j0 + B, a.cols());
      for (std::size_t i = i0; i < i1; ++i)
        for (std::size_t j = j0; j < j1; ++j) out(j, i) = a(i, j);
    }
  }
  return out;
}

template <typename T>
T sum(const BasicMatrix<T>& a) {
  if (a.empty()) throw ShapeError("sum: empty matrix " + a.shape_string());
  T total{0};
  for (T v : a.values()) total += v;
  return total;
}

template <typename T>
T mean(const BasicMatrix<T>& a) {
  return sum(a) / static_cast<T>(a.size());
}

template <typename T>
std::vector<std::size_t> argmax_rows(const BasicMatrix<T>& a) {
  if (a.empty()) throw ShapeError("argmax_rows: empty matrix " + a.shape_string());
  std::vector<std::size_t> idx(a.rows());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    auto r = a.row(i);
    std::size_t best = 0;
    for (std::size_t j = 1; j < r.size(); ++j)
      if (r[j] > r[best]) best = j;
    idx[i] = best;
  }
  return idx;
}

template <typename T>
BasicMatrix<T> column_sums(const BasicMatrix<T>& a) {
  BasicMatrix<T> out(1, a.cols());
  T* po = out.data();
  for (std::size_t i = 0; i < a.rows(); ++i) {
    const T* r = a.data() + i * a.cols();
    for (std::size_t j = 0; j < a.cols(); ++j) po[j] += r[j];
  }
  return out;
}

template <typename T>
bool all_finite(const BasicMatrix<T>& a) noexcept {
  return std::all_of(a.values().begin(), a.values().end(), [](T v) { return std::isfinite(v); });
}

#define NSN_INSTANTIATE(T)                                                                     \
  template class BasicMatrix<T>;                                                               \
  template void require_same_shape(const BasicMatrix<T>&, const BasicMatrix<T>&, const char*); \
  template BasicMatrix<T> matmul(const BasicMatrix<T>&, const BasicMatrix<T>&);                \
  template BasicMatrix<T> transpose(const BasicMatrix<T>&);                                    \
  template T sum(const BasicMatrix<T>&);                                                       \
  template T mean(const BasicMatrix<T>&);                                                      \
  template std::vector<std::size_t> argmax_rows(const BasicMatrix<T>&);                        \
  template BasicMatrix<T> column_sums(const BasicMatrix<T>&);                                  \
  template bool all_finite(const BasicMatrix<T>&) noexcept;

NSN_INSTANTIATE(float)
NSN_INSTANTIATE(double)

#undef NSN_INSTANTIATE

}  // namespace nsn
