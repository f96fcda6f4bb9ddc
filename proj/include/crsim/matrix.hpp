#pragma once

#include <algorithm>
#include <cassert>
#include <cstddef>
#include <span>
#include <vector>

namespace crsim {

/// Dense row-major matrix. Only what the allocator needs.
template <typename T>
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, T fill = T{})
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  bool empty() const noexcept { return data_.empty(); }

  T& operator()(std::size_t r, std::size_t c) {
    assert(r < rows_ && c < cols_);
    return data_[r * cols_ + c];
  }
  const T& operator()(std::size_t r, std::size_t c) const {
    assert(r < rows_ && c < cols_);
    return data_[r * cols_ + c];
  }

  std::span<T> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const T> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }

  std::span<const T> values() const noexcept { return data_; }
  void fill(const T& v) { std::fill(data_.begin(), data_.end(), v); }

  friend bool operator==(const Matrix&, const Matrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<T> data_;
};

/// Binary pairing matrix q; q(i, j) = 1 pairs SU subcarrier i with relay subcarrier j.
using PairingMatrix = Matrix<unsigned char>;

inline PairingMatrix identity_pairing(std::size_t n) {
  PairingMatrix q(n, n, 0);
  for (std::size_t i = 0; i < n; ++i) q(i, i) = 1;
  return q;
}

inline bool is_permutation(const PairingMatrix& q) {
  if (q.rows() != q.cols()) return false;
  const std::size_t n = q.rows();
  std::vector<int> col(n, 0);
  for (std::size_t i = 0; i < n; ++i) {
    int row_sum = 0;
    for (std::size_t j = 0; j < n; ++j) {
      if (q(i, j) > 1) return false;
      row_sum += q(i, j);
      col[j] += q(i, j);
    }
    if (row_sum != 1) return false;
  }
  for (int c : col)
    if (c != 1) return false;
  return true;
}

/// Partner column of each row; -1 when the row has no entry. Assumes at most one 1 per row.
inline std::vector<int> partners(const PairingMatrix& q) {
  std::vector<int> out(q.rows(), -1);
  for (std::size_t i = 0; i < q.rows(); ++i)
    for (std::size_t j = 0; j < q.cols(); ++j)
      if (q(i, j)) out[i] = static_cast<int>(j);
  return out;
}

inline PairingMatrix pairing_from_permutation(std::span<const int> perm) {
  PairingMatrix q(perm.size(), perm.size(), 0);
  for (std::size_t i = 0; i < perm.size(); ++i) q(i, static_cast<std::size_t>(perm[i])) = 1;
  return q;
}

}  // namespace crsim
