#pragma once

#include <cstddef>
#include <cstdint>
#include <utility>
#include <vector>

#include "btpp/numerics.hpp"

namespace btpp {

enum class Stochasticity { row, column, none };

/// Square dense integer matrix, used where equality must be exact.
class IntMatrix {
 public:
  IntMatrix() = default;
  explicit IntMatrix(std::size_t n) : n_(n), data_(n * n, 0) {}

  std::size_t size() const { return n_; }
  std::int64_t& operator()(std::size_t r, std::size_t c) { return data_[r * n_ + c]; }
  std::int64_t operator()(std::size_t r, std::size_t c) const { return data_[r * n_ + c]; }

  IntMatrix operator*(const IntMatrix& rhs) const;
  bool operator==(const IntMatrix&) const = default;

  DenseMatrix to_dense() const;

 private:
  std::size_t n_ = 0;
  std::vector<std::int64_t> data_;
};

/// Sparse n x n matrix whose stored entries are all exactly 1. Indices are
/// zero-based; row r lists its nonzero columns in ascending order.
class MixingMatrix {
 public:
  MixingMatrix(std::size_t n, std::vector<std::vector<std::size_t>> row_cols, Stochasticity tag);

  static MixingMatrix identity(std::size_t n);

  std::size_t size() const { return n_; }
  Stochasticity stochasticity() const { return tag_; }
  const std::vector<std::size_t>& row(std::size_t r) const { return rows_[r]; }
  bool contains(std::size_t r, std::size_t c) const;
  std::size_t nonzeros() const;

  /// All (row, col) positions, row-major.
  std::vector<std::pair<std::size_t, std::size_t>> entries() const;

  MixingMatrix transposed(Stochasticity tag) const;
  IntMatrix to_int() const;
  DenseMatrix to_dense() const;

  /// Flip one entry. Only used to check that verification catches a corrupted
  /// matrix; the result keeps the original tag and may violate it.
  MixingMatrix with_entry_flipped(std::size_t r, std::size_t c) const;

  bool operator==(const MixingMatrix& other) const {
    return n_ == other.n_ && rows_ == other.rows_;
  }

 private:
  std::size_t n_;
  std::vector<std::vector<std::size_t>> rows_;
  Stochasticity tag_;
};

/// out = M X. Each output row is the sum of the selected input rows, added to
/// an accumulator that starts at zero, in ascending source-row order.
DenseMatrix sparse_apply(const MixingMatrix& m, const DenseMatrix& x);

bool is_row_stochastic(const IntMatrix& m);
bool is_column_stochastic(const IntMatrix& m);

}  // namespace btpp
