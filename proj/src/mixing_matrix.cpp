#include "btpp/mixing_matrix.hpp"

#include <algorithm>
#include <stdexcept>
#include <string>

namespace btpp {

IntMatrix IntMatrix::operator*(const IntMatrix& rhs) const {
  if (n_ != rhs.n_) throw std::invalid_argument("IntMatrix: dimension mismatch");
  IntMatrix out(n_);
  for (std::size_t i = 0; i < n_; ++i)
    for (std::size_t k = 0; k < n_; ++k) {
      const auto a = (*this)(i, k);
      if (a == 0) continue;
      for (std::size_t j = 0; j < n_; ++j) out(i, j) += a * rhs(k, j);
    }
  return out;
}

DenseMatrix IntMatrix::to_dense() const {
  DenseMatrix m(n_, n_);
  for (std::size_t i = 0; i < n_; ++i)
    for (std::size_t j = 0; j < n_; ++j) m(i, j) = static_cast<double>((*this)(i, j));
  return m;
}

MixingMatrix::MixingMatrix(std::size_t n, std::vector<std::vector<std::size_t>> row_cols,
                           Stochasticity tag)
    : n_(n), rows_(std::move(row_cols)), tag_(tag) {
  if (rows_.size() != n_) throw std::invalid_argument("MixingMatrix: expected one column list per row");
  for (auto& cols : rows_) {
    std::sort(cols.begin(), cols.end());
    if (std::adjacent_find(cols.begin(), cols.end()) != cols.end())
      throw std::invalid_argument("MixingMatrix: duplicate entry");
    if (!cols.empty() && cols.back() >= n_)
      throw std::invalid_argument("MixingMatrix: column index out of range");
  }
}

MixingMatrix MixingMatrix::identity(std::size_t n) {
  std::vector<std::vector<std::size_t>> rows(n);
  for (std::size_t i = 0; i < n; ++i) rows[i] = {i};
  return {n, std::move(rows), Stochasticity::row};
}

bool MixingMatrix::contains(std::size_t r, std::size_t c) const {
  const auto& cols = rows_.at(r);
  return std::binary_search(cols.begin(), cols.end(), c);
}

std::size_t MixingMatrix::nonzeros() const {
  std::size_t s = 0;
  for (const auto& cols : rows_) s += cols.size();
  return s;
}

std::vector<std::pair<std::size_t, std::size_t>> MixingMatrix::entries() const {
  std::vector<std::pair<std::size_t, std::size_t>> out;
  out.reserve(nonzeros());
  for (std::size_t r = 0; r < n_; ++r)
    for (auto c : rows_[r]) out.emplace_back(r, c);
  return out;
}

MixingMatrix MixingMatrix::transposed(Stochasticity tag) const {
  std::vector<std::vector<std::size_t>> cols(n_);
  for (std::size_t r = 0; r < n_; ++r)
    for (auto c : rows_[r]) cols[c].push_back(r);
  return {n_, std::move(cols), tag};
}

IntMatrix MixingMatrix::to_int() const {
  IntMatrix m(n_);
  for (std::size_t r = 0; r < n_; ++r)
    for (auto c : rows_[r]) m(r, c) = 1;
  return m;
}

DenseMatrix MixingMatrix::to_dense() const { return to_int().to_dense(); }

MixingMatrix MixingMatrix::with_entry_flipped(std::size_t r, std::size_t c) const {
  auto rows = rows_;
  auto& cols = rows.at(r);
  auto it = std::lower_bound(cols.begin(), cols.end(), c);
  if (it != cols.end() && *it == c)
    cols.erase(it);
  else
    cols.insert(it, c);
  return {n_, std::move(rows), tag_};
}

DenseMatrix sparse_apply(const MixingMatrix& m, const DenseMatrix& x) {
  if (m.size() != x.rows())
    throw std::invalid_argument("sparse_apply: matrix is " + std::to_string(m.size()) +
                                "x" + std::to_string(m.size()) + " but operand has " +
                                std::to_string(x.rows()) + " rows");
  DenseMatrix out(x.rows(), x.cols(), 0.0);
  for (std::size_t r = 0; r < m.size(); ++r) {
    auto dst = out.row(r);
    for (auto src : m.row(r)) {
      auto in = x.row(src);
      for (std::size_t c = 0; c < dst.size(); ++c) dst[c] += in[c];
    }
  }
  return out;
}

bool is_row_stochastic(const IntMatrix& m) {
  for (std::size_t i = 0; i < m.size(); ++i) {
    std::int64_t s = 0;
    for (std::size_t j = 0; j < m.size(); ++j) {
      if (m(i, j) != 0 && m(i, j) != 1) return false;
      s += m(i, j);
    }
    if (s != 1) return false;
  }
  return true;
}

bool is_column_stochastic(const IntMatrix& m) {
  for (std::size_t j = 0; j < m.size(); ++j) {
    std::int64_t s = 0;
    for (std::size_t i = 0; i < m.size(); ++i) {
      if (m(i, j) != 0 && m(i, j) != 1) return false;
      s += m(i, j);
    }
    if (s != 1) return false;
  }
  return true;
}

}  // namespace btpp
