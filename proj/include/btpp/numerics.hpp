#pragma once

#include <cstddef>
#include <cstdint>
#include <limits>
#include <span>
#include <vector>

namespace btpp {

using Vector = std::vector<double>;

/// Row-major dense matrix. Row i holds the local vector of agent i when used
/// as a stacked iterate (X, Y or G).
class DenseMatrix {
 public:
  DenseMatrix() = default;
  DenseMatrix(std::size_t rows, std::size_t cols, double fill = 0.0);

  static DenseMatrix identity(std::size_t n);
  /// Every row equal to `row`.
  static DenseMatrix replicate(std::size_t rows, std::span<const double> row);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }

  std::span<const double> data() const { return data_; }
  std::span<double> data() { return data_; }

  bool all_finite() const;

  bool operator==(const DenseMatrix&) const = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

double frobenius_norm_sq(const DenseMatrix& m);
double norm_sq(std::span<const double> v);
double dot(std::span<const double> a, std::span<const double> b);

/// Plain triple-loop product, summing over the inner index in ascending order.
DenseMatrix multiply(const DenseMatrix& a, const DenseMatrix& b);
DenseMatrix transpose(const DenseMatrix& m);
DenseMatrix subtract(const DenseMatrix& a, const DenseMatrix& b);

/// Sum of each column, accumulated in ascending row order (1ᵀM).
Vector column_sums(const DenseMatrix& m);

/// Purpose tags keep streams for different uses of the same agent disjoint.
enum class StreamPurpose : std::uint32_t {
  oracle = 1,
  data = 2,
  model = 3,
  probe = 4,
};

/// Counter-based generator: the n-th output is a keyed hash of n, so a stream is
/// fully determined by (root_seed, agent, purpose, epoch) and can be rebuilt
/// anywhere without shared state. Satisfies UniformRandomBitGenerator, so the
/// <random> distributions work on top of it.
class RngStream {
 public:
  using result_type = std::uint64_t;

  RngStream(std::uint64_t root_seed, std::uint64_t agent, StreamPurpose purpose,
            std::uint64_t epoch = 0);

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }
  result_type operator()();

  std::uint64_t root_seed() const { return root_seed_; }
  std::uint64_t agent() const { return agent_; }
  StreamPurpose purpose() const { return purpose_; }
  std::uint64_t epoch() const { return epoch_; }
  std::uint64_t counter() const { return counter_; }

 private:
  std::uint64_t root_seed_;
  std::uint64_t agent_;
  StreamPurpose purpose_;
  std::uint64_t epoch_;
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

Vector gaussian_vector(RngStream& stream, std::size_t dim, double mean, double stddev);

}  // namespace btpp
