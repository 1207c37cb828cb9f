#include "btpp/numerics.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>

namespace btpp {

DenseMatrix::DenseMatrix(std::size_t rows, std::size_t cols, double fill)
    : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

DenseMatrix DenseMatrix::identity(std::size_t n) {
  DenseMatrix m(n, n);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

DenseMatrix DenseMatrix::replicate(std::size_t rows, std::span<const double> row) {
  DenseMatrix m(rows, row.size());
  for (std::size_t r = 0; r < rows; ++r) std::copy(row.begin(), row.end(), m.row(r).begin());
  return m;
}

bool DenseMatrix::all_finite() const {
  return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

double frobenius_norm_sq(const DenseMatrix& m) { return norm_sq(m.data()); }

double norm_sq(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return s;
}

double dot(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw std::invalid_argument("dot: length mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

DenseMatrix multiply(const DenseMatrix& a, const DenseMatrix& b) {
  if (a.cols() != b.rows()) throw std::invalid_argument("multiply: inner dimension mismatch");
  DenseMatrix out(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    for (std::size_t j = 0; j < b.cols(); ++j) {
      double s = 0.0;
      for (std::size_t k = 0; k < a.cols(); ++k) s += a(i, k) * b(k, j);
      out(i, j) = s;
    }
  }
  return out;
}

DenseMatrix transpose(const DenseMatrix& m) {
  DenseMatrix out(m.cols(), m.rows());
  for (std::size_t i = 0; i < m.rows(); ++i)
    for (std::size_t j = 0; j < m.cols(); ++j) out(j, i) = m(i, j);
  return out;
}

DenseMatrix subtract(const DenseMatrix& a, const DenseMatrix& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols())
    throw std::invalid_argument("subtract: shape mismatch");
  DenseMatrix out(a.rows(), a.cols());
  auto ad = a.data();
  auto bd = b.data();
  auto od = out.data();
  for (std::size_t i = 0; i < od.size(); ++i) od[i] = ad[i] - bd[i];
  return out;
}

Vector column_sums(const DenseMatrix& m) {
  Vector s(m.cols(), 0.0);
  for (std::size_t r = 0; r < m.rows(); ++r) {
    auto row = m.row(r);
    for (std::size_t c = 0; c < m.cols(); ++c) s[c] += row[c];
  }
  return s;
}

namespace {

constexpr std::uint64_t splitmix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

}  // namespace

RngStream::RngStream(std::uint64_t root_seed, std::uint64_t agent, StreamPurpose purpose,
                     std::uint64_t epoch)
    : root_seed_(root_seed), agent_(agent), purpose_(purpose), epoch_(epoch) {
  std::uint64_t k = splitmix64(root_seed);
  k = splitmix64(k ^ agent);
  k = splitmix64(k ^ static_cast<std::uint64_t>(purpose));
  k = splitmix64(k ^ epoch);
  key_ = k;
}

RngStream::result_type RngStream::operator()() {
  // Two rounds so that neighbouring counters under neighbouring keys do not
  // collide through the additive structure of a single splitmix step.
  return splitmix64(splitmix64(key_ + 0x632be59bd9b4e019ULL * ++counter_) ^ key_);
}

Vector gaussian_vector(RngStream& stream, std::size_t dim, double mean, double stddev) {
  if (!(stddev >= 0.0)) throw std::invalid_argument("gaussian_vector: stddev must be >= 0");
  Vector v(dim, mean);
  if (stddev == 0.0) return v;
  std::normal_distribution<double> dist(mean, stddev);
  for (auto& x : v) x = dist(stream);
  return v;
}

}  // namespace btpp
