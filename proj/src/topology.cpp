#include "btpp/topology.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

namespace btpp {

namespace {

constexpr std::uint64_t kSaturated = std::numeric_limits<std::uint64_t>::max() / 4;

std::uint64_t sat_mul(std::uint64_t a, std::uint64_t b) {
  if (a == 0 || b == 0) return 0;
  if (a > kSaturated / b) return kSaturated;
  return a * b;
}

std::uint64_t sat_add(std::uint64_t a, std::uint64_t b) { return std::min(kSaturated, a + b); }

std::uint64_t sat_pow(std::uint64_t base, std::size_t exp) {
  std::uint64_t r = 1;
  for (std::size_t i = 0; i < exp && r < kSaturated; ++i) r = sat_mul(r, base);
  return r;
}

}  // namespace

std::uint64_t full_tree_size(std::size_t branch, std::size_t k) {
  std::uint64_t total = 0;
  std::uint64_t layer = 1;
  for (std::size_t i = 0; i <= k && total < kSaturated; ++i) {
    total = sat_add(total, layer);
    layer = sat_mul(layer, branch);
  }
  return total;
}

BAryTree build_bary_tree(std::size_t n, std::size_t branch) {
  if (n < 1) throw std::invalid_argument("build_bary_tree: need at least one node");
  if (branch < 2) throw std::invalid_argument("build_bary_tree: branch size must be >= 2, got " + std::to_string(branch));

  BAryTree t;
  t.n_ = n;
  t.branch_ = branch;
  t.parent_.resize(n);
  t.children_.resize(n);
  t.parent_[0] = 1;
  for (std::size_t i = 2; i <= n; ++i) {
    const std::size_t p = (i - 2) / branch + 1;
    t.parent_[i - 1] = p;
    t.children_[p - 1].push_back(i);
  }
  // Smallest d with n <= (B^(d+1) - 1)/(B - 1).
  std::size_t d = 0;
  while (full_tree_size(branch, d) < n) ++d;
  t.diameter_ = d;
  return t;
}

std::size_t BAryTree::depth(std::size_t node) const {
  std::size_t hops = 0;
  while (node != 1) {
    node = parent(node);
    ++hops;
  }
  return hops;
}

LayerIndexSet layer_index_set(const BAryTree& tree, std::size_t column, std::size_t k) {
  const std::uint64_t n = tree.size();
  const std::uint64_t head = full_tree_size(tree.branch(), k);
  if (column == 1) return {column, k, 1, static_cast<std::size_t>(std::min(head, n))};
  const std::uint64_t stride = sat_pow(tree.branch(), k);
  const std::uint64_t first = sat_add(sat_add(head, sat_mul(column - 2, stride)), 1);
  const std::uint64_t last = std::min(sat_add(head, sat_mul(column - 1, stride)), n);
  if (first > n) return {column, k, static_cast<std::size_t>(n + 1), static_cast<std::size_t>(n)};
  return {column, k, static_cast<std::size_t>(first), static_cast<std::size_t>(last)};
}

MixingMatrix pull_matrix(const BAryTree& tree) {
  std::vector<std::vector<std::size_t>> rows(tree.size());
  for (std::size_t i = 1; i <= tree.size(); ++i) rows[i - 1] = {tree.parent(i) - 1};
  return {tree.size(), std::move(rows), Stochasticity::row};
}

MixingMatrix push_matrix(const BAryTree& tree) {
  return pull_matrix(tree).transposed(Stochasticity::column);
}

MixingMatrix closed_form_power(const BAryTree& tree, std::size_t k) {
  if (k < 1) throw std::invalid_argument("closed_form_power: power must be >= 1");
  std::vector<std::vector<std::size_t>> rows(tree.size());
  for (std::size_t col = 1; col <= tree.size(); ++col) {
    const auto set = layer_index_set(tree, col, k);
    for (std::size_t r = set.first; r <= set.last; ++r) rows[r - 1].push_back(col - 1);
  }
  return {tree.size(), std::move(rows), Stochasticity::row};
}

Vector left_eigenvector_u(const BAryTree& tree) {
  Vector u(tree.size(), 0.0);
  u[0] = static_cast<double>(tree.size());
  return u;
}

DenseMatrix consensus_outer(std::size_t n) {
  DenseMatrix m(n, n);
  for (std::size_t i = 0; i < n; ++i) m(i, 0) = 1.0;
  return m;
}

DenseMatrix consensus_projection(const DenseMatrix& x, const BAryTree& tree) {
  if (x.rows() != tree.size())
    throw std::invalid_argument("consensus_projection: expected " + std::to_string(tree.size()) +
                                " rows, got " + std::to_string(x.rows()));
  DenseMatrix out(x.rows(), x.cols());
  const auto ref = x.row(0);
  for (std::size_t r = 0; r < x.rows(); ++r) {
    auto src = x.row(r);
    auto dst = out.row(r);
    for (std::size_t c = 0; c < x.cols(); ++c) dst[c] = src[c] - ref[c];
  }
  return out;
}

namespace {

// w = Mᵀ(M v)
Vector gram_apply(const DenseMatrix& m, const Vector& v) {
  Vector mv(m.rows(), 0.0);
  for (std::size_t i = 0; i < m.rows(); ++i) mv[i] = dot(m.row(i), v);
  Vector w(m.cols(), 0.0);
  for (std::size_t i = 0; i < m.rows(); ++i) {
    const auto row = m.row(i);
    for (std::size_t j = 0; j < m.cols(); ++j) w[j] += row[j] * mv[i];
  }
  return w;
}

void normalize(Vector& v) {
  const double s = std::sqrt(norm_sq(v));
  for (auto& x : v) x /= s;
}

}  // namespace

double spectral_norm(const DenseMatrix& m, double tol, const PowerIterationOptions& options) {
  if (m.rows() != m.cols()) throw std::invalid_argument("spectral_norm: matrix must be square");
  if (!(tol > 0.0)) throw std::invalid_argument("spectral_norm: tol must be positive");
  if (frobenius_norm_sq(m) == 0.0) return 0.0;

  Vector v(m.cols(), 1.0);
  normalize(v);
  bool restarted = false;
  std::size_t stalled = 0;
  double prev = -1.0;
  double lambda = 0.0;

  for (std::size_t it = 0; it < options.max_iterations; ++it) {
    Vector w = gram_apply(m, v);
    lambda = dot(v, w);
    const double wn = std::sqrt(norm_sq(w));

    if (lambda < tol) {
      if (++stalled >= options.stall_window) {
        if (restarted) return std::sqrt(std::max(lambda, 0.0));
        RngStream stream(options.restart_seed, 0, StreamPurpose::probe);
        v = gaussian_vector(stream, m.cols(), 0.0, 1.0);
        normalize(v);
        restarted = true;
        stalled = 0;
        prev = -1.0;
        continue;
      }
    } else {
      stalled = 0;
    }

    if (wn > 0.0) {
      for (std::size_t j = 0; j < v.size(); ++j) v[j] = w[j] / wn;
    }
    // A quotient below tolerance never counts as converged.
    if (stalled > 0) {
      prev = -1.0;
      continue;
    }
    if (prev >= 0.0 && std::abs(lambda - prev) <= tol * lambda) return std::sqrt(lambda);
    prev = lambda;
  }
  throw NonConvergenceError("spectral_norm: no convergence after " +
                                std::to_string(options.max_iterations) + " iterations",
                            std::sqrt(std::max(lambda, 0.0)));
}

}  // namespace btpp
