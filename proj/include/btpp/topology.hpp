#pragma once

#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "btpp/mixing_matrix.hpp"
#include "btpp/numerics.hpp"

namespace btpp {

/// Layer-filled B-ary spanning tree rooted at node 1.
///
/// Node labels are 1-based throughout this class, matching the layer-by-layer
/// numbering: the children of node j are B(j-1)+2 .. Bj+1 (clipped to n), so
/// the parent of node i >= 2 is (i-2)/B + 1. Node 1 is its own parent. Row and
/// column indices of matrices built from a tree are the zero-based labels i-1.
class BAryTree {
 public:
  std::size_t size() const { return n_; }
  std::size_t branch() const { return branch_; }
  /// Hop distance from the deepest node to node 1.
  std::size_t diameter() const { return diameter_; }

  std::size_t parent(std::size_t node) const { return parent_.at(node - 1); }
  /// Children in ascending label order.
  const std::vector<std::size_t>& children(std::size_t node) const { return children_.at(node - 1); }
  /// Number of parent hops from `node` to node 1.
  std::size_t depth(std::size_t node) const;

  friend BAryTree build_bary_tree(std::size_t n, std::size_t branch);

 private:
  BAryTree() = default;

  std::size_t n_ = 0;
  std::size_t branch_ = 0;
  std::size_t diameter_ = 0;
  std::vector<std::size_t> parent_;
  std::vector<std::vector<std::size_t>> children_;
};

/// Throws std::invalid_argument for n < 1 or branch < 2.
BAryTree build_bary_tree(std::size_t n, std::size_t branch);

/// (B^(k+1) - 1) / (B - 1), the number of nodes in layers 0..k of a full tree.
/// Saturates instead of overflowing.
std::uint64_t full_tree_size(std::size_t branch, std::size_t k);

/// The row range of column i of R^k (1-based, inclusive). Empty when first > last.
struct LayerIndexSet {
  std::size_t column;
  std::size_t power;
  std::size_t first;
  std::size_t last;

  bool empty() const { return first > last; }
  std::size_t count() const { return empty() ? 0 : last - first + 1; }
};

LayerIndexSet layer_index_set(const BAryTree& tree, std::size_t column, std::size_t k);

/// R: row i has a single one at the parent of i (node 1 at itself).
MixingMatrix pull_matrix(const BAryTree& tree);
/// C = Rᵀ.
MixingMatrix push_matrix(const BAryTree& tree);

/// R^k assembled column by column from layer_index_set; k >= 1.
MixingMatrix closed_form_power(const BAryTree& tree, std::size_t k);

/// u = (n, 0, ..., 0), the left eigenvector of R for eigenvalue 1 with uᵀ1 = n.
Vector left_eigenvector_u(const BAryTree& tree);

/// (1/n) 1 uᵀ as a dense matrix: first column all ones, the rest zero.
DenseMatrix consensus_outer(std::size_t n);

/// Π_u X = X - (1/n) 1 uᵀ X, i.e. every row minus row 1.
DenseMatrix consensus_projection(const DenseMatrix& x, const BAryTree& tree);

class NonConvergenceError : public std::runtime_error {
 public:
  NonConvergenceError(const std::string& what, double last_estimate)
      : std::runtime_error(what), last_estimate_(last_estimate) {}
  double last_estimate() const { return last_estimate_; }

 private:
  double last_estimate_;
};

struct PowerIterationOptions {
  std::size_t max_iterations = 200000;
  /// Iterations with a Rayleigh quotient below tolerance before restarting.
  std::size_t stall_window = 50;
  /// Seed for the restart vector; callers pass something derived from (n, B, k).
  std::uint64_t restart_seed = 0;
};

/// ‖M‖₂ by power iteration on MᵀM, starting from the all-ones vector.
/// Converged when the Rayleigh quotient changes by at most tol relative.
double spectral_norm(const DenseMatrix& m, double tol, const PowerIterationOptions& options = {});

}  // namespace btpp
