#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "btpp/mixing_matrix.hpp"
#include "btpp/numerics.hpp"
#include "btpp/problems.hpp"
#include "btpp/topology.hpp"

namespace btpp {

/// Stacked per-agent state; row i belongs to tree node i+1.
struct AlgorithmState {
  DenseMatrix x;       ///< iterates
  DenseMatrix y;       ///< gradient trackers (BTPP); last gradients for the baselines
  DenseMatrix g_prev;  ///< stochastic gradients drawn at the current iterates
  std::size_t t = 0;
};

/// Raised when an update produces a non-finite value.
class DivergenceError : public std::runtime_error {
 public:
  DivergenceError(std::size_t node, std::size_t iteration)
      : std::runtime_error("divergence: non-finite value at node " + std::to_string(node) +
                           " in iteration " + std::to_string(iteration)),
        node_(node),
        iteration_(iteration) {}
  std::size_t node() const { return node_; }
  std::size_t iteration() const { return iteration_; }

 private:
  std::size_t node_;
  std::size_t iteration_;
};

/// The oracle stream of agent `agent` (0-based) at iteration `iteration`.
/// Every agent consumes exactly one stream per iteration.
inline RngStream oracle_stream(std::uint64_t seed, std::size_t agent, std::size_t iteration) {
  return RngStream(seed, agent, StreamPurpose::oracle, iteration);
}

/// Row i is g_i(x_i, ξ_i^(iteration)).
DenseMatrix draw_gradients(const Problem& problem, const DenseMatrix& x, std::uint64_t seed,
                           std::size_t iteration);

/// Pull and push matrices of one tree, built once per run.
struct TreeOperators {
  explicit TreeOperators(BAryTree t) : tree(std::move(t)), pull(pull_matrix(tree)), push(push_matrix(tree)) {}
  BAryTree tree;
  MixingMatrix pull;
  MixingMatrix push;
};

/// X = 1 x0ᵀ, Y = G = G(X, ξ^(0)), t = 0.
AlgorithmState btpp_init(const Problem& problem, std::span<const double> x0, std::uint64_t seed);

/// X ← R(X - γY); G_new = G(X, ξ^(t+1)); Y ← CY + G_new - G_prev; t ← t+1.
AlgorithmState btpp_step(const Problem& problem, const AlgorithmState& state, const TreeOperators& ops,
                         double gamma, std::uint64_t seed);

/// X = 1 x0ᵀ, Y = G = 0. Shared by both baselines, which draw at the current iterate.
AlgorithmState baseline_init(const Problem& problem, std::span<const double> x0);

/// x ← x - γ (1/n) Σ_i g_i(x, ξ_i^(t)); the shared iterate is replicated over all rows.
AlgorithmState centralized_sgd_step(const Problem& problem, const AlgorithmState& state, double gamma,
                                    std::uint64_t seed);

/// Symmetric doubly stochastic ring weights: each node averages itself and its
/// two ring neighbours with weight 1/3. n = 2 uses 1/2 each, n = 1 is [1].
class RingWeights {
 public:
  explicit RingWeights(std::size_t n);
  std::size_t size() const { return rows_.size(); }
  /// (column, weight) pairs, ascending column.
  const std::vector<std::pair<std::size_t, double>>& row(std::size_t r) const { return rows_.at(r); }
  /// Distinct neighbours of a node, excluding itself.
  std::size_t degree() const;
  DenseMatrix to_dense() const;
  DenseMatrix apply(const DenseMatrix& x) const;

 private:
  std::vector<std::vector<std::pair<std::size_t, double>>> rows_;
};

/// X ← W(X - γ G(X, ξ^(t))).
AlgorithmState dsgd_ring_step(const Problem& problem, const AlgorithmState& state, const RingWeights& weights,
                              double gamma, std::uint64_t seed);

enum class ScheduleKind { constant, theorem1, theorem2, decayed };

std::string to_string(ScheduleKind kind);
std::optional<ScheduleKind> parse_schedule_kind(std::string_view s);

/// Inputs to the closed-form theorem stepsizes. Never estimated implicitly.
struct TheoremConstants {
  std::optional<double> delta_f;           ///< f(x_1^(0)) - f*
  std::optional<double> sigma_sq;          ///< σ²
  std::optional<double> smoothness;        ///< L
  std::optional<double> strong_convexity;  ///< μ
  std::optional<std::size_t> agents;       ///< n
  std::optional<std::size_t> diameter;     ///< d
  std::optional<std::size_t> horizon;      ///< T
};

struct StepSizeSchedule {
  ScheduleKind kind = ScheduleKind::constant;
  double base = 0.0;
  bool rescale_by_n = false;
  std::size_t agents = 1;  ///< divisor when rescale_by_n is set
  double decay_factor = 1.0;
  std::size_t decay_interval = 1;
  TheoremConstants theorem;
};

/// γ = min{ (Δ/(3σ²Ln(T+1)))^½, (Δ/(1500 n² d⁶ σ² L² (T+1)))^⅓, 1/(100 n d³ L) }.
/// Terms with a zero denominator are dropped; throws if none remain.
double theorem1_stepsize(double delta_f, double sigma_sq, double smoothness, std::size_t n, std::size_t d,
                         std::size_t horizon);
/// γ = min{ 1/(100 n d² κ L), 16 ln(n(T+1)²)/(n(T+1)μ) }, requires T >= 2d.
double theorem2_stepsize(double smoothness, double strong_convexity, std::size_t n, std::size_t d,
                         std::size_t horizon);

/// Throws std::invalid_argument on missing theorem constants or a non-positive result.
double effective_stepsize(const StepSizeSchedule& schedule, std::size_t t);

}  // namespace btpp
