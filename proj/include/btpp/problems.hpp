#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "btpp/numerics.hpp"

namespace btpp {

/// Constants of the oracle model: each ∇f_i is L-Lipschitz, f is μ-strongly
/// convex (μ = 0 for the nonconvex regime), and the stochastic gradient noise
/// has second moment at most σ².
struct OracleSpec {
  std::size_t dim = 0;
  std::size_t agents = 0;
  double smoothness = 0.0;
  double strong_convexity = 0.0;
  double noise_bound = 0.0;

  std::optional<double> condition_number() const {
    if (strong_convexity <= 0.0) return std::nullopt;
    return smoothness / strong_convexity;
  }
};

/// f(x) = (1/n) Σ f_i(x). Agents are indexed 0..n-1 here; agent i is tree node i+1.
///
/// Implementations are immutable after construction. The stochastic oracle is
/// pure given the caller-owned stream, so calls for different agents may run
/// concurrently.
class Problem {
 public:
  virtual ~Problem() = default;

  virtual std::size_t agents() const = 0;
  virtual std::size_t dim() const = 0;

  virtual double local_objective(std::size_t agent, std::span<const double> x) const = 0;
  virtual Vector local_gradient(std::size_t agent, std::span<const double> x) const = 0;
  /// One unbiased draw g_i(x, ξ_i) with ξ_i taken from `stream`.
  virtual Vector sample_gradient(std::size_t agent, std::span<const double> x, RngStream& stream) const = 0;

  /// Known minimizer of f, if any.
  virtual std::optional<Vector> minimizer() const { return std::nullopt; }
  virtual std::optional<double> optimal_value() const { return std::nullopt; }

  virtual std::string kind() const = 0;

  double objective(std::span<const double> x) const;
  /// ∇f(x), agents summed in ascending order then divided by n.
  Vector full_gradient(std::span<const double> x) const;

 protected:
  void check_point(std::size_t agent, std::span<const double> x) const;
};

struct LogisticShard {
  DenseMatrix features;             ///< J x p, row j is h_{i,j}
  std::vector<std::int8_t> labels;  ///< ±1
  Vector local_model;               ///< x̃_i = x̃ + v_i
};

struct LogisticParams {
  std::size_t agents = 16;
  std::size_t dim = 20;
  std::size_t samples = 100;  ///< J, per agent
  double sigma_h = 0.8;
  double reg_coeff = 0.01;
  std::size_t batch = 1;
};

/// f_i(x) = (1/J) Σ_j ln(1 + exp(-y_ij h_ijᵀx)) + R Σ_k x_k²/(1 + x_k²).
class LogisticProblem final : public Problem {
 public:
  LogisticProblem(LogisticParams params, Vector common_model, std::vector<LogisticShard> shards);

  std::size_t agents() const override { return shards_.size(); }
  std::size_t dim() const override { return params_.dim; }
  std::size_t samples() const { return params_.samples; }
  std::size_t batch() const { return params_.batch; }
  double reg_coeff() const { return params_.reg_coeff; }
  double sigma_h() const { return params_.sigma_h; }
  const LogisticParams& params() const { return params_; }
  const Vector& common_model() const { return common_model_; }
  const LogisticShard& shard(std::size_t agent) const { return shards_.at(agent); }

  double local_objective(std::size_t agent, std::span<const double> x) const override;
  Vector local_gradient(std::size_t agent, std::span<const double> x) const override;
  /// Minibatch of the configured size.
  Vector sample_gradient(std::size_t agent, std::span<const double> x, RngStream& stream) const override;
  std::string kind() const override { return "logistic"; }

  /// Minibatch of `batch` indices drawn uniformly with replacement, plus the
  /// full regularizer gradient. Throws unless 1 <= batch <= J.
  Vector stochastic_gradient(std::size_t agent, std::span<const double> x, std::size_t batch,
                             RngStream& stream) const;
  /// Gradient of sample j's loss plus the regularizer gradient.
  Vector sample_gradient_at(std::size_t agent, std::span<const double> x, std::size_t sample) const;
  /// The minibatch code path run over every index 0..J-1 once.
  Vector sweep_gradient(std::size_t agent, std::span<const double> x) const;

  Vector regularizer_gradient(std::span<const double> x) const;

  /// Mean of ‖g_ij - ∇f_i‖² over all J single-sample gradients at x.
  double empirical_noise(std::size_t agent, std::span<const double> x) const;
  /// Σ_i ‖x̃_i - x̃‖² / n.
  double model_dispersion() const;
  /// max_i λ_max(H_iᵀH_i)/(4J) + 2R, an upper bound on every local smoothness constant.
  double smoothness_bound() const;

 private:
  Vector loss_gradient(std::size_t agent, std::span<const double> x,
                       std::span<const std::size_t> indices) const;

  LogisticParams params_;
  Vector common_model_;
  std::vector<LogisticShard> shards_;
};

/// Draws x̃ ~ N(0, I), v_i ~ N(0, σ_h² I), h_ij ~ N(0, I), z_ij ~ U(0, 1) and
/// labels y_ij = +1 iff z_ij <= sigmoid(h_ijᵀ x̃_i). Deterministic in `seed`.
LogisticProblem generate_logistic(const LogisticParams& params, std::uint64_t seed);

struct QuadraticParams {
  std::size_t agents = 16;
  std::size_t dim = 10;
  double kappa = 4.0;
  double noise_sigma = 0.0;
};

/// f_i(x) = ½ xᵀA_i x - b_iᵀx with diagonal A_i.
class QuadraticProblem final : public Problem {
 public:
  QuadraticProblem(QuadraticParams params, std::vector<Vector> diagonals, std::vector<Vector> offsets);

  std::size_t agents() const override { return diagonals_.size(); }
  std::size_t dim() const override { return params_.dim; }
  const QuadraticParams& params() const { return params_; }
  const Vector& diagonal(std::size_t agent) const { return diagonals_.at(agent); }
  const Vector& offset(std::size_t agent) const { return offsets_.at(agent); }

  double local_objective(std::size_t agent, std::span<const double> x) const override;
  Vector local_gradient(std::size_t agent, std::span<const double> x) const override;
  /// Exact gradient plus N(0, noise_sigma² I).
  Vector sample_gradient(std::size_t agent, std::span<const double> x, RngStream& stream) const override;
  std::optional<Vector> minimizer() const override { return minimizer_; }
  std::optional<double> optimal_value() const override { return optimal_value_; }
  std::string kind() const override { return "quadratic"; }

  OracleSpec oracle_spec() const;
  /// ‖(1/n)ΣA_i x* - (1/n)Σb_i‖.
  double optimality_residual() const;

 private:
  QuadraticParams params_;
  std::vector<Vector> diagonals_;
  std::vector<Vector> offsets_;
  Vector minimizer_;
  double optimal_value_ = 0.0;
};

/// Diagonal entries drawn in [1, kappa]; coordinate 0 is pinned to 1 and the last
/// coordinate to kappa for every agent so that μ = 1 and L = kappa exactly.
/// b_i ~ N(0, I). Throws for kappa < 1.
QuadraticProblem generate_quadratic(const QuadraticParams& params, std::uint64_t seed);

/// Text container: a header line, "key value" scalar lines, then named blocks
/// of whitespace-separated numbers. Values round-trip exactly.
void save_problem(std::ostream& out, const Problem& problem);
std::unique_ptr<Problem> load_problem(std::istream& in);

}  // namespace btpp
