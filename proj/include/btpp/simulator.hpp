#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "btpp/algorithms.hpp"
#include "btpp/problems.hpp"
#include "btpp/topology.hpp"

namespace btpp {

enum class AlgorithmTag { btpp, centralized, dsgd_ring };
enum class Engine { matrix, message };

std::string to_string(AlgorithmTag tag);
std::string to_string(Engine engine);
std::optional<AlgorithmTag> parse_algorithm(std::string_view s);
std::optional<Engine> parse_engine(std::string_view s);

enum class ProblemKind { logistic, quadratic };

struct ProblemSpec {
  ProblemKind kind = ProblemKind::quadratic;
  LogisticParams logistic;
  QuadraticParams quadratic;

  std::size_t agents() const { return kind == ProblemKind::logistic ? logistic.agents : quadratic.agents; }
  void set_agents(std::size_t n) {
    logistic.agents = n;
    quadratic.agents = n;
  }
};

std::unique_ptr<Problem> make_problem(const ProblemSpec& spec, std::uint64_t seed);

struct RunConfig {
  AlgorithmTag algorithm = AlgorithmTag::btpp;
  ProblemSpec problem;
  std::size_t branch = 2;  ///< ignored by the baselines
  StepSizeSchedule schedule;
  std::size_t iterations = 100;
  std::uint64_t seed = 0;
  /// Data seed; the run seed is used when unset.
  std::optional<std::uint64_t> problem_seed;
  std::size_t stride = 10;
  Engine engine = Engine::matrix;

  /// Throws std::invalid_argument naming the first violated precondition.
  void validate() const;
};

/// One metrics row, all quantities evaluated at node 1's iterate.
struct MetricsRecord {
  std::size_t iter = 0;
  AlgorithmTag algo = AlgorithmTag::btpp;
  Engine engine = Engine::matrix;
  std::size_t n = 0;
  std::size_t branch = 0;
  std::uint64_t seed = 0;
  double gamma = 0.0;
  double grad_norm_sq = 0.0;   ///< ‖∇f(x_1)‖²
  double consensus_err = 0.0;  ///< ‖Π_u X‖_F²
  std::optional<double> dist_to_opt;  ///< ‖x_1 - x*‖²
  std::optional<double> f_gap;        ///< f(x_1) - f*
  std::uint64_t vectors_sent = 0;     ///< cumulative p-dimensional messages

  bool same_metrics(const MetricsRecord& o) const {
    return iter == o.iter && algo == o.algo && n == o.n && branch == o.branch && seed == o.seed &&
           gamma == o.gamma && grad_norm_sq == o.grad_norm_sq && consensus_err == o.consensus_err &&
           dist_to_opt == o.dist_to_opt && f_gap == o.f_gap && vectors_sent == o.vectors_sent;
  }
};

/// Raised when a run diverges; carries every record collected before the failure.
class RunDivergedError : public std::runtime_error {
 public:
  RunDivergedError(const DivergenceError& cause, std::vector<MetricsRecord> records)
      : std::runtime_error(cause.what()), node_(cause.node()), iteration_(cause.iteration()),
        records_(std::move(records)) {}
  std::size_t node() const { return node_; }
  std::size_t iteration() const { return iteration_; }
  const std::vector<MetricsRecord>& records() const { return records_; }

 private:
  std::size_t node_;
  std::size_t iteration_;
  std::vector<MetricsRecord> records_;
};

/// ‖Π_u X‖_F² = Σ_i ‖x_i - x_1‖².
double consensus_error(const DenseMatrix& x);

/// Metrics of a state; evaluates deterministic gradients only.
MetricsRecord evaluate_metrics(const Problem& problem, const DenseMatrix& x);

/// Vector messages sent per round by each algorithm on n nodes.
std::uint64_t messages_per_round(AlgorithmTag algo, std::size_t n);

/// Runs T iterations, recording at t = 0, every `stride` iterations and t = T.
std::vector<MetricsRecord> run_experiment(const RunConfig& config);
/// Same, on an already generated problem of matching size.
std::vector<MetricsRecord> run_experiment(const RunConfig& config, const Problem& problem);

// ---------------------------------------------------------------------------
// Message-passing engine

/// Per-node inbox for one round. `downstream` holds x_parent - γ y_parent;
/// `upstream` has one slot per child, in ascending child order, each holding y_child.
struct Mailbox {
  std::optional<Vector> downstream;
  std::vector<std::optional<Vector>> upstream;
};

struct AgentState {
  std::size_t node = 0;  ///< 1-based label
  Vector x;
  Vector y;
  Vector g_prev;
};

struct MessageNetwork {
  const BAryTree* tree = nullptr;
  std::vector<AgentState> agents;
  std::vector<Mailbox> inbox;
  std::size_t t = 0;
  std::uint64_t messages = 0;

  DenseMatrix stacked_x() const;
  DenseMatrix stacked_y() const;
  DenseMatrix stacked_g() const;
};

/// Same initial state as btpp_init, spread over per-node agents.
MessageNetwork message_init(const Problem& problem, const BAryTree& tree, std::span<const double> x0,
                            std::uint64_t seed);

/// One synchronous round: post, barrier, update. Matches btpp_step bit for bit.
void message_round(MessageNetwork& net, const Problem& problem, double gamma, std::uint64_t seed);

struct NodeComm {
  std::size_t node = 0;
  std::vector<std::size_t> partners;  ///< parent ∪ children, ascending, self excluded
  std::size_t sent = 0;               ///< vectors sent per round
  std::size_t received = 0;           ///< vectors received per round
};

struct CommAudit {
  std::vector<NodeComm> nodes;
  std::size_t max_partners = 0;
  std::uint64_t messages_per_round = 0;
};

CommAudit comm_audit(const BAryTree& tree);

}  // namespace btpp
