#include "btpp/simulator.hpp"

#include <algorithm>
#include <cmath>

namespace btpp {

std::string to_string(AlgorithmTag tag) {
  switch (tag) {
    case AlgorithmTag::btpp: return "btpp";
    case AlgorithmTag::centralized: return "centralized";
    case AlgorithmTag::dsgd_ring: return "dsgd_ring";
  }
  return "?";
}

std::string to_string(Engine engine) { return engine == Engine::matrix ? "matrix" : "message"; }

std::optional<AlgorithmTag> parse_algorithm(std::string_view s) {
  if (s == "btpp") return AlgorithmTag::btpp;
  if (s == "centralized") return AlgorithmTag::centralized;
  if (s == "dsgd_ring") return AlgorithmTag::dsgd_ring;
  return std::nullopt;
}

std::optional<Engine> parse_engine(std::string_view s) {
  if (s == "matrix") return Engine::matrix;
  if (s == "message") return Engine::message;
  return std::nullopt;
}

std::unique_ptr<Problem> make_problem(const ProblemSpec& spec, std::uint64_t seed) {
  if (spec.kind == ProblemKind::logistic) return std::make_unique<LogisticProblem>(generate_logistic(spec.logistic, seed));
  return std::make_unique<QuadraticProblem>(generate_quadratic(spec.quadratic, seed));
}

void RunConfig::validate() const {
  auto fail = [](const std::string& m) { throw std::invalid_argument(m); };
  if (iterations < 1) fail("run: T must be >= 1");
  if (stride < 1) fail("run: stride must be >= 1");
  if (problem.agents() < 1) fail("problem: n must be >= 1");
  if (algorithm == AlgorithmTag::btpp && branch < 2) fail("topology: B must be >= 2");
  if (engine == Engine::message && algorithm != AlgorithmTag::btpp)
    fail("run: the message engine only implements btpp");
  if (problem.kind == ProblemKind::logistic) {
    const auto& p = problem.logistic;
    if (p.dim < 1 || p.samples < 1) fail("problem: p and J must be >= 1");
    if (p.batch < 1 || p.batch > p.samples) fail("problem: batch must be in [1, J]");
    if (!(p.sigma_h >= 0.0)) fail("problem: sigma_h must be >= 0");
    if (!(p.reg_coeff >= 0.0)) fail("problem: reg_coeff must be >= 0");
  } else {
    const auto& p = problem.quadratic;
    if (p.dim < 1) fail("problem: p must be >= 1");
    if (!(p.kappa >= 1.0)) fail("problem: kappa must be >= 1");
    if (!(p.noise_sigma >= 0.0)) fail("problem: noise_sigma must be >= 0");
  }
  if (schedule.kind == ScheduleKind::constant || schedule.kind == ScheduleKind::decayed) {
    if (!(schedule.base >= 0.0) || !std::isfinite(schedule.base)) fail("algorithm: gamma must be finite and >= 0");
    if (schedule.kind == ScheduleKind::decayed && !(schedule.base > 0.0)) fail("algorithm: gamma must be > 0");
  }
  if (schedule.kind == ScheduleKind::decayed) {
    if (!(schedule.decay_factor > 0.0 && schedule.decay_factor <= 1.0)) fail("algorithm: decay_factor must be in (0, 1]");
    if (schedule.decay_interval < 1) fail("algorithm: decay_interval must be >= 1");
  }
  if (schedule.kind == ScheduleKind::theorem1) {
    if (!schedule.theorem.delta_f || !schedule.theorem.sigma_sq || !schedule.theorem.smoothness)
      fail("algorithm: theorem1 requires delta_f, sigma_sq and L");
  }
  if (schedule.kind == ScheduleKind::theorem2) {
    if (!schedule.theorem.smoothness || !schedule.theorem.strong_convexity)
      fail("algorithm: theorem2 requires L and mu");
  }
}

double consensus_error(const DenseMatrix& x) {
  double s = 0.0;
  const auto ref = x.row(0);
  for (std::size_t r = 1; r < x.rows(); ++r) {
    const auto row = x.row(r);
    for (std::size_t k = 0; k < row.size(); ++k) {
      const double d = row[k] - ref[k];
      s += d * d;
    }
  }
  return s;
}

MetricsRecord evaluate_metrics(const Problem& problem, const DenseMatrix& x) {
  MetricsRecord m;
  const auto x1 = x.row(0);
  m.grad_norm_sq = norm_sq(problem.full_gradient(x1));
  m.consensus_err = consensus_error(x);
  if (const auto xs = problem.minimizer()) {
    double s = 0.0;
    for (std::size_t k = 0; k < x1.size(); ++k) s += (x1[k] - (*xs)[k]) * (x1[k] - (*xs)[k]);
    m.dist_to_opt = s;
  }
  if (const auto fs = problem.optimal_value()) m.f_gap = problem.objective(x1) - *fs;
  return m;
}

std::uint64_t messages_per_round(AlgorithmTag algo, std::size_t n) {
  switch (algo) {
    case AlgorithmTag::btpp: return 2 * (n - 1);
    case AlgorithmTag::centralized: return static_cast<std::uint64_t>(n) * (n - 1);
    case AlgorithmTag::dsgd_ring: return static_cast<std::uint64_t>(n) * RingWeights(n).degree();
  }
  return 0;
}

namespace {

StepSizeSchedule resolve_schedule(const RunConfig& config, std::size_t n, std::size_t diameter) {
  StepSizeSchedule s = config.schedule;
  s.agents = n;
  if (!s.theorem.agents) s.theorem.agents = n;
  if (!s.theorem.diameter) s.theorem.diameter = diameter;
  if (!s.theorem.horizon) s.theorem.horizon = config.iterations;
  return s;
}

// Stepping policy shared by both engines and the baselines.
class Runner {
 public:
  virtual ~Runner() = default;
  virtual void step(double gamma) = 0;
  virtual DenseMatrix iterates() const = 0;
};

class MatrixBtpp final : public Runner {
 public:
  MatrixBtpp(const Problem& p, const BAryTree& tree, std::span<const double> x0, std::uint64_t seed)
      : problem_(p), ops_(tree), seed_(seed), state_(btpp_init(p, x0, seed)) {}
  void step(double gamma) override { state_ = btpp_step(problem_, state_, ops_, gamma, seed_); }
  DenseMatrix iterates() const override { return state_.x; }

 private:
  const Problem& problem_;
  TreeOperators ops_;
  std::uint64_t seed_;
  AlgorithmState state_;
};

class MessageBtpp final : public Runner {
 public:
  MessageBtpp(const Problem& p, const BAryTree& tree, std::span<const double> x0, std::uint64_t seed)
      : problem_(p), tree_(tree), seed_(seed), net_(message_init(p, tree_, x0, seed)) {}
  void step(double gamma) override { message_round(net_, problem_, gamma, seed_); }
  DenseMatrix iterates() const override { return net_.stacked_x(); }

 private:
  const Problem& problem_;
  BAryTree tree_;
  std::uint64_t seed_;
  MessageNetwork net_;
};

class Centralized final : public Runner {
 public:
  Centralized(const Problem& p, std::span<const double> x0, std::uint64_t seed)
      : problem_(p), seed_(seed), state_(baseline_init(p, x0)) {}
  void step(double gamma) override { state_ = centralized_sgd_step(problem_, state_, gamma, seed_); }
  DenseMatrix iterates() const override { return state_.x; }

 private:
  const Problem& problem_;
  std::uint64_t seed_;
  AlgorithmState state_;
};

class Ring final : public Runner {
 public:
  Ring(const Problem& p, std::span<const double> x0, std::uint64_t seed)
      : problem_(p), weights_(p.agents()), seed_(seed), state_(baseline_init(p, x0)) {}
  void step(double gamma) override { state_ = dsgd_ring_step(problem_, state_, weights_, gamma, seed_); }
  DenseMatrix iterates() const override { return state_.x; }

 private:
  const Problem& problem_;
  RingWeights weights_;
  std::uint64_t seed_;
  AlgorithmState state_;
};

}  // namespace

std::vector<MetricsRecord> run_experiment(const RunConfig& config) {
  config.validate();
  const auto problem = make_problem(config.problem, config.problem_seed.value_or(config.seed));
  return run_experiment(config, *problem);
}

std::vector<MetricsRecord> run_experiment(const RunConfig& config, const Problem& problem) {
  config.validate();
  if (problem.agents() != config.problem.agents())
    throw std::invalid_argument("run_experiment: problem has " + std::to_string(problem.agents()) +
                                " agents, config expects " + std::to_string(config.problem.agents()));
  const std::size_t n = problem.agents();
  const bool tree_based = config.algorithm == AlgorithmTag::btpp;
  const std::size_t branch = tree_based ? config.branch : 0;
  const auto tree = build_bary_tree(n, tree_based ? config.branch : 2);
  const auto schedule = resolve_schedule(config, n, tree.diameter());
  const Vector x0(problem.dim(), 0.0);
  const std::uint64_t per_round = messages_per_round(config.algorithm, n);

  std::vector<MetricsRecord> records;
  auto record = [&](const DenseMatrix& x, std::size_t t) {
    auto m = evaluate_metrics(problem, x);
    m.iter = t;
    m.algo = config.algorithm;
    m.engine = config.engine;
    m.n = n;
    m.branch = branch;
    m.seed = config.seed;
    m.gamma = effective_stepsize(schedule, t);
    m.vectors_sent = per_round * t;
    records.push_back(m);
  };

  try {
    std::unique_ptr<Runner> runner;
    switch (config.algorithm) {
      case AlgorithmTag::btpp:
        if (config.engine == Engine::matrix)
          runner = std::make_unique<MatrixBtpp>(problem, tree, x0, config.seed);
        else
          runner = std::make_unique<MessageBtpp>(problem, tree, x0, config.seed);
        break;
      case AlgorithmTag::centralized: runner = std::make_unique<Centralized>(problem, x0, config.seed); break;
      case AlgorithmTag::dsgd_ring: runner = std::make_unique<Ring>(problem, x0, config.seed); break;
    }

    record(runner->iterates(), 0);
    for (std::size_t t = 0; t < config.iterations; ++t) {
      runner->step(effective_stepsize(schedule, t));
      const std::size_t done = t + 1;
      if (done % config.stride == 0 || done == config.iterations) record(runner->iterates(), done);
    }
  } catch (const DivergenceError& e) {
    throw RunDivergedError(e, std::move(records));
  }
  return records;
}

// ---------------------------------------------------------------------------

namespace {

DenseMatrix stack(const std::vector<AgentState>& agents, Vector AgentState::*field) {
  if (agents.empty()) return {};
  DenseMatrix m(agents.size(), (agents.front().*field).size());
  for (std::size_t i = 0; i < agents.size(); ++i) {
    const auto& v = agents[i].*field;
    std::copy(v.begin(), v.end(), m.row(i).begin());
  }
  return m;
}

}  // namespace

DenseMatrix MessageNetwork::stacked_x() const { return stack(agents, &AgentState::x); }
DenseMatrix MessageNetwork::stacked_y() const { return stack(agents, &AgentState::y); }
DenseMatrix MessageNetwork::stacked_g() const { return stack(agents, &AgentState::g_prev); }

MessageNetwork message_init(const Problem& problem, const BAryTree& tree, std::span<const double> x0,
                            std::uint64_t seed) {
  if (tree.size() != problem.agents()) throw std::invalid_argument("message_init: tree size mismatch");
  if (x0.size() != problem.dim()) throw std::invalid_argument("message_init: x0 dimension mismatch");
  MessageNetwork net;
  net.tree = &tree;
  net.agents.resize(tree.size());
  net.inbox.resize(tree.size());
  for (std::size_t i = 0; i < tree.size(); ++i) {
    net.inbox[i].upstream.assign(tree.children(i + 1).size(), std::nullopt);
    auto& a = net.agents[i];
    a.node = i + 1;
    a.x.assign(x0.begin(), x0.end());
    auto stream = oracle_stream(seed, i, 0);
    a.g_prev = problem.sample_gradient(i, a.x, stream);
    a.y = a.g_prev;
    for (double v : a.y)
      if (!std::isfinite(v)) throw DivergenceError(i + 1, 0);
  }
  return net;
}

void message_round(MessageNetwork& net, const Problem& problem, double gamma, std::uint64_t seed) {
  const BAryTree& tree = *net.tree;
  const std::size_t n = tree.size();
  const std::size_t p = problem.dim();

  // Phase 1: post. Each node sends x - γy down to every child and y up to its parent.
  Vector root_adapted;
  for (const auto& box : net.inbox) {
    if (box.downstream || std::any_of(box.upstream.begin(), box.upstream.end(), [](const auto& m) { return m.has_value(); }))
      throw std::logic_error("message_round: mailboxes must be empty at the start of a round");
  }
  for (std::size_t node = 1; node <= n; ++node) {
    const auto& a = net.agents[node - 1];
    Vector adapted(p);
    for (std::size_t k = 0; k < p; ++k) adapted[k] = a.x[k] - gamma * a.y[k];
    for (auto child : tree.children(node)) {
      net.inbox[child - 1].downstream = adapted;
      ++net.messages;
    }
    if (node == 1) {
      root_adapted = std::move(adapted);
    } else {
      const auto& siblings = tree.children(tree.parent(node));
      const auto slot = static_cast<std::size_t>(std::find(siblings.begin(), siblings.end(), node) - siblings.begin());
      net.inbox[tree.parent(node) - 1].upstream.at(slot) = a.y;
      ++net.messages;
    }
  }

  // Phase 2 is the barrier between the loops. Phase 3: every node updates from its inbox.
  const std::size_t next_t = net.t + 1;
  std::vector<AgentState> updated(n);
  for (std::size_t node = 1; node <= n; ++node) {
    const auto& a = net.agents[node - 1];
    const auto& box = net.inbox[node - 1];
    auto& u = updated[node - 1];
    u.node = node;

    const Vector* pulled = nullptr;
    if (node == 1) {
      pulled = &root_adapted;
    } else {
      if (!box.downstream)
        throw std::logic_error("message_round: node " + std::to_string(node) + " missing downstream message");
      pulled = &*box.downstream;
    }
    u.x.assign(p, 0.0);
    for (std::size_t k = 0; k < p; ++k) u.x[k] += (*pulled)[k];

    // Tracker: own y for the root's self-loop, then children in ascending order.
    Vector acc(p, 0.0);
    if (node == 1)
      for (std::size_t k = 0; k < p; ++k) acc[k] += a.y[k];
    for (std::size_t s = 0; s < box.upstream.size(); ++s) {
      if (!box.upstream[s])
        throw std::logic_error("message_round: node " + std::to_string(node) + " missing upstream message");
      const auto& yc = *box.upstream[s];
      for (std::size_t k = 0; k < p; ++k) acc[k] += yc[k];
    }
    u.y = std::move(acc);
  }
  // Every message has been consumed.
  for (auto& box : net.inbox) {
    box.downstream.reset();
    for (auto& slot : box.upstream) slot.reset();
  }
  for (const auto& u : updated)
    for (double v : u.x)
      if (!std::isfinite(v)) throw DivergenceError(u.node, next_t);

  for (std::size_t node = 1; node <= n; ++node) {
    auto& u = updated[node - 1];
    const auto& a = net.agents[node - 1];
    auto stream = oracle_stream(seed, node - 1, next_t);
    u.g_prev = problem.sample_gradient(node - 1, u.x, stream);
    for (std::size_t k = 0; k < p; ++k) u.y[k] = u.y[k] + u.g_prev[k] - a.g_prev[k];
  }
  for (const auto& u : updated)
    for (double v : u.y)
      if (!std::isfinite(v)) throw DivergenceError(u.node, next_t);

  net.agents = std::move(updated);
  net.t = next_t;
}

CommAudit comm_audit(const BAryTree& tree) {
  CommAudit audit;
  for (std::size_t node = 1; node <= tree.size(); ++node) {
    NodeComm c;
    c.node = node;
    const auto& kids = tree.children(node);
    c.partners = kids;
    if (node != 1) c.partners.push_back(tree.parent(node));
    std::sort(c.partners.begin(), c.partners.end());
    c.partners.erase(std::unique(c.partners.begin(), c.partners.end()), c.partners.end());
    const std::size_t has_parent = node != 1 ? 1 : 0;
    c.sent = has_parent + kids.size();
    c.received = has_parent + kids.size();
    audit.max_partners = std::max(audit.max_partners, c.partners.size());
    audit.messages_per_round += c.sent;
    audit.nodes.push_back(std::move(c));
  }
  return audit;
}

}  // namespace btpp
