// Acceptance gate: one PASS/FAIL line per criterion, every tolerance pinned here.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <iostream>
#include <map>
#include <sstream>
#include <string>

#include "btpp/app.hpp"
#include "btpp/config.hpp"

using namespace btpp;

namespace {

constexpr double kSpectralSlack = 1e-9;
constexpr double kPowerTol = 1e-6;
constexpr double kConservationTol = 1e-9;
constexpr std::size_t kConservationIters = 500;
constexpr std::size_t kEngineConfigs = 10;
constexpr double kFdStep = 1e-6;
constexpr double kFdTol = 1e-5;
constexpr std::size_t kFdProbes = 100;
constexpr double kUnbiasedTol = 1e-12;
constexpr double kContraction = 1e-12;
constexpr std::size_t kMaxQuadraticIters = 200000;
constexpr double kCentralizedFactor = 1.5;
constexpr double kBranchSlack = 0.10;
constexpr double kSeconds1 = 30.0, kSeconds6 = 60.0, kSeconds7 = 300.0;

const std::size_t kBranches[] = {2, 3, 4, 8};

std::string config_path(const char* name) { return std::string(BTPP_CONFIG_DIR) + "/" + name; }

struct Verdict {
  bool pass = true;
  std::string detail;
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.4g", v);
  return buf;
}

// 1 ------------------------------------------------------------------------

Verdict matrix_properties() {
  const auto t0 = std::chrono::steady_clock::now();
  std::size_t cases = 0, failures = 0;
  std::string first;
  auto fail = [&](std::size_t n, std::size_t b, std::size_t k, const char* what) {
    if (failures++ == 0) first = std::string(what) + " n=" + std::to_string(n) + " B=" + std::to_string(b) +
                                 " k=" + std::to_string(k);
  };
  double worst_ratio = 0.0;
  for (std::size_t b : kBranches) {
    for (std::size_t n = 1; n <= 64; ++n) {
      const auto tree = build_bary_tree(n, b);
      const auto d = tree.diameter();
      const auto r = pull_matrix(tree);
      const auto c = push_matrix(tree);
      ++cases;
      if (!is_row_stochastic(r.to_int()) || !is_column_stochastic(c.to_int()) ||
          !(c == r.transposed(Stochasticity::column)))
        fail(n, b, 0, "stochasticity");

      auto product = r.to_int();
      for (std::size_t k = 1; k <= std::max<std::size_t>(d, 1); ++k) {
        if (k > 1) product = product * r.to_int();
        ++cases;
        if (!(closed_form_power(tree, k).to_int() == product)) fail(n, b, k, "closed_form_power");
      }

      // n·R^d = 1uᵀ in integers.
      IntMatrix scaled = closed_form_power(tree, std::max<std::size_t>(d, 1)).to_int();
      IntMatrix outer(n);
      for (std::size_t i = 0; i < n; ++i) outer(i, 0) = static_cast<std::int64_t>(n);
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) scaled(i, j) *= static_cast<std::int64_t>(n);
      ++cases;
      if (!(scaled == outer)) fail(n, b, d, "consensus_power");

      for (std::size_t k = 1; k + 1 <= d; ++k) {
        PowerIterationOptions opts;
        opts.restart_seed = n * 1000003 + b * 1009 + k;
        const double s =
            spectral_norm(subtract(closed_form_power(tree, k).to_dense(), consensus_outer(n)), kPowerTol, opts);
        ++cases;
        worst_ratio = std::max(worst_ratio, s / std::sqrt(double(n)));
        if (!(s <= std::sqrt(double(n)) + kSpectralSlack)) fail(n, b, k, "spectral_norm");
      }
    }
  }
  const double secs = seconds_since(t0);
  Verdict v;
  v.pass = failures == 0 && secs < kSeconds1;
  v.detail = std::to_string(cases) + " checks, " + std::to_string(failures) + " failed" +
             (first.empty() ? "" : " (first: " + first + ")") + ", max ||R^k-1u'/n||/sqrt(n) = " + fmt(worst_ratio) +
             ", " + fmt(secs) + " s";
  return v;
}

// 2 ------------------------------------------------------------------------

Verdict conservation() {
  auto cfg = load_config(config_path("logistic_desk.ini"));
  cfg.algorithms = {AlgorithmTag::btpp};
  cfg.seeds = {1};
  const auto run = cfg.expand().front();
  const auto problem = make_problem(run.problem, run.problem_seed.value_or(run.seed));
  const TreeOperators ops(build_bary_tree(problem->agents(), run.branch));

  auto schedule = run.schedule;
  auto state = btpp_init(*problem, Vector(problem->dim(), 0.0), run.seed);
  double worst = 0.0;
  bool ok = true;
  for (std::size_t t = 0; t <= kConservationIters; ++t) {
    const auto sy = column_sums(state.y);
    const auto sg = column_sums(state.g_prev);
    double diff = 0.0, scale = 0.0;
    for (std::size_t k = 0; k < sy.size(); ++k) {
      diff = std::max(diff, std::abs(sy[k] - sg[k]));
      scale = std::max(scale, std::abs(sg[k]));
    }
    worst = std::max(worst, diff / (1.0 + scale));
    ok = ok && diff <= kConservationTol * (1.0 + scale);
    if (t < kConservationIters) state = btpp_step(*problem, state, ops, effective_stepsize(schedule, t), run.seed);
  }
  return {ok, "n=" + std::to_string(problem->agents()) + " B=" + std::to_string(run.branch) + ", " +
                  std::to_string(kConservationIters) + " iterations, worst relative gap " + fmt(worst)};
}

// 3 ------------------------------------------------------------------------

Verdict degree_bound() {
  bool ok = true;
  std::size_t cases = 0;
  for (std::size_t b : kBranches) {
    for (std::size_t n = 1; n <= 64; ++n) {
      const auto audit = comm_audit(build_bary_tree(n, b));
      ++cases;
      ok = ok && audit.max_partners <= b + 1 && audit.messages_per_round == 2 * (n - 1);
    }
  }
  return {ok, std::to_string(cases) + " (n, B) pairs"};
}

// 4 ------------------------------------------------------------------------

Verdict engine_equivalence() {
  RngStream pick(2024, 0, StreamPurpose::probe);
  std::uniform_int_distribution<std::size_t> n_dist(1, 32), t_dist(1, 300), b_dist(0, 3), kind(0, 1);
  std::size_t identical = 0;
  std::string shapes;
  for (std::size_t i = 0; i < kEngineConfigs; ++i) {
    RunConfig rc;
    const auto n = n_dist(pick);
    rc.branch = kBranches[b_dist(pick)];
    rc.iterations = t_dist(pick);
    rc.seed = 100 + i;
    rc.stride = 1 + i;
    if (kind(pick) == 0) {
      rc.problem.kind = ProblemKind::logistic;
      rc.problem.logistic = LogisticParams{n, 8, 30, 0.8, 0.01, 1 + i % 3};
      rc.schedule.kind = ScheduleKind::decayed;
      rc.schedule.base = 0.3;
      rc.schedule.rescale_by_n = true;
      rc.schedule.decay_factor = 0.4;
      rc.schedule.decay_interval = 50;
    } else {
      rc.problem.kind = ProblemKind::quadratic;
      rc.problem.quadratic = QuadraticParams{n, 6, 4.0, i % 2 ? 0.1 : 0.0};
      rc.schedule.base = 0.005;
    }
    const auto a = run_experiment(rc);
    rc.engine = Engine::message;
    const auto b = run_experiment(rc);
    bool same = a.size() == b.size();
    for (std::size_t r = 0; same && r < a.size(); ++r) same = a[r].same_metrics(b[r]);
    identical += same;
    shapes += (i ? " " : "") + std::to_string(n) + "/" + std::to_string(rc.branch) + "/" +
              std::to_string(rc.iterations);
  }
  return {identical == kEngineConfigs,
          std::to_string(identical) + "/" + std::to_string(kEngineConfigs) + " identical (n/B/T: " + shapes + ")"};
}

// 5 ------------------------------------------------------------------------

double fd_worst(const Problem& prob, std::uint64_t seed) {
  RngStream s(seed, 0, StreamPurpose::probe);
  double worst = 0.0;
  for (std::size_t probe = 0; probe < kFdProbes; ++probe) {
    const auto agent = probe % prob.agents();
    auto x = gaussian_vector(s, prob.dim(), 0.0, 1.0);
    const auto g = prob.local_gradient(agent, x);
    double diff = 0.0, scale = 1.0;
    for (std::size_t k = 0; k < x.size(); ++k) {
      const double keep = x[k];
      x[k] = keep + kFdStep;
      const double up = prob.local_objective(agent, x);
      x[k] = keep - kFdStep;
      const double down = prob.local_objective(agent, x);
      x[k] = keep;
      diff = std::max(diff, std::abs(g[k] - (up - down) / (2.0 * kFdStep)));
      scale = std::max(scale, std::abs(g[k]));
    }
    worst = std::max(worst, diff / scale);
  }
  return worst;
}

Verdict oracle_correctness() {
  const auto logistic = generate_logistic(LogisticParams{16, 20, 100, 0.8, 0.01, 1}, 1);
  const auto quadratic = generate_quadratic(QuadraticParams{16, 10, 4.0, 0.0}, 1);
  const double fd_l = fd_worst(logistic, 5);
  const double fd_q = fd_worst(quadratic, 6);

  RngStream s(7, 0, StreamPurpose::probe);
  double unbiased = 0.0;
  for (std::size_t agent = 0; agent < logistic.agents(); ++agent) {
    const auto x = gaussian_vector(s, logistic.dim(), 0.0, 1.0);
    Vector avg(logistic.dim(), 0.0);
    for (std::size_t j = 0; j < logistic.samples(); ++j) {
      const auto g = logistic.sample_gradient_at(agent, x, j);
      for (std::size_t k = 0; k < avg.size(); ++k) avg[k] += g[k];
    }
    const auto exact = logistic.local_gradient(agent, x);
    double diff = 0.0, scale = 1.0;
    for (std::size_t k = 0; k < avg.size(); ++k) {
      diff = std::max(diff, std::abs(avg[k] / double(logistic.samples()) - exact[k]));
      scale = std::max(scale, std::abs(exact[k]));
    }
    unbiased = std::max(unbiased, diff / scale);
  }
  return {fd_l <= kFdTol && fd_q <= kFdTol && unbiased <= kUnbiasedTol,
          "finite differences " + fmt(fd_l) + " (logistic), " + fmt(fd_q) + " (quadratic); exhaustive average " +
              fmt(unbiased)};
}

// 6 ------------------------------------------------------------------------

Verdict strongly_convex() {
  const auto t0 = std::chrono::steady_clock::now();
  const auto cfg = load_config(config_path("quadratic_sc.ini"));
  auto run = cfg.expand().front();
  if (run.iterations > kMaxQuadraticIters) return {false, "configured T exceeds the iteration budget"};
  run.stride = 1;
  const auto records = run_experiment(run);
  const std::size_t d = build_bary_tree(run.problem.agents(), run.branch).diameter();
  const double start = *records.front().dist_to_opt;
  const double end = *records.back().dist_to_opt;

  // Windows of 2d after the first 2d iterations.
  std::size_t windows = 0, broken = 0;
  for (std::size_t t = 2 * d; t + 2 * d < records.size(); t += 2 * d) {
    ++windows;
    if (!(*records[t + 2 * d].dist_to_opt < *records[t].dist_to_opt)) ++broken;
  }
  std::size_t reached = records.size();
  for (std::size_t t = 0; t < records.size(); ++t)
    if (*records[t].dist_to_opt <= kContraction * start) {
      reached = t;
      break;
    }
  const double secs = seconds_since(t0);
  return {end <= kContraction * start && broken == 0 && secs < kSeconds6,
          "T=" + std::to_string(run.iterations) + ", ratio " + fmt(end / start) + " (1e-12 reached at t=" +
              (reached < records.size() ? std::to_string(reached) : std::string("never")) + "), " +
              std::to_string(windows - broken) + "/" + std::to_string(windows) + " windows of " +
              std::to_string(2 * d) + " decreasing, " + fmt(secs) + " s"};
}

// 7, 8 ---------------------------------------------------------------------

// Mean final grad_norm_sq per (algorithm, B) over the given seeds.
std::map<std::pair<AlgorithmTag, std::size_t>, double> final_means(ExperimentConfig cfg,
                                                                   std::vector<std::uint64_t> seeds) {
  cfg.seeds = std::move(seeds);
  const auto outcomes = execute_runs(cfg.expand(), worker_count());
  std::map<std::pair<AlgorithmTag, std::size_t>, std::pair<double, std::size_t>> acc;
  for (const auto& o : outcomes) {
    if (o.divergence || o.records.empty()) throw std::runtime_error("run diverged: " + o.divergence.value_or("?"));
    auto& [sum, count] = acc[{o.config.algorithm, o.config.algorithm == AlgorithmTag::btpp ? o.config.branch : 0}];
    sum += o.records.back().grad_norm_sq;
    ++count;
  }
  std::map<std::pair<AlgorithmTag, std::size_t>, double> out;
  for (const auto& [k, v] : acc) out[k] = v.first / double(v.second);
  return out;
}

std::vector<std::uint64_t> seed_block(std::uint64_t first) {
  std::vector<std::uint64_t> s;
  for (std::uint64_t i = 0; i < 10; ++i) s.push_back(first + i);
  return s;
}

Verdict ordering() {
  const auto t0 = std::chrono::steady_clock::now();
  const auto cfg = load_config(config_path("logistic_desk.ini"));
  std::string detail;
  bool ok = false;
  // One rerun on fresh seeds is allowed before calling it a regression.
  for (std::uint64_t first : {1, 11}) {
    auto m = final_means(cfg, seed_block(first));
    const double btpp = m.at({AlgorithmTag::btpp, 2});
    const double central = m.at({AlgorithmTag::centralized, 0});
    const double ring = m.at({AlgorithmTag::dsgd_ring, 0});
    ok = btpp <= kCentralizedFactor * central && btpp <= ring;
    detail += std::string(detail.empty() ? "" : "; ") + "seeds " + std::to_string(first) + ".." +
              std::to_string(first + 9) + ": btpp " + fmt(btpp) + ", centralized " + fmt(central) + ", ring " +
              fmt(ring) + (ok ? " ok" : " not ordered");
    if (ok) break;
  }
  const double secs = seconds_since(t0);
  return {ok && secs < kSeconds7, detail + ", " + fmt(secs) + " s"};
}

Verdict branch_monotone() {
  auto cfg = load_config(config_path("logistic_desk.ini"));
  cfg.algorithms = {AlgorithmTag::btpp};
  cfg.branches = {2, 4, 8};
  const auto m = final_means(cfg, seed_block(1));
  bool ok = true;
  std::string detail;
  double prev = 0.0;
  for (std::size_t b : cfg.branches) {
    const double v = m.at({AlgorithmTag::btpp, b});
    if (b != cfg.branches.front()) ok = ok && v <= (1.0 + kBranchSlack) * prev;
    detail += (detail.empty() ? "" : ", ") + std::string("B=") + std::to_string(b) + ": " + fmt(v);
    prev = v;
  }
  return {ok, detail};
}

}  // namespace

int main() {
  struct Criterion {
    int id;
    const char* name;
    std::function<Verdict()> check;
  };
  const Criterion criteria[] = {
      {1, "mixing matrix properties", matrix_properties},
      {2, "tracker conservation", conservation},
      {3, "degree bound and message count", degree_bound},
      {4, "engine equivalence", engine_equivalence},
      {5, "oracle correctness", oracle_correctness},
      {6, "strongly convex convergence", strongly_convex},
      {7, "statistical ordering vs baselines", ordering},
      {8, "branch-size monotonicity", branch_monotone},
  };
  int failed = 0;
  for (const auto& c : criteria) {
    Verdict v;
    try {
      v = c.check();
    } catch (const std::exception& e) {
      v = {false, std::string("error: ") + e.what()};
    }
    failed += !v.pass;
    std::cout << (v.pass ? "PASS" : "FAIL") << " criterion " << c.id << " (" << c.name << "): " << v.detail
              << std::endl;
  }
  std::cout << "INFO criterion 9: full-scale transient-time and dataset claims are not exercised at desk scale"
            << std::endl;
  return failed == 0 ? 0 : 1;
}
