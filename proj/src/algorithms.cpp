#include "btpp/algorithms.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace btpp {

namespace {

void check_dims(const Problem& problem, const DenseMatrix& m, const char* what) {
  if (m.rows() != problem.agents() || m.cols() != problem.dim())
    throw std::invalid_argument(std::string(what) + ": state is " + std::to_string(m.rows()) + "x" +
                                std::to_string(m.cols()) + ", problem is " + std::to_string(problem.agents()) +
                                "x" + std::to_string(problem.dim()));
}

void check_finite(const DenseMatrix& m, std::size_t iteration) {
  for (std::size_t r = 0; r < m.rows(); ++r)
    for (double v : m.row(r))
      if (!std::isfinite(v)) throw DivergenceError(r + 1, iteration);
}

void check_gamma(double gamma) {
  if (!(gamma >= 0.0) || !std::isfinite(gamma)) throw std::invalid_argument("stepsize must be finite and >= 0");
}

}  // namespace

DenseMatrix draw_gradients(const Problem& problem, const DenseMatrix& x, std::uint64_t seed,
                           std::size_t iteration) {
  DenseMatrix g(x.rows(), x.cols());
  for (std::size_t i = 0; i < x.rows(); ++i) {
    auto stream = oracle_stream(seed, i, iteration);
    const auto gi = problem.sample_gradient(i, x.row(i), stream);
    std::copy(gi.begin(), gi.end(), g.row(i).begin());
  }
  return g;
}

AlgorithmState btpp_init(const Problem& problem, std::span<const double> x0, std::uint64_t seed) {
  if (x0.size() != problem.dim())
    throw std::invalid_argument("btpp_init: x0 has dimension " + std::to_string(x0.size()) + ", expected " +
                                std::to_string(problem.dim()));
  AlgorithmState s;
  s.x = DenseMatrix::replicate(problem.agents(), x0);
  s.g_prev = draw_gradients(problem, s.x, seed, 0);
  s.y = s.g_prev;
  s.t = 0;
  check_finite(s.y, 0);
  return s;
}

AlgorithmState btpp_step(const Problem& problem, const AlgorithmState& state, const TreeOperators& ops,
                         double gamma, std::uint64_t seed) {
  check_dims(problem, state.x, "btpp_step");
  check_gamma(gamma);
  if (ops.tree.size() != problem.agents()) throw std::invalid_argument("btpp_step: tree size mismatch");

  DenseMatrix adapted(state.x.rows(), state.x.cols());
  {
    auto xd = state.x.data();
    auto yd = state.y.data();
    auto ad = adapted.data();
    for (std::size_t k = 0; k < ad.size(); ++k) ad[k] = xd[k] - gamma * yd[k];
  }

  AlgorithmState next;
  next.t = state.t + 1;
  next.x = sparse_apply(ops.pull, adapted);
  check_finite(next.x, next.t);

  DenseMatrix g_new = draw_gradients(problem, next.x, seed, next.t);
  next.y = sparse_apply(ops.push, state.y);
  {
    auto yd = next.y.data();
    auto gn = g_new.data();
    auto gp = state.g_prev.data();
    for (std::size_t k = 0; k < yd.size(); ++k) yd[k] = yd[k] + gn[k] - gp[k];
  }
  next.g_prev = std::move(g_new);
  check_finite(next.y, next.t);
  return next;
}

AlgorithmState baseline_init(const Problem& problem, std::span<const double> x0) {
  if (x0.size() != problem.dim()) throw std::invalid_argument("baseline_init: x0 dimension mismatch");
  AlgorithmState s;
  s.x = DenseMatrix::replicate(problem.agents(), x0);
  s.y = DenseMatrix(problem.agents(), problem.dim());
  s.g_prev = s.y;
  return s;
}

AlgorithmState centralized_sgd_step(const Problem& problem, const AlgorithmState& state, double gamma,
                                    std::uint64_t seed) {
  check_dims(problem, state.x, "centralized_sgd_step");
  check_gamma(gamma);
  const std::size_t n = problem.agents();
  // All agents sample at the shared iterate held in row 0.
  const auto shared = DenseMatrix::replicate(n, state.x.row(0));
  DenseMatrix g = draw_gradients(problem, shared, seed, state.t);
  Vector avg = column_sums(g);
  for (auto& v : avg) v /= static_cast<double>(n);

  Vector x(state.x.row(0).begin(), state.x.row(0).end());
  for (std::size_t k = 0; k < x.size(); ++k) x[k] -= gamma * avg[k];

  AlgorithmState next;
  next.t = state.t + 1;
  next.x = DenseMatrix::replicate(n, x);
  check_finite(next.x, next.t);
  next.y = g;
  next.g_prev = std::move(g);
  return next;
}

RingWeights::RingWeights(std::size_t n) : rows_(n) {
  if (n == 0) throw std::invalid_argument("RingWeights: n must be positive");
  for (std::size_t i = 0; i < n; ++i) {
    if (n == 1) {
      rows_[i] = {{0, 1.0}};
    } else if (n == 2) {
      rows_[i] = {{0, 0.5}, {1, 0.5}};
    } else {
      std::vector<std::size_t> cols = {(i + n - 1) % n, i, (i + 1) % n};
      std::sort(cols.begin(), cols.end());
      for (auto c : cols) rows_[i].emplace_back(c, 1.0 / 3.0);
    }
  }
}

std::size_t RingWeights::degree() const {
  const auto n = size();
  return n >= 3 ? 2 : n - 1;
}

DenseMatrix RingWeights::to_dense() const {
  DenseMatrix w(size(), size());
  for (std::size_t r = 0; r < size(); ++r)
    for (auto [c, v] : rows_[r]) w(r, c) = v;
  return w;
}

DenseMatrix RingWeights::apply(const DenseMatrix& x) const {
  if (x.rows() != size()) throw std::invalid_argument("RingWeights::apply: dimension mismatch");
  DenseMatrix out(x.rows(), x.cols(), 0.0);
  for (std::size_t r = 0; r < size(); ++r) {
    auto dst = out.row(r);
    for (auto [c, w] : rows_[r]) {
      auto src = x.row(c);
      for (std::size_t k = 0; k < dst.size(); ++k) dst[k] += w * src[k];
    }
  }
  return out;
}

AlgorithmState dsgd_ring_step(const Problem& problem, const AlgorithmState& state, const RingWeights& weights,
                              double gamma, std::uint64_t seed) {
  check_dims(problem, state.x, "dsgd_ring_step");
  check_gamma(gamma);
  if (weights.size() != problem.agents()) throw std::invalid_argument("dsgd_ring_step: ring size mismatch");
  DenseMatrix g = draw_gradients(problem, state.x, seed, state.t);
  DenseMatrix adapted(state.x.rows(), state.x.cols());
  {
    auto xd = state.x.data();
    auto gd = g.data();
    auto ad = adapted.data();
    for (std::size_t k = 0; k < ad.size(); ++k) ad[k] = xd[k] - gamma * gd[k];
  }
  AlgorithmState next;
  next.t = state.t + 1;
  next.x = weights.apply(adapted);
  check_finite(next.x, next.t);
  next.y = g;
  next.g_prev = std::move(g);
  return next;
}

std::string to_string(ScheduleKind kind) {
  switch (kind) {
    case ScheduleKind::constant: return "constant";
    case ScheduleKind::theorem1: return "theorem1";
    case ScheduleKind::theorem2: return "theorem2";
    case ScheduleKind::decayed: return "decayed";
  }
  return "?";
}

std::optional<ScheduleKind> parse_schedule_kind(std::string_view s) {
  if (s == "constant") return ScheduleKind::constant;
  if (s == "theorem1") return ScheduleKind::theorem1;
  if (s == "theorem2") return ScheduleKind::theorem2;
  if (s == "decayed") return ScheduleKind::decayed;
  return std::nullopt;
}

double theorem1_stepsize(double delta_f, double sigma_sq, double smoothness, std::size_t n, std::size_t d,
                         std::size_t horizon) {
  if (!(delta_f > 0.0) || !(sigma_sq >= 0.0) || !(smoothness > 0.0) || n < 1)
    throw std::invalid_argument("theorem1 stepsize: need delta_f > 0, sigma_sq >= 0, L > 0, n >= 1");
  const double nn = static_cast<double>(n);
  const double dd = static_cast<double>(d);
  const double tp1 = static_cast<double>(horizon) + 1.0;
  constexpr double inf = std::numeric_limits<double>::infinity();

  const double den1 = 3.0 * sigma_sq * smoothness * nn * tp1;
  const double den2 = 1500.0 * nn * nn * std::pow(dd, 6) * sigma_sq * smoothness * smoothness * tp1;
  const double den3 = 100.0 * nn * dd * dd * dd * smoothness;
  const double t1 = den1 > 0.0 ? std::sqrt(delta_f / den1) : inf;
  const double t2 = den2 > 0.0 ? std::cbrt(delta_f / den2) : inf;
  const double t3 = den3 > 0.0 ? 1.0 / den3 : inf;
  const double g = std::min({t1, t2, t3});
  if (!std::isfinite(g)) throw std::invalid_argument("theorem1 stepsize: every term is unbounded (sigma_sq = 0 and d = 0)");
  return g;
}

double theorem2_stepsize(double smoothness, double strong_convexity, std::size_t n, std::size_t d,
                         std::size_t horizon) {
  if (!(smoothness > 0.0) || !(strong_convexity > 0.0) || n < 1)
    throw std::invalid_argument("theorem2 stepsize: need L > 0, mu > 0, n >= 1");
  if (horizon < 2 * d) throw std::invalid_argument("theorem2 stepsize: requires T >= 2d");
  const double nn = static_cast<double>(n);
  const double dd = static_cast<double>(d);
  const double tp1 = static_cast<double>(horizon) + 1.0;
  const double kappa = smoothness / strong_convexity;
  constexpr double inf = std::numeric_limits<double>::infinity();

  const double den1 = 100.0 * nn * dd * dd * kappa * smoothness;
  const double t1 = den1 > 0.0 ? 1.0 / den1 : inf;
  const double t2 = 16.0 * std::log(nn * tp1 * tp1) / (nn * tp1 * strong_convexity);
  const double g = std::min(t1, t2);
  if (!(g > 0.0) || !std::isfinite(g)) throw std::invalid_argument("theorem2 stepsize: degenerate constants");
  return g;
}

double effective_stepsize(const StepSizeSchedule& s, std::size_t t) {
  const auto& c = s.theorem;
  auto need = [&](const auto& opt, const char* name) {
    if (!opt) throw std::invalid_argument(to_string(s.kind) + " schedule: missing constant '" + name + "'");
    return *opt;
  };

  double gamma = 0.0;
  switch (s.kind) {
    case ScheduleKind::constant:
      gamma = s.base;
      break;
    case ScheduleKind::decayed: {
      if (!(s.decay_factor > 0.0 && s.decay_factor <= 1.0))
        throw std::invalid_argument("decayed schedule: decay_factor must be in (0, 1]");
      if (s.decay_interval < 1) throw std::invalid_argument("decayed schedule: decay_interval must be >= 1");
      gamma = s.base * std::pow(s.decay_factor, static_cast<double>(t / s.decay_interval));
      break;
    }
    case ScheduleKind::theorem1:
      gamma = theorem1_stepsize(need(c.delta_f, "delta_f"), need(c.sigma_sq, "sigma_sq"),
                                need(c.smoothness, "L"), need(c.agents, "n"), need(c.diameter, "d"),
                                need(c.horizon, "T"));
      break;
    case ScheduleKind::theorem2:
      gamma = theorem2_stepsize(need(c.smoothness, "L"), need(c.strong_convexity, "mu"), need(c.agents, "n"),
                                need(c.diameter, "d"), need(c.horizon, "T"));
      break;
  }
  if (s.rescale_by_n) {
    if (s.agents < 1) throw std::invalid_argument("stepsize rescale: agent count must be >= 1");
    gamma /= static_cast<double>(s.agents);
  }
  // A constant zero stepsize is allowed as a frozen-dynamics diagnostic.
  const bool frozen = s.kind == ScheduleKind::constant && s.base == 0.0;
  if ((!(gamma > 0.0) && !frozen) || !std::isfinite(gamma))
    throw std::invalid_argument("stepsize must be positive and finite, got " + std::to_string(gamma));
  return gamma;
}

}  // namespace btpp
