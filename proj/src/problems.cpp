#include "btpp/problems.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <numeric>
#include <ostream>
#include <random>
#include <stdexcept>

#include "btpp/format.hpp"
#include "btpp/topology.hpp"

namespace btpp {

namespace {

double sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

// ln(1 + exp(z))
double softplus(double z) { return std::max(z, 0.0) + std::log1p(std::exp(-std::abs(z))); }

}  // namespace

void Problem::check_point(std::size_t agent, std::span<const double> x) const {
  if (agent >= agents())
    throw std::out_of_range("agent " + std::to_string(agent) + " out of range (n=" +
                            std::to_string(agents()) + ")");
  if (x.size() != dim())
    throw std::invalid_argument("point has dimension " + std::to_string(x.size()) + ", expected " +
                                std::to_string(dim()));
}

double Problem::objective(std::span<const double> x) const {
  double s = 0.0;
  for (std::size_t i = 0; i < agents(); ++i) s += local_objective(i, x);
  return s / static_cast<double>(agents());
}

Vector Problem::full_gradient(std::span<const double> x) const {
  Vector g(dim(), 0.0);
  for (std::size_t i = 0; i < agents(); ++i) {
    const auto gi = local_gradient(i, x);
    for (std::size_t k = 0; k < g.size(); ++k) g[k] += gi[k];
  }
  for (auto& v : g) v /= static_cast<double>(agents());
  return g;
}

// ---------------------------------------------------------------------------
// Logistic regression with nonconvex regularization

LogisticProblem::LogisticProblem(LogisticParams params, Vector common_model,
                                 std::vector<LogisticShard> shards)
    : params_(params), common_model_(std::move(common_model)), shards_(std::move(shards)) {
  if (shards_.empty()) throw std::invalid_argument("LogisticProblem: no agents");
  if (params_.samples < 1) throw std::invalid_argument("LogisticProblem: need J >= 1");
  if (params_.batch < 1 || params_.batch > params_.samples)
    throw std::invalid_argument("LogisticProblem: batch must be in [1, J]");
  params_.agents = shards_.size();
  for (const auto& s : shards_) {
    if (s.features.rows() != params_.samples || s.features.cols() != params_.dim ||
        s.labels.size() != params_.samples)
      throw std::invalid_argument("LogisticProblem: shard shape mismatch");
    if (!s.features.all_finite()) throw std::invalid_argument("LogisticProblem: non-finite feature");
    for (auto y : s.labels)
      if (y != 1 && y != -1) throw std::invalid_argument("LogisticProblem: labels must be ±1");
  }
}

double LogisticProblem::local_objective(std::size_t agent, std::span<const double> x) const {
  check_point(agent, x);
  const auto& s = shards_[agent];
  double loss = 0.0;
  for (std::size_t j = 0; j < params_.samples; ++j)
    loss += softplus(-s.labels[j] * dot(s.features.row(j), x));
  loss /= static_cast<double>(params_.samples);
  double reg = 0.0;
  for (double v : x) reg += v * v / (1.0 + v * v);
  return loss + params_.reg_coeff * reg;
}

Vector LogisticProblem::regularizer_gradient(std::span<const double> x) const {
  Vector g(x.size());
  for (std::size_t k = 0; k < x.size(); ++k) {
    const double q = 1.0 + x[k] * x[k];
    g[k] = 2.0 * params_.reg_coeff * x[k] / (q * q);
  }
  return g;
}

Vector LogisticProblem::loss_gradient(std::size_t agent, std::span<const double> x,
                                      std::span<const std::size_t> indices) const {
  const auto& s = shards_[agent];
  Vector g(params_.dim, 0.0);
  for (auto j : indices) {
    const double y = s.labels[j];
    const auto h = s.features.row(j);
    // d/dx ln(1 + exp(-y hᵀx)) = -y σ(-y hᵀx) h
    const double w = -y * sigmoid(-y * dot(h, x));
    for (std::size_t k = 0; k < g.size(); ++k) g[k] += w * h[k];
  }
  const double scale = static_cast<double>(indices.size());
  const auto reg = regularizer_gradient(x);
  for (std::size_t k = 0; k < g.size(); ++k) g[k] = g[k] / scale + reg[k];
  return g;
}

Vector LogisticProblem::local_gradient(std::size_t agent, std::span<const double> x) const {
  return sweep_gradient(agent, x);
}

Vector LogisticProblem::sweep_gradient(std::size_t agent, std::span<const double> x) const {
  check_point(agent, x);
  std::vector<std::size_t> all(params_.samples);
  std::iota(all.begin(), all.end(), std::size_t{0});
  return loss_gradient(agent, x, all);
}

Vector LogisticProblem::sample_gradient_at(std::size_t agent, std::span<const double> x,
                                           std::size_t sample) const {
  check_point(agent, x);
  if (sample >= params_.samples) throw std::out_of_range("sample index out of range");
  const std::size_t idx[1] = {sample};
  return loss_gradient(agent, x, idx);
}

Vector LogisticProblem::stochastic_gradient(std::size_t agent, std::span<const double> x,
                                            std::size_t batch, RngStream& stream) const {
  check_point(agent, x);
  if (batch < 1 || batch > params_.samples)
    throw std::invalid_argument("stochastic_gradient: batch " + std::to_string(batch) +
                                " outside [1, " + std::to_string(params_.samples) + "]");
  std::uniform_int_distribution<std::size_t> pick(0, params_.samples - 1);
  std::vector<std::size_t> idx(batch);
  for (auto& j : idx) j = pick(stream);
  return loss_gradient(agent, x, idx);
}

Vector LogisticProblem::sample_gradient(std::size_t agent, std::span<const double> x,
                                        RngStream& stream) const {
  return stochastic_gradient(agent, x, params_.batch, stream);
}

double LogisticProblem::empirical_noise(std::size_t agent, std::span<const double> x) const {
  const auto mean = local_gradient(agent, x);
  double total = 0.0;
  for (std::size_t j = 0; j < params_.samples; ++j) {
    const auto g = sample_gradient_at(agent, x, j);
    double d = 0.0;
    for (std::size_t k = 0; k < g.size(); ++k) d += (g[k] - mean[k]) * (g[k] - mean[k]);
    total += d;
  }
  return total / static_cast<double>(params_.samples);
}

double LogisticProblem::model_dispersion() const {
  double s = 0.0;
  for (const auto& sh : shards_)
    for (std::size_t k = 0; k < params_.dim; ++k) {
      const double d = sh.local_model[k] - common_model_[k];
      s += d * d;
    }
  return s / static_cast<double>(shards_.size());
}

double LogisticProblem::smoothness_bound() const {
  double worst = 0.0;
  for (std::size_t i = 0; i < shards_.size(); ++i) {
    const auto& h = shards_[i].features;
    // λ_max(HᵀH) = ‖H‖₂²; HᵀH is symmetric PSD so its spectral norm is λ_max.
    DenseMatrix gram = multiply(transpose(h), h);
    PowerIterationOptions opts;
    opts.restart_seed = i;
    worst = std::max(worst, spectral_norm(gram, 1e-8, opts));
  }
  return worst / (4.0 * static_cast<double>(params_.samples)) + 2.0 * params_.reg_coeff;
}

LogisticProblem generate_logistic(const LogisticParams& params, std::uint64_t seed) {
  if (params.agents < 1 || params.dim < 1 || params.samples < 1)
    throw std::invalid_argument("generate_logistic: counts must be positive");
  if (!(params.sigma_h >= 0.0)) throw std::invalid_argument("generate_logistic: sigma_h must be >= 0");
  if (!(params.reg_coeff >= 0.0)) throw std::invalid_argument("generate_logistic: reg_coeff must be >= 0");

  RngStream common_stream(seed, 0, StreamPurpose::model, 0);
  Vector common = gaussian_vector(common_stream, params.dim, 0.0, 1.0);

  std::vector<LogisticShard> shards;
  shards.reserve(params.agents);
  for (std::size_t i = 0; i < params.agents; ++i) {
    RngStream model_stream(seed, i, StreamPurpose::model, 1);
    Vector local = gaussian_vector(model_stream, params.dim, 0.0, params.sigma_h);
    for (std::size_t k = 0; k < params.dim; ++k) local[k] += common[k];

    RngStream data_stream(seed, i, StreamPurpose::data);
    std::normal_distribution<double> normal(0.0, 1.0);
    std::uniform_real_distribution<double> uniform(0.0, 1.0);
    LogisticShard shard{DenseMatrix(params.samples, params.dim), std::vector<std::int8_t>(params.samples), {}};
    for (std::size_t j = 0; j < params.samples; ++j) {
      auto h = shard.features.row(j);
      for (auto& v : h) v = normal(data_stream);
      const double z = uniform(data_stream);
      shard.labels[j] = z <= sigmoid(dot(h, local)) ? 1 : -1;
    }
    shard.local_model = std::move(local);
    shards.push_back(std::move(shard));
  }
  return LogisticProblem(params, std::move(common), std::move(shards));
}

// ---------------------------------------------------------------------------
// Diagonal quadratics

QuadraticProblem::QuadraticProblem(QuadraticParams params, std::vector<Vector> diagonals,
                                   std::vector<Vector> offsets)
    : params_(params), diagonals_(std::move(diagonals)), offsets_(std::move(offsets)) {
  if (diagonals_.empty() || diagonals_.size() != offsets_.size())
    throw std::invalid_argument("QuadraticProblem: need one diagonal and one offset per agent");
  params_.agents = diagonals_.size();
  for (std::size_t i = 0; i < diagonals_.size(); ++i) {
    if (diagonals_[i].size() != params_.dim || offsets_[i].size() != params_.dim)
      throw std::invalid_argument("QuadraticProblem: dimension mismatch");
    for (double a : diagonals_[i])
      if (!(a > 0.0) || !std::isfinite(a)) throw std::invalid_argument("QuadraticProblem: A_i must be positive definite");
  }
  // Average system is diagonal: x*_k = Σ_i b_ik / Σ_i a_ik.
  minimizer_.assign(params_.dim, 0.0);
  for (std::size_t k = 0; k < params_.dim; ++k) {
    double a = 0.0;
    double b = 0.0;
    for (std::size_t i = 0; i < diagonals_.size(); ++i) {
      a += diagonals_[i][k];
      b += offsets_[i][k];
    }
    minimizer_[k] = b / a;
  }
  optimal_value_ = objective(minimizer_);
}

double QuadraticProblem::local_objective(std::size_t agent, std::span<const double> x) const {
  check_point(agent, x);
  const auto& a = diagonals_[agent];
  const auto& b = offsets_[agent];
  double s = 0.0;
  for (std::size_t k = 0; k < x.size(); ++k) s += 0.5 * a[k] * x[k] * x[k] - b[k] * x[k];
  return s;
}

Vector QuadraticProblem::local_gradient(std::size_t agent, std::span<const double> x) const {
  check_point(agent, x);
  const auto& a = diagonals_[agent];
  const auto& b = offsets_[agent];
  Vector g(x.size());
  for (std::size_t k = 0; k < x.size(); ++k) g[k] = a[k] * x[k] - b[k];
  return g;
}

Vector QuadraticProblem::sample_gradient(std::size_t agent, std::span<const double> x,
                                         RngStream& stream) const {
  Vector g = local_gradient(agent, x);
  if (params_.noise_sigma == 0.0) return g;
  const auto noise = gaussian_vector(stream, g.size(), 0.0, params_.noise_sigma);
  for (std::size_t k = 0; k < g.size(); ++k) g[k] += noise[k];
  return g;
}

OracleSpec QuadraticProblem::oracle_spec() const {
  OracleSpec spec;
  spec.dim = params_.dim;
  spec.agents = agents();
  double mu = std::numeric_limits<double>::infinity();
  double lip = 0.0;
  for (std::size_t k = 0; k < params_.dim; ++k) {
    double mean = 0.0;
    for (const auto& d : diagonals_) {
      mean += d[k];
      lip = std::max(lip, d[k]);
    }
    mu = std::min(mu, mean / static_cast<double>(agents()));
  }
  spec.smoothness = lip;
  spec.strong_convexity = mu;
  spec.noise_bound = params_.noise_sigma * params_.noise_sigma * static_cast<double>(params_.dim);
  return spec;
}

double QuadraticProblem::optimality_residual() const {
  double s = 0.0;
  const double n = static_cast<double>(agents());
  for (std::size_t k = 0; k < params_.dim; ++k) {
    double ax = 0.0;
    double b = 0.0;
    for (std::size_t i = 0; i < agents(); ++i) {
      ax += diagonals_[i][k] * minimizer_[k];
      b += offsets_[i][k];
    }
    const double r = ax / n - b / n;
    s += r * r;
  }
  return std::sqrt(s);
}

QuadraticProblem generate_quadratic(const QuadraticParams& params, std::uint64_t seed) {
  if (params.agents < 1 || params.dim < 1) throw std::invalid_argument("generate_quadratic: counts must be positive");
  if (!(params.kappa >= 1.0)) throw std::invalid_argument("generate_quadratic: kappa must be >= 1");
  if (!(params.noise_sigma >= 0.0)) throw std::invalid_argument("generate_quadratic: noise_sigma must be >= 0");

  std::vector<Vector> diagonals;
  std::vector<Vector> offsets;
  for (std::size_t i = 0; i < params.agents; ++i) {
    RngStream stream(seed, i, StreamPurpose::model);
    std::uniform_real_distribution<double> spread(1.0, params.kappa);
    Vector a(params.dim);
    for (std::size_t k = 0; k < params.dim; ++k) {
      if (params.kappa == 1.0 || k == 0)
        a[k] = 1.0;
      else if (k + 1 == params.dim)
        a[k] = params.kappa;
      else
        a[k] = spread(stream);
    }
    RngStream data(seed, i, StreamPurpose::data);
    offsets.push_back(gaussian_vector(data, params.dim, 0.0, 1.0));
    diagonals.push_back(std::move(a));
  }
  return QuadraticProblem(params, std::move(diagonals), std::move(offsets));
}

// ---------------------------------------------------------------------------
// Text container

namespace {

constexpr std::string_view kMagic = "btpp-problem";
constexpr int kVersion = 1;

void write_values(std::ostream& out, std::span<const double> v) {
  for (std::size_t k = 0; k < v.size(); ++k) out << (k ? " " : "") << format_double(v[k]);
  out << '\n';
}

class TokenReader {
 public:
  explicit TokenReader(std::istream& in) : in_(in) {}

  std::string word() {
    std::string w;
    if (!(in_ >> w)) throw std::runtime_error("load_problem: unexpected end of input");
    return w;
  }
  void expect(std::string_view w) {
    const auto got = word();
    if (got != w)
      throw std::runtime_error("load_problem: expected '" + std::string(w) + "', got '" + got + "'");
  }
  double real() {
    const auto w = word();
    const auto v = parse_double(w);
    if (!v) throw std::runtime_error("load_problem: bad number '" + w + "'");
    return *v;
  }
  std::size_t count() {
    const auto w = word();
    const auto v = parse_integer(w);
    if (!v || *v < 0) throw std::runtime_error("load_problem: bad count '" + w + "'");
    return static_cast<std::size_t>(*v);
  }
  double keyed_real(std::string_view key) {
    expect(key);
    return real();
  }
  std::size_t keyed_count(std::string_view key) {
    expect(key);
    return count();
  }
  Vector values(std::size_t len) {
    Vector v(len);
    for (auto& x : v) x = real();
    return v;
  }

 private:
  std::istream& in_;
};

}  // namespace

void save_problem(std::ostream& out, const Problem& problem) {
  out << kMagic << ' ' << kVersion << '\n';
  out << "kind " << problem.kind() << '\n';
  out << "agents " << problem.agents() << '\n';
  out << "dim " << problem.dim() << '\n';
  if (const auto* lp = dynamic_cast<const LogisticProblem*>(&problem)) {
    out << "samples " << lp->samples() << '\n';
    out << "sigma_h " << format_double(lp->sigma_h()) << '\n';
    out << "reg_coeff " << format_double(lp->reg_coeff()) << '\n';
    out << "batch " << lp->batch() << '\n';
    out << "common_model\n";
    write_values(out, lp->common_model());
    for (std::size_t i = 0; i < lp->agents(); ++i) {
      const auto& s = lp->shard(i);
      out << "shard " << i << '\n' << "local_model\n";
      write_values(out, s.local_model);
      out << "labels\n";
      for (std::size_t j = 0; j < s.labels.size(); ++j) out << (j ? " " : "") << int{s.labels[j]};
      out << '\n' << "features\n";
      for (std::size_t j = 0; j < s.features.rows(); ++j) write_values(out, s.features.row(j));
    }
  } else if (const auto* qp = dynamic_cast<const QuadraticProblem*>(&problem)) {
    out << "kappa " << format_double(qp->params().kappa) << '\n';
    out << "noise_sigma " << format_double(qp->params().noise_sigma) << '\n';
    for (std::size_t i = 0; i < qp->agents(); ++i) {
      out << "diagonal " << i << '\n';
      write_values(out, qp->diagonal(i));
      out << "offset " << i << '\n';
      write_values(out, qp->offset(i));
    }
  } else {
    throw std::invalid_argument("save_problem: unsupported problem kind " + problem.kind());
  }
  out << "end\n";
}

std::unique_ptr<Problem> load_problem(std::istream& in) {
  TokenReader r(in);
  r.expect(kMagic);
  if (r.count() != kVersion) throw std::runtime_error("load_problem: unsupported version");
  r.expect("kind");
  const auto kind = r.word();
  const auto agents = r.keyed_count("agents");
  const auto dim = r.keyed_count("dim");

  std::unique_ptr<Problem> result;
  if (kind == "logistic") {
    LogisticParams p;
    p.agents = agents;
    p.dim = dim;
    p.samples = r.keyed_count("samples");
    p.sigma_h = r.keyed_real("sigma_h");
    p.reg_coeff = r.keyed_real("reg_coeff");
    p.batch = r.keyed_count("batch");
    r.expect("common_model");
    Vector common = r.values(dim);
    std::vector<LogisticShard> shards;
    for (std::size_t i = 0; i < agents; ++i) {
      if (r.keyed_count("shard") != i) throw std::runtime_error("load_problem: shards out of order");
      LogisticShard s{DenseMatrix(p.samples, dim), std::vector<std::int8_t>(p.samples), {}};
      r.expect("local_model");
      s.local_model = r.values(dim);
      r.expect("labels");
      for (auto& y : s.labels) {
        const auto w = r.word();
        if (w != "1" && w != "-1") throw std::runtime_error("load_problem: bad label '" + w + "'");
        y = w == "1" ? 1 : -1;
      }
      r.expect("features");
      for (auto& v : s.features.data()) v = r.real();
      shards.push_back(std::move(s));
    }
    result = std::make_unique<LogisticProblem>(p, std::move(common), std::move(shards));
  } else if (kind == "quadratic") {
    QuadraticParams p;
    p.agents = agents;
    p.dim = dim;
    p.kappa = r.keyed_real("kappa");
    p.noise_sigma = r.keyed_real("noise_sigma");
    std::vector<Vector> diagonals;
    std::vector<Vector> offsets;
    for (std::size_t i = 0; i < agents; ++i) {
      if (r.keyed_count("diagonal") != i) throw std::runtime_error("load_problem: agents out of order");
      diagonals.push_back(r.values(dim));
      if (r.keyed_count("offset") != i) throw std::runtime_error("load_problem: agents out of order");
      offsets.push_back(r.values(dim));
    }
    result = std::make_unique<QuadraticProblem>(p, std::move(diagonals), std::move(offsets));
  } else {
    throw std::runtime_error("load_problem: unknown kind '" + kind + "'");
  }
  r.expect("end");
  return result;
}

}  // namespace btpp
