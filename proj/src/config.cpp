#include "btpp/config.hpp"

#include <fstream>
#include <map>
#include <set>

#include "btpp/format.hpp"

namespace btpp {

std::vector<std::uint64_t> parse_integer_list(std::string_view text) {
  std::vector<std::uint64_t> out;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const auto comma = text.find(',', pos);
    const auto item = trim(text.substr(pos, comma == std::string_view::npos ? std::string_view::npos : comma - pos));
    if (item.empty()) throw std::invalid_argument("empty list element");
    const auto dots = item.find("..");
    if (dots != std::string_view::npos) {
      const auto lo = parse_integer(item.substr(0, dots));
      const auto hi = parse_integer(item.substr(dots + 2));
      if (!lo || !hi || *lo < 0 || *hi < *lo) throw std::invalid_argument("bad range '" + std::string(item) + "'");
      for (auto v = *lo; v <= *hi; ++v) out.push_back(static_cast<std::uint64_t>(v));
    } else {
      const auto v = parse_integer(item);
      if (!v || *v < 0) throw std::invalid_argument("bad integer '" + std::string(item) + "'");
      out.push_back(static_cast<std::uint64_t>(*v));
    }
    if (comma == std::string_view::npos) break;
    pos = comma + 1;
  }
  return out;
}

namespace {

struct Entry {
  std::string value;
  std::size_t line;
};

using Section = std::map<std::string, Entry>;

const std::map<std::string, std::set<std::string>>& known_keys() {
  static const std::map<std::string, std::set<std::string>> keys = {
      {"problem", {"type", "n", "p", "J", "sigma_h", "reg_coeff", "kappa", "noise_sigma", "batch", "seed"}},
      {"topology", {"B"}},
      {"algorithm",
       {"tag", "schedule", "gamma", "rescale_by_n", "decay_factor", "decay_interval", "delta_f", "sigma_sq", "L",
        "mu"}},
      {"run", {"T", "seeds", "stride", "engine"}},
  };
  return keys;
}

class Reader {
 public:
  Reader(std::string source, std::map<std::string, Section> sections)
      : source_(std::move(source)), sections_(std::move(sections)) {}

  const Entry* find(const std::string& section, const std::string& key) const {
    auto s = sections_.find(section);
    if (s == sections_.end()) return nullptr;
    auto e = s->second.find(key);
    return e == s->second.end() ? nullptr : &e->second;
  }

  [[noreturn]] void fail(const Entry& e, const std::string& key, const std::string& msg) const {
    throw ConfigError(source_, e.line, key + ": " + msg);
  }

  std::optional<double> real(const std::string& section, const std::string& key) const {
    const auto* e = find(section, key);
    if (!e) return std::nullopt;
    const auto v = parse_double(e->value);
    if (!v) fail(*e, key, "expected a number, got '" + e->value + "'");
    return v;
  }

  std::optional<std::uint64_t> count(const std::string& section, const std::string& key) const {
    const auto* e = find(section, key);
    if (!e) return std::nullopt;
    const auto v = parse_integer(e->value);
    if (!v || *v < 0) fail(*e, key, "expected a non-negative integer, got '" + e->value + "'");
    return static_cast<std::uint64_t>(*v);
  }

  std::optional<std::vector<std::uint64_t>> counts(const std::string& section, const std::string& key) const {
    const auto* e = find(section, key);
    if (!e) return std::nullopt;
    try {
      auto v = parse_integer_list(e->value);
      if (v.empty()) fail(*e, key, "empty list");
      return v;
    } catch (const std::invalid_argument& ex) {
      fail(*e, key, ex.what());
    }
  }

  std::vector<std::string> words(const std::string& section, const std::string& key) const {
    const auto* e = find(section, key);
    if (!e) return {};
    std::vector<std::string> out;
    std::string_view text = e->value;
    std::size_t pos = 0;
    while (true) {
      const auto comma = text.find(',', pos);
      const auto item = trim(text.substr(pos, comma == std::string_view::npos ? std::string_view::npos : comma - pos));
      if (item.empty()) fail(*e, key, "empty list element");
      out.emplace_back(item);
      if (comma == std::string_view::npos) break;
      pos = comma + 1;
    }
    return out;
  }

  const std::string& source() const { return source_; }

 private:
  std::string source_;
  std::map<std::string, Section> sections_;
};

template <class T>
std::vector<std::size_t> to_sizes(const std::vector<T>& v) {
  return {v.begin(), v.end()};
}

}  // namespace

ExperimentConfig parse_config(std::istream& in, const std::string& source) {
  std::map<std::string, Section> sections;
  std::string current;
  std::string raw;
  std::size_t line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    std::string_view line = raw;
    if (const auto hash = line.find_first_of("#;"); hash != std::string_view::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') throw ConfigError(source, line_no, "malformed section header");
      current = std::string(trim(line.substr(1, line.size() - 2)));
      if (!known_keys().count(current)) throw ConfigError(source, line_no, "unknown section [" + current + "]");
      sections[current];
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) throw ConfigError(source, line_no, "expected 'key = value'");
    if (current.empty()) throw ConfigError(source, line_no, "key outside of any section");
    const std::string key(trim(line.substr(0, eq)));
    const std::string value(trim(line.substr(eq + 1)));
    if (!known_keys().at(current).count(key))
      throw ConfigError(source, line_no, "unknown key '" + key + "' in [" + current + "]");
    if (value.empty()) throw ConfigError(source, line_no, "empty value for '" + key + "'");
    if (sections[current].count(key)) throw ConfigError(source, line_no, "duplicate key '" + key + "'");
    sections[current][key] = {value, line_no};
  }

  Reader r(source, std::move(sections));
  ExperimentConfig cfg;

  // [problem]
  if (const auto* e = r.find("problem", "type")) {
    if (e->value == "logistic")
      cfg.problem.kind = ProblemKind::logistic;
    else if (e->value == "quadratic")
      cfg.problem.kind = ProblemKind::quadratic;
    else
      r.fail(*e, "type", "expected logistic or quadratic");
  } else {
    throw ConfigError(source, 0, "[problem] type is required");
  }
  if (auto v = r.counts("problem", "n")) cfg.agents = to_sizes(*v);
  if (auto v = r.count("problem", "p")) {
    cfg.problem.logistic.dim = *v;
    cfg.problem.quadratic.dim = *v;
  }
  if (auto v = r.count("problem", "J")) cfg.problem.logistic.samples = *v;
  if (auto v = r.count("problem", "batch")) cfg.problem.logistic.batch = *v;
  if (auto v = r.real("problem", "sigma_h")) cfg.problem.logistic.sigma_h = *v;
  if (auto v = r.real("problem", "reg_coeff")) cfg.problem.logistic.reg_coeff = *v;
  if (auto v = r.real("problem", "kappa")) cfg.problem.quadratic.kappa = *v;
  if (auto v = r.real("problem", "noise_sigma")) cfg.problem.quadratic.noise_sigma = *v;
  cfg.problem_seed = r.count("problem", "seed");

  const bool logistic = cfg.problem.kind == ProblemKind::logistic;
  for (const char* k : {"J", "batch", "sigma_h", "reg_coeff"})
    if (!logistic && r.find("problem", k)) r.fail(*r.find("problem", k), k, "only valid for type = logistic");
  for (const char* k : {"kappa", "noise_sigma"})
    if (logistic && r.find("problem", k)) r.fail(*r.find("problem", k), k, "only valid for type = quadratic");

  // [topology]
  if (auto v = r.counts("topology", "B")) cfg.branches = to_sizes(*v);

  // [algorithm]
  if (const auto* e = r.find("algorithm", "tag")) {
    cfg.algorithms.clear();
    for (const auto& w : r.words("algorithm", "tag")) {
      const auto tag = parse_algorithm(w);
      if (!tag) r.fail(*e, "tag", "unknown algorithm '" + w + "' (btpp, centralized, dsgd_ring)");
      cfg.algorithms.push_back(*tag);
    }
  }
  if (const auto* e = r.find("algorithm", "schedule")) {
    const auto kind = parse_schedule_kind(e->value);
    if (!kind) r.fail(*e, "schedule", "expected constant, decayed, theorem1 or theorem2");
    cfg.schedule.kind = *kind;
  }
  if (auto v = r.real("algorithm", "gamma")) cfg.schedule.base = *v;
  if (const auto* e = r.find("algorithm", "rescale_by_n")) {
    if (e->value == "true")
      cfg.rescale = RescalePolicy::all;
    else if (e->value == "false")
      cfg.rescale = RescalePolicy::none;
    else if (e->value == "btpp")
      cfg.rescale = RescalePolicy::btpp_only;
    else
      r.fail(*e, "rescale_by_n", "expected true, false or btpp");
  }
  if (auto v = r.real("algorithm", "decay_factor")) cfg.schedule.decay_factor = *v;
  if (auto v = r.count("algorithm", "decay_interval")) cfg.schedule.decay_interval = *v;
  cfg.schedule.theorem.delta_f = r.real("algorithm", "delta_f");
  cfg.schedule.theorem.sigma_sq = r.real("algorithm", "sigma_sq");
  cfg.schedule.theorem.smoothness = r.real("algorithm", "L");
  cfg.schedule.theorem.strong_convexity = r.real("algorithm", "mu");

  // [run]
  if (auto v = r.count("run", "T")) cfg.iterations = *v;
  if (auto v = r.counts("run", "seeds")) cfg.seeds = *v;
  if (auto v = r.count("run", "stride")) cfg.stride = *v;
  if (const auto* e = r.find("run", "engine")) {
    const auto eng = parse_engine(e->value);
    if (!eng) r.fail(*e, "engine", "expected matrix or message");
    cfg.engine = *eng;
  }

  // Validate every run before anything is computed.
  const auto runs = cfg.expand();
  for (const auto& run : runs) {
    try {
      run.validate();
      if (run.algorithm == AlgorithmTag::btpp && run.schedule.kind == ScheduleKind::theorem2 &&
          run.iterations < 2 * build_bary_tree(run.problem.agents(), run.branch).diameter())
        throw std::invalid_argument("algorithm: theorem2 requires T >= 2d");
    } catch (const std::invalid_argument& ex) {
      throw ConfigError(source, 0, ex.what());
    }
  }
  return cfg;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(path, 0, "cannot open file");
  return parse_config(in, path);
}

std::vector<RunConfig> ExperimentConfig::expand() const {
  std::vector<RunConfig> runs;
  for (auto n : agents) {
    for (std::size_t bi = 0; bi < branches.size(); ++bi) {
      for (auto algo : algorithms) {
        if (algo != AlgorithmTag::btpp && bi > 0) continue;
        for (auto seed : seeds) {
          RunConfig rc;
          rc.algorithm = algo;
          rc.problem = problem;
          rc.problem.set_agents(n);
          rc.branch = branches[bi];
          rc.schedule = schedule;
          rc.schedule.agents = n;
          rc.schedule.rescale_by_n =
              rescale == RescalePolicy::all || (rescale == RescalePolicy::btpp_only && algo == AlgorithmTag::btpp);
          rc.iterations = iterations;
          rc.seed = seed;
          rc.problem_seed = problem_seed;
          rc.stride = stride;
          rc.engine = algo == AlgorithmTag::btpp ? engine : Engine::matrix;
          runs.push_back(rc);
        }
      }
    }
  }
  return runs;
}

}  // namespace btpp
