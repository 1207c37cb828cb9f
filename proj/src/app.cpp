#include "btpp/app.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>
#include <thread>

#include "btpp/format.hpp"

namespace btpp {

// ---------------------------------------------------------------------------
// verify

VerifyGrid VerifyGrid::defaults() {
  VerifyGrid g;
  for (std::size_t n = 1; n <= 64; ++n) g.agents.push_back(n);
  g.branches = {2, 3, 4, 8};
  return g;
}

VerifyGrid VerifyGrid::parse(std::string_view text) {
  VerifyGrid g = defaults();
  std::size_t pos = 0;
  while (pos < text.size()) {
    auto semi = text.find(';', pos);
    auto part = trim(text.substr(pos, semi == std::string_view::npos ? std::string_view::npos : semi - pos));
    pos = semi == std::string_view::npos ? text.size() : semi + 1;
    if (part.empty()) continue;
    const auto eq = part.find('=');
    if (eq == std::string_view::npos) throw std::invalid_argument("grid: expected n=... or B=...");
    const auto key = trim(part.substr(0, eq));
    const auto values = parse_integer_list(part.substr(eq + 1));
    if (key == "n") {
      g.agents.assign(values.begin(), values.end());
      if (std::count(g.agents.begin(), g.agents.end(), 0)) throw std::invalid_argument("grid: n must be >= 1");
    } else if (key == "B") {
      g.branches.assign(values.begin(), values.end());
      for (auto b : g.branches)
        if (b < 2) throw std::invalid_argument("grid: B must be >= 2");
    } else {
      throw std::invalid_argument("grid: unknown key '" + std::string(key) + "'");
    }
  }
  return g;
}

bool VerifyReport::ok() const {
  return std::all_of(properties.begin(), properties.end(), [](const auto& p) { return p.failed == 0; });
}

void VerifyReport::print(std::ostream& out) const {
  for (const auto& p : properties) {
    out << (p.failed == 0 ? "PASS " : "FAIL ") << p.name << "  checked=" << p.checked << " failed=" << p.failed
        << '\n';
    for (const auto& f : p.failures) out << "    " << f << '\n';
  }
  out << (ok() ? "all properties hold\n" : "verification FAILED\n");
}

namespace {

class PropertyLog {
 public:
  explicit PropertyLog(std::string name) { result_.name = std::move(name); }

  void check(bool ok, const std::string& where) {
    ++result_.checked;
    if (ok) return;
    ++result_.failed;
    if (result_.failures.size() < 8) result_.failures.push_back(where);
  }

  PropertyResult take() { return std::move(result_); }

 private:
  PropertyResult result_;
};

std::string at(std::size_t n, std::size_t b) { return "n=" + std::to_string(n) + " B=" + std::to_string(b); }
std::string at(std::size_t n, std::size_t b, std::size_t k) { return at(n, b) + " k=" + std::to_string(k); }

bool tree_ok(const BAryTree& t) {
  const std::size_t n = t.size();
  const std::size_t b = t.branch();
  if (t.parent(1) != 1) return false;
  for (std::size_t i = 2; i <= n; ++i) {
    if (t.parent(i) != (i - 2) / b + 1) return false;
    if (t.depth(i) > t.diameter()) return false;
  }
  for (std::size_t j = 1; j <= n; ++j) {
    const auto& c = t.children(j);
    if (c.size() > b || !std::is_sorted(c.begin(), c.end())) return false;
    for (std::size_t s = 0; s < c.size(); ++s)
      if (c[s] != b * (j - 1) + 2 + s) return false;
  }
  const std::size_t d = t.diameter();
  const bool lower = d == 0 || full_tree_size(b, d - 1) < n;
  if (!lower || n > full_tree_size(b, d)) return false;
  if (b != 2) return true;
  // For B = 2 the layer count also equals floor(log2 n): 2^d <= n < 2^(d+1).
  std::uint64_t pw = 1;
  for (std::size_t i = 0; i < d; ++i) pw *= b;
  return pw <= n && n < pw * b;
}

// (e_1 - 1)ᵀ(Cⁱ - Cⁱ⁻¹) is the indicator of the nodes at depth i.
bool layer_indicator_ok(const BAryTree& t, std::size_t i, const IntMatrix& ci, const IntMatrix& ci_prev) {
  const std::size_t n = t.size();
  const std::size_t lo = full_tree_size(t.branch(), i - 1) + 1;
  const std::size_t hi = i + 1 <= t.diameter() ? full_tree_size(t.branch(), i) : n;
  for (std::size_t col = 0; col < n; ++col) {
    std::int64_t v = 0;
    for (std::size_t row = 0; row < n; ++row) {
      const std::int64_t w = (row == 0 ? 1 : 0) - 1;
      v += w * (ci(row, col) - ci_prev(row, col));
    }
    const std::int64_t expect = (col + 1 >= lo && col + 1 <= hi) ? 1 : 0;
    if (v != expect) return false;
  }
  return true;
}

}  // namespace

VerifyReport run_verify(const VerifyGrid& grid, const VerifyOptions& options) {
  PropertyLog tree_log("tree_layout");
  PropertyLog row_log("pull_row_stochastic");
  PropertyLog col_log("push_is_transpose_column_stochastic");
  PropertyLog power_log("closed_form_power_equals_product");
  PropertyLog consensus_log("power_d_equals_consensus");
  PropertyLog norm_log("spectral_norm_bound");
  PropertyLog eig_log("left_eigenvector_u");
  PropertyLog layer_log("layer_indicator");
  PropertyLog degree_log("degree_bound");
  PropertyLog conservation_log("tracker_conservation");

  for (auto n : grid.agents) {
    for (auto b : grid.branches) {
      const auto tree = build_bary_tree(n, b);
      const std::size_t d = tree.diameter();
      tree_log.check(tree_ok(tree), at(n, b));

      auto pull = pull_matrix(tree);
      if (options.inject_fault && options.inject_fault->first == n && options.inject_fault->second == b)
        pull = pull.with_entry_flipped(n - 1, 0);
      const auto push = push_matrix(tree);
      const IntMatrix r = pull.to_int();
      const IntMatrix c = push.to_int();

      bool single = true;
      for (std::size_t i = 0; i < n; ++i) single = single && pull.row(i).size() == 1;
      bool self_loops_ok = true;
      for (std::size_t i = 0; i < n; ++i) self_loops_ok = self_loops_ok && (r(i, i) == 1) == (i == 0);
      row_log.check(is_row_stochastic(r) && single && self_loops_ok, at(n, b));

      bool transpose_ok = true;
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) transpose_ok = transpose_ok && c(i, j) == r(j, i);
      col_log.check(transpose_ok && is_column_stochastic(c), at(n, b));

      // Rᵏ by repeated integer products, k = 1..max(d, 1) + 1.
      IntMatrix rk = r;
      const std::size_t kmax = std::max<std::size_t>(d, 1) + 1;
      for (std::size_t k = 1; k <= kmax; ++k) {
        if (k > 1) rk = rk * r;
        power_log.check(closed_form_power(tree, k).to_int() == rk, at(n, b, k));

        if (k == std::max<std::size_t>(d, 1)) {
          // n·Rᵈ = 1uᵀ, i.e. first column n, everything else 0.
          bool zero = true;
          for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < n; ++j) {
              const std::int64_t lhs = static_cast<std::int64_t>(n) * rk(i, j);
              const std::int64_t rhs = j == 0 ? static_cast<std::int64_t>(n) : 0;
              zero = zero && lhs == rhs;
            }
          consensus_log.check(zero, at(n, b, k));
        }
        if (k + 1 <= d) {
          const DenseMatrix diff = subtract(rk.to_dense(), consensus_outer(n));
          PowerIterationOptions po;
          po.restart_seed = n * 1000003ULL + b * 1009ULL + k;
          bool ok = false;
          std::string where = at(n, b, k);
          try {
            const double s = spectral_norm(diff, options.power_tol, po);
            ok = s <= std::sqrt(static_cast<double>(n)) + 1e-9;
            where += " norm=" + format_double(s);
          } catch (const NonConvergenceError& e) {
            where += std::string(" ") + e.what();
          }
          norm_log.check(ok, where);
        }
      }

      // uᵀR = uᵀ and Cu = u with u = n e_1.
      bool eig = true;
      for (std::size_t j = 0; j < n; ++j) {
        std::int64_t ur = 0;
        std::int64_t cu = 0;
        for (std::size_t i = 0; i < n; ++i) {
          const std::int64_t ui = i == 0 ? static_cast<std::int64_t>(n) : 0;
          ur += ui * r(i, j);
          cu += c(j, i) * ui;
        }
        const std::int64_t uj = j == 0 ? static_cast<std::int64_t>(n) : 0;
        eig = eig && ur == uj && cu == uj;
      }
      eig_log.check(eig, at(n, b));

      IntMatrix ci_prev(n);
      for (std::size_t i = 0; i < n; ++i) ci_prev(i, i) = 1;
      IntMatrix ci = c;
      for (std::size_t i = 1; i <= d; ++i) {
        layer_log.check(layer_indicator_ok(tree, i, ci, ci_prev), at(n, b, i));
        ci_prev = ci;
        ci = ci * c;
      }

      const auto audit = comm_audit(tree);
      degree_log.check(audit.max_partners <= b + 1 && audit.messages_per_round == 2 * (n - 1), at(n, b));

      LogisticParams lp;
      lp.agents = n;
      lp.dim = 3;
      lp.samples = 10;
      const auto problem = generate_logistic(lp, 7);
      const TreeOperators ops(tree);
      const Vector x0(lp.dim, 0.0);
      const std::uint64_t seed = 11;
      auto state = btpp_init(problem, x0, seed);
      bool conserved = true;
      for (std::size_t t = 0;; ++t) {
        const auto sy = column_sums(state.y);
        const auto sg = column_sums(state.g_prev);
        double diff = 0.0;
        double scale = 0.0;
        for (std::size_t k = 0; k < sy.size(); ++k) {
          diff = std::max(diff, std::abs(sy[k] - sg[k]));
          scale = std::max(scale, std::abs(sg[k]));
        }
        conserved = conserved && diff <= 1e-9 * (1.0 + scale);
        if (t == options.conservation_iterations) break;
        state = btpp_step(problem, state, ops, 0.1 / static_cast<double>(n), seed);
      }
      conservation_log.check(conserved, at(n, b));
    }
  }

  VerifyReport report;
  for (auto* log : {&tree_log, &row_log, &col_log, &power_log, &consensus_log, &norm_log, &eig_log, &layer_log,
                    &degree_log, &conservation_log})
    report.properties.push_back(log->take());
  return report;
}

// ---------------------------------------------------------------------------
// run / sweep

std::string csv_row(const MetricsRecord& r) {
  std::string s;
  s += std::to_string(r.iter) + ',';
  s += to_string(r.algo) + ',';
  s += to_string(r.engine) + ',';
  s += std::to_string(r.n) + ',';
  s += (r.algo == AlgorithmTag::btpp ? std::to_string(r.branch) : std::string()) + ',';
  s += std::to_string(r.seed) + ',';
  s += format_double(r.gamma) + ',';
  s += format_double(r.grad_norm_sq) + ',';
  s += format_double(r.consensus_err) + ',';
  s += (r.dist_to_opt ? format_double(*r.dist_to_opt) : std::string()) + ',';
  s += (r.f_gap ? format_double(*r.f_gap) : std::string()) + ',';
  s += std::to_string(r.vectors_sent);
  return s;
}

void write_csv(std::ostream& out, const std::vector<MetricsRecord>& records, bool header) {
  if (header) out << kCsvHeader << '\n';
  for (const auto& r : records) out << csv_row(r) << '\n';
}

std::size_t worker_count() {
  if (const char* env = std::getenv("BTPP_THREADS")) {
    if (const auto v = parse_integer(env); v && *v > 0) return static_cast<std::size_t>(*v);
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

std::vector<RunOutcome> execute_runs(const std::vector<RunConfig>& runs, std::size_t workers) {
  std::vector<RunOutcome> outcomes(runs.size());
  std::atomic<std::size_t> next{0};
  auto work = [&] {
    for (std::size_t i = next++; i < runs.size(); i = next++) {
      auto& out = outcomes[i];
      out.config = runs[i];
      try {
        out.records = run_experiment(runs[i]);
      } catch (const RunDivergedError& e) {
        out.records = e.records();
        out.divergence = e.what();
      }
    }
  };
  workers = std::clamp<std::size_t>(workers, 1, std::max<std::size_t>(runs.size(), 1));
  if (workers == 1) {
    work();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(work);
  }
  return outcomes;
}

int report_outcomes(const std::vector<RunOutcome>& outcomes, std::ostream& csv, std::ostream& log) {
  csv << kCsvHeader << '\n';
  std::size_t diverged = 0;
  for (const auto& o : outcomes) {
    write_csv(csv, o.records, false);
    if (o.divergence) {
      ++diverged;
      log << "run algo=" << to_string(o.config.algorithm) << " n=" << o.config.problem.agents()
          << " B=" << o.config.branch << " seed=" << o.config.seed << ": " << *o.divergence << '\n';
    }
  }
  return !outcomes.empty() && diverged == outcomes.size() ? kExitDiverged : kExitOk;
}

// ---------------------------------------------------------------------------
// report

namespace {

std::vector<std::string> split_csv_line(std::string_view line) {
  std::vector<std::string> out;
  std::size_t pos = 0;
  while (true) {
    const auto comma = line.find(',', pos);
    out.emplace_back(line.substr(pos, comma == std::string_view::npos ? std::string_view::npos : comma - pos));
    if (comma == std::string_view::npos) break;
    pos = comma + 1;
  }
  return out;
}

const std::vector<std::string>& metric_columns() {
  static const std::vector<std::string> cols = {"gamma", "grad_norm_sq", "consensus_err", "dist_to_opt", "f_gap",
                                                "vectors_sent"};
  return cols;
}

}  // namespace

CsvTable read_csv(std::istream& in, const std::string& source) {
  CsvTable t;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    auto fields = split_csv_line(line);
    if (t.header.empty()) {
      t.header = std::move(fields);
      continue;
    }
    if (fields.size() != t.header.size())
      throw std::runtime_error(source + ":" + std::to_string(line_no) + ": expected " +
                               std::to_string(t.header.size()) + " fields, got " + std::to_string(fields.size()));
    t.rows.push_back(std::move(fields));
  }
  if (t.header.empty()) throw std::runtime_error(source + ": empty CSV");
  return t;
}

CsvTable aggregate_tables(const std::vector<CsvTable>& inputs, const std::vector<std::string>& group_by,
                          Aggregate aggregate) {
  if (inputs.empty()) throw std::invalid_argument("report: no inputs");
  const auto& header = inputs.front().header;
  for (const auto& t : inputs)
    if (t.header != header) throw std::invalid_argument("report: header mismatch between inputs");

  auto column = [&](const std::string& name) -> std::size_t {
    const auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) throw std::invalid_argument("report: no column '" + name + "'");
    return static_cast<std::size_t>(it - header.begin());
  };
  std::vector<std::size_t> keys;
  for (const auto& g : group_by) keys.push_back(column(g));
  std::vector<std::pair<std::string, std::size_t>> metrics;
  for (const auto& m : metric_columns())
    if (std::find(header.begin(), header.end(), m) != header.end() &&
        std::find(group_by.begin(), group_by.end(), m) == group_by.end())
      metrics.emplace_back(m, column(m));

  std::vector<std::vector<std::string>> order;
  std::map<std::vector<std::string>, std::vector<std::vector<double>>> groups;
  for (const auto& t : inputs) {
    for (const auto& row : t.rows) {
      std::vector<std::string> key;
      for (auto k : keys) key.push_back(row[k]);
      auto [it, inserted] = groups.try_emplace(key, metrics.size());
      if (inserted) order.push_back(key);
      for (std::size_t m = 0; m < metrics.size(); ++m) {
        const auto& cell = row[metrics[m].second];
        if (cell.empty()) continue;
        const auto v = parse_double(cell);
        if (!v) throw std::invalid_argument("report: bad number '" + cell + "' in column " + metrics[m].first);
        it->second[m].push_back(*v);
      }
    }
  }

  const std::string agg_name = aggregate == Aggregate::mean ? "mean" : "median";
  CsvTable out;
  out.header = group_by;
  for (const auto& [name, idx] : metrics) {
    out.header.push_back(name + "_count");
    out.header.push_back(name + "_" + agg_name);
    out.header.push_back(name + "_std");
  }
  for (const auto& key : order) {
    auto row = key;
    for (auto values : groups.at(key)) {
      row.push_back(std::to_string(values.size()));
      if (values.empty()) {
        row.emplace_back();
        row.emplace_back();
        continue;
      }
      double mean = 0.0;
      for (double v : values) mean += v;
      mean /= static_cast<double>(values.size());
      double center = mean;
      if (aggregate == Aggregate::median) {
        std::sort(values.begin(), values.end());
        const auto m = values.size() / 2;
        center = values.size() % 2 ? values[m] : 0.5 * (values[m - 1] + values[m]);
      }
      double ss = 0.0;
      for (double v : values) ss += (v - mean) * (v - mean);
      const double sd = values.size() > 1 ? std::sqrt(ss / static_cast<double>(values.size() - 1)) : 0.0;
      row.push_back(format_double(center));
      row.push_back(format_double(sd));
    }
    out.rows.push_back(std::move(row));
  }
  return out;
}

void write_table(std::ostream& out, const CsvTable& table) {
  auto line = [&](const std::vector<std::string>& f) {
    for (std::size_t i = 0; i < f.size(); ++i) out << (i ? "," : "") << f[i];
    out << '\n';
  };
  line(table.header);
  for (const auto& r : table.rows) line(r);
}

}  // namespace btpp
