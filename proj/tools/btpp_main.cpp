// Command-line front end: verify, run, sweep, report, export-problem.

#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "btpp/app.hpp"
#include "btpp/config.hpp"
#include "btpp/problems.hpp"

namespace {

using namespace btpp;

// Writes to --out when given, standard output otherwise.
class Output {
 public:
  explicit Output(const std::string& path) {
    if (!path.empty()) {
      file_.open(path, std::ios::binary);
      if (!file_) throw std::runtime_error("cannot open output file " + path);
    }
  }
  std::ostream& stream() { return file_.is_open() ? static_cast<std::ostream&>(file_) : std::cout; }

 private:
  std::ofstream file_;
};

ExperimentConfig load_with_overrides(const std::string& path, const std::string& seeds) {
  auto cfg = load_config(path);
  if (!seeds.empty()) {
    try {
      cfg.seeds = parse_integer_list(seeds);
    } catch (const std::invalid_argument& e) {
      throw ConfigError("--seeds", 0, e.what());
    }
  }
  return cfg;
}

int run_configs(const ExperimentConfig& cfg, const std::string& out_path) {
  const auto outcomes = execute_runs(cfg.expand(), worker_count());
  Output out(out_path);
  return report_outcomes(outcomes, out.stream(), std::cerr);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Simulation lab for B-ary tree push-pull decentralized SGD"};
  app.require_subcommand(1);

  std::string grid_text;
  std::string fault_text;
  auto* verify = app.add_subcommand("verify", "Check the tree, mixing-matrix and conservation properties");
  verify->add_option("--grid", grid_text, "Grid such as 'n=1..64;B=2,3,4,8'");
  verify->add_option("--inject-fault", fault_text, "Corrupt R for 'n,B' (checker self-test)")->group("");

  std::string config_path;
  std::string out_path;
  std::string seeds_text;
  auto* run = app.add_subcommand("run", "Run one configuration over its seeds and emit CSV");
  run->add_option("--config", config_path, "Experiment file")->required();
  run->add_option("--out", out_path, "Output CSV (default: stdout)");
  run->add_option("--seeds", seeds_text, "Override seeds, e.g. '1..10'");

  auto* sweep = app.add_subcommand("sweep", "Run the Cartesian product of n, B, tag and seeds");
  sweep->add_option("--config", config_path, "Experiment file")->required();
  sweep->add_option("--out", out_path, "Output CSV (default: stdout)");
  sweep->add_option("--seeds", seeds_text, "Override seeds, e.g. '1..10'");

  std::vector<std::string> csv_paths;
  std::string group_by = "iter,algo,n,B";
  std::string aggregate = "mean";
  auto* report = app.add_subcommand("report", "Aggregate CSV rows over seeds");
  report->add_option("csv", csv_paths, "Input CSV files")->required();
  report->add_option("--group-by", group_by, "Comma-separated grouping columns");
  report->add_option("--aggregate", aggregate, "mean or median")->check(CLI::IsMember({"mean", "median"}));
  report->add_option("--out", out_path, "Output CSV (default: stdout)");

  std::uint64_t problem_seed = 0;
  auto* export_problem = app.add_subcommand("export-problem", "Write the generated problem as a text container");
  export_problem->add_option("--config", config_path, "Experiment file")->required();
  export_problem->add_option("--seed", problem_seed, "Data seed");
  export_problem->add_option("--out", out_path, "Output file (default: stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitValidation;
  }

  try {
    if (*verify) {
      VerifyGrid grid = grid_text.empty() ? VerifyGrid::defaults() : VerifyGrid::parse(grid_text);
      VerifyOptions opts;
      if (!fault_text.empty()) {
        const auto nb = parse_integer_list(fault_text);
        if (nb.size() != 2 || nb[0] < 1) throw std::invalid_argument("--inject-fault expects 'n,B'");
        opts.inject_fault = std::make_pair(static_cast<std::size_t>(nb[0]), static_cast<std::size_t>(nb[1]));
      }
      const auto result = run_verify(grid, opts);
      result.print(std::cout);
      return result.ok() ? kExitOk : kExitVerification;
    }
    if (*run) {
      const auto cfg = load_with_overrides(config_path, seeds_text);
      if (!cfg.single_run_shape())
        throw ConfigError(config_path, 0, "run takes a single n, B and tag; use sweep for lists");
      return run_configs(cfg, out_path);
    }
    if (*sweep) return run_configs(load_with_overrides(config_path, seeds_text), out_path);
    if (*report) {
      std::vector<CsvTable> tables;
      for (const auto& p : csv_paths) {
        std::ifstream in(p);
        if (!in) throw std::invalid_argument("cannot open " + p);
        tables.push_back(read_csv(in, p));
      }
      std::vector<std::string> keys;
      std::stringstream ss(group_by);
      for (std::string k; std::getline(ss, k, ',');)
        if (!k.empty()) keys.push_back(k);
      const auto table =
          aggregate_tables(tables, keys, aggregate == "median" ? Aggregate::median : Aggregate::mean);
      Output out(out_path);
      write_table(out.stream(), table);
      return kExitOk;
    }
    if (*export_problem) {
      const auto cfg = load_config(config_path);
      if (cfg.agents.size() != 1) throw ConfigError(config_path, 0, "export-problem takes a single n");
      auto spec = cfg.problem;
      spec.set_agents(cfg.agents.front());
      const auto problem = make_problem(spec, problem_seed);
      Output out(out_path);
      save_problem(out.stream(), *problem);
      return kExitOk;
    }
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitValidation;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitValidation;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitValidation;
  }
  return kExitOk;
}
