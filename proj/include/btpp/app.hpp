#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "btpp/config.hpp"
#include "btpp/simulator.hpp"

namespace btpp {

enum ExitCode : int {
  kExitOk = 0,
  kExitValidation = 1,
  kExitVerification = 2,
  kExitDiverged = 3,
};

// ---------------------------------------------------------------------------
// verify

struct VerifyGrid {
  std::vector<std::size_t> agents;
  std::vector<std::size_t> branches;

  static VerifyGrid defaults();
  /// "n=1..64;B=2,3,4,8"; either part may be omitted.
  static VerifyGrid parse(std::string_view text);
};

struct VerifyOptions {
  double power_tol = 1e-6;
  /// Corrupts one pull-matrix entry for this (n, B); used to test the checker.
  std::optional<std::pair<std::size_t, std::size_t>> inject_fault;
  /// Iterations of the short BTPP run behind the conservation check.
  std::size_t conservation_iterations = 40;
};

struct PropertyResult {
  std::string name;
  std::size_t checked = 0;
  std::size_t failed = 0;
  std::vector<std::string> failures;  ///< first few failing cases
};

struct VerifyReport {
  std::vector<PropertyResult> properties;
  bool ok() const;
  void print(std::ostream& out) const;
};

VerifyReport run_verify(const VerifyGrid& grid, const VerifyOptions& options = {});

// ---------------------------------------------------------------------------
// run / sweep

inline constexpr const char* kCsvHeader =
    "iter,algo,engine,n,B,seed,gamma,grad_norm_sq,consensus_err,dist_to_opt,f_gap,vectors_sent";

std::string csv_row(const MetricsRecord& r);
void write_csv(std::ostream& out, const std::vector<MetricsRecord>& records, bool header = true);

struct RunOutcome {
  RunConfig config;
  std::vector<MetricsRecord> records;
  std::optional<std::string> divergence;
};

/// Worker count from BTPP_THREADS, else the hardware concurrency.
std::size_t worker_count();

/// Runs every config on a worker pool; results come back in input order.
std::vector<RunOutcome> execute_runs(const std::vector<RunConfig>& runs, std::size_t workers);

/// Writes the CSV of all outcomes, divergence notes to `log`, and returns the exit code.
int report_outcomes(const std::vector<RunOutcome>& outcomes, std::ostream& csv, std::ostream& log);

// ---------------------------------------------------------------------------
// report

enum class Aggregate { mean, median };

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
};

CsvTable read_csv(std::istream& in, const std::string& source);

/// Groups rows by `group_by` columns (first-appearance order) and writes, per
/// metric, the count of non-empty values, their mean or median, and the sample
/// standard deviation.
CsvTable aggregate_tables(const std::vector<CsvTable>& inputs, const std::vector<std::string>& group_by,
                          Aggregate aggregate);

void write_table(std::ostream& out, const CsvTable& table);

}  // namespace btpp
